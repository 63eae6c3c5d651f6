"""Battery cycle-life prediction from early-cycle DCIR pulse features."""

__version__ = "0.1.0"
