"""Feature aggregation (PANet, BiFPN, SEN) for joint sound event localization and detection."""

__version__ = "0.1.0"
