"""Wavelet band energy of heartbeat RR series and regime segmentation."""

__version__ = "0.1.0"
