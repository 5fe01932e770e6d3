"""Hybrid beamforming toolkit: synthetic channels, SS-burst and codebook
design, near-optimal digital/hybrid precoder benchmarks, and unsupervised
RSSI-based precoder networks (HBF-Net / AFP-Net)."""

__version__ = "0.1.0"
