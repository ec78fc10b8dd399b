"""Short-block FEC link simulator: polar / LDPC / convolutional codes over OFDM on AWGN."""

__version__ = "0.1.0"
