"""Factor-model covariance estimation with adaptive thresholding - Main package."""

__version__ = "0.1.0"
