"""Forward-only residual compensation convolutional networks."""
