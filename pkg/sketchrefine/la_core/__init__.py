"""Dense linear algebra kernels: Householder QR, triangular solves, thin SVD."""
