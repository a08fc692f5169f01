"""Random subspace embeddings: sparse sign and Gaussian."""
