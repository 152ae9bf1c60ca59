"""Deep GPs with activated inducing variables, the network bridge and training."""
