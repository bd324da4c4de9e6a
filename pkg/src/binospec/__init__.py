"""Bayesian deconvolution of photon-absorption spectra under binomial noise."""
