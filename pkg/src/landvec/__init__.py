"""Learned latent representations of optimization landscapes.

Sample a function on a Sobol design, normalize the values, and encode the
resulting vector with a (variational) autoencoder.  The latent vectors can
be used to retrieve similar cheap functions or as classification features.
"""

__version__ = "0.1.0"
