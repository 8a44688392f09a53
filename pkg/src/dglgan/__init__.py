"""Discriminator-guided GAN compression on toy problems."""

__version__ = "0.1.0"
