"""Speech-driven 3D gesture generation with a variational transformer."""
__version__ = "0.1.0"
