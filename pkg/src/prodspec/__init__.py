"""prodspec: exact spectra and asymptotics on products of spheres and tori."""

__version__ = "0.1.0"
