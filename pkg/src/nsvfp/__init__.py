"""Spectral laboratory for a compressible Navier-Stokes / Vlasov-Fokker-Planck
perturbation system with momentum and energy exchange."""

__version__ = "0.1.0"
