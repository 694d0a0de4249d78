"""Orbital-angular-momentum transfer from electron vortex beams to displaced atoms.

Computes inelastic dipole-transition matrix elements between Bessel-beam probe
states for an atom displaced from the vortex axis, the resulting outgoing-OAM
spectra, and the decay of the chiral (dichroic) signal with displacement and
cluster size.
"""

__version__ = "0.1.0"

from .model import AtomicState, BesselBeam, DipoleTransition, Displacement

__all__ = [
    "AtomicState",
    "BesselBeam",
    "DipoleTransition",
    "Displacement",
    "__version__",
]
