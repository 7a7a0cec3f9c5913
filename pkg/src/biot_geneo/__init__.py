"""Three-field Biot poroelasticity solver with GenEO two-level Schwarz preconditioning."""

__version__ = "0.1.0"
