"""Cervical flexo-extension kinematics from RGB + depth recordings."""
__version__ = "0.1.0"
