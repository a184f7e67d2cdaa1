from . import control, energy, estimation

__all__ = ["control", "energy", "estimation"]
