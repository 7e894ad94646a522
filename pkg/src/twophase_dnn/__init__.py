"""Meshfree deep-network least-squares solver for two-phase interface problems."""
from .jets import Jet, Tape, Var, jet_var, jet_binary, jet_unary, tape_backward

__version__ = "0.1.0"
