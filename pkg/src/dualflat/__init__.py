"""Dually flat geometry of binary exponential families and related webs."""
from . import boltzmann, exp_family, expr, monge_ampere, webs
from .estimators import BoltzmannMachine, ExponentialFamilyModel
from .exp_family import StateSpace

__all__ = ["boltzmann", "exp_family", "expr", "monge_ampere", "webs",
           "BoltzmannMachine", "ExponentialFamilyModel", "StateSpace"]
__version__ = "0.1.0"
