"""Symbolic and numeric tools for coverings, pseudosymmetries and Backlund transformations of PDEs in two variables."""
from .expr import ExprError, SamplingDomain, ZeroVerdict, is_zero, normalize, render
from .jet import EqSystem, JetCoord, Ranking, RankingError, Rule
from .report import Check, Report

__version__ = "0.1.0"
