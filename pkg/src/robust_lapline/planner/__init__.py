"""Spatial direct-collocation planner for the nominal and robust variants."""

from .collocation import CollocationGrid, gauss_legendre
from .export import build_nlp, export_reference, plan_variant
from .nlp import NLP, Limits, OpenStart, Weights, transcribe
from .robust import frenet_to_cartesian, plan_robust
from .solve import PlanResult, SolverStats, initial_guess, solve

__all__ = ["CollocationGrid", "gauss_legendre", "NLP", "Limits", "OpenStart", "Weights",
           "transcribe", "PlanResult", "SolverStats", "initial_guess", "solve",
           "plan_robust", "plan_variant", "build_nlp", "export_reference",
           "frenet_to_cartesian"]
