"""Exact branch and price for coalition structure generation over graphs."""
from .bnb import SolveConfig, SolveReport, solve
from .instance import Edge, GenSpec, Instance, Kind, Sign, generate_gilbert, parse_instance, write_instance
from .oracle import enumerate_optimum
from .valuation import coalition_value, structure_value

__all__ = [
    "Edge", "GenSpec", "Instance", "Kind", "Sign", "SolveConfig", "SolveReport",
    "coalition_value", "enumerate_optimum", "generate_gilbert", "parse_instance",
    "solve", "structure_value", "write_instance",
]
__version__ = "0.1.0"
