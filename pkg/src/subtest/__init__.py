"""Edge-distribution-free graph property testing: testers, witnesses,
hard-instance generators, exact oracles and a Monte Carlo harness."""

from .core import EdgeDistribution, MassFunction, NIL, RngSeed
from .errors import SubtestError
from .generators import TestInstance, family_instance
from .testers import LabeledSample, PropertySpec, Verdict

__version__ = "0.1.0"

__all__ = ["EdgeDistribution", "MassFunction", "NIL", "RngSeed", "SubtestError", "TestInstance",
           "family_instance", "LabeledSample", "PropertySpec", "Verdict"]
