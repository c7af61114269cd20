"""Exception types shared across the package."""


class SubtestError(Exception):
    """Base class for all errors raised by this package."""


class InvalidMass(SubtestError, ValueError):
    """A mass function has negative entries or total mass above one."""


class ShapeError(SubtestError, ValueError):
    """Two vectors that must share an index set do not."""


class TreeError(SubtestError, ValueError):
    """A directed rooted tree failed validation."""


class RangeError(SubtestError, ValueError):
    """A numeric parameter lies outside its admissible range."""


class BudgetError(SubtestError, ValueError):
    """Too few samples were supplied for the requested procedure."""


class NotFarEnough(SubtestError):
    """The fractional-matching optimum is below the required epsilon / k.

    ``cover`` holds the vertex cover read off the tight coordinates and
    ``cover_mass`` its total mass; together they show the input is not
    epsilon-far.
    """

    def __init__(self, message, optimum=None, cover=None, cover_mass=None):
        super().__init__(message)
        self.optimum = optimum
        self.cover = cover
        self.cover_mass = cover_mass


class IndependenceViolated(SubtestError):
    """No system of distinct representative edges exists for a witness."""


class PreconditionWarning(UserWarning):
    """An operation was called outside its documented precondition."""


class NotAPacking(SubtestError, ValueError):
    """Some edge lies in zero or several copies of the pattern."""


class ConstructionBug(SubtestError):
    """A generator produced an object that failed its own verification."""


class NotSidonEnough(SubtestError):
    """The Sidon set does not yield a graph with one square per edge."""


class GenerationFailed(SubtestError):
    """A randomized construction did not verify within its retry budget."""


class OracleTooBig(SubtestError):
    """An exact oracle was asked to work beyond its configured limit."""


class TooLarge(SubtestError):
    """An exhaustive enumeration would exceed its size cap."""


class Infeasible(SubtestError):
    """No coupling achieves the requested domination parameters."""

    def __init__(self, message, optimum=None):
        super().__init__(message)
        self.optimum = optimum


class Unresolved(SubtestError):
    """A threshold search hit its sample cap without crossing the target."""

    def __init__(self, m_cap):
        super().__init__(f"threshold not reached below m_cap={m_cap}")
        self.m_cap = m_cap


class SkippedWithReason(SubtestError):
    """A lemma check was not run because its hypotheses fail."""

    def __init__(self, lemma_id, reason):
        super().__init__(f"{lemma_id}: {reason}")
        self.lemma_id = lemma_id
        self.reason = reason
