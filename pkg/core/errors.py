"""
Exception hierarchy for the decision laboratory.

Every error also derives from the closest builtin so callers that only know
about ValueError / IndexError keep working.
"""


class LaboratoryError(Exception):
    """Base class for all errors raised by the laboratory."""


class AlphabetMismatchError(LaboratoryError, ValueError):
    """A symbol lies outside the alphabet it is used with."""


class HistoryIndexError(LaboratoryError, IndexError):
    """A cycle index is outside the range a history tape can answer."""


class UnreachableHistoryError(LaboratoryError, ValueError):
    """A history has probability zero under the model being queried."""


class ShapeError(LaboratoryError, ValueError):
    """Sequences or tables have incompatible lengths or shapes."""


class ModelInvalidError(LaboratoryError, ValueError):
    """An environment or model class violates its validation rules."""


class NormalizationError(ModelInvalidError):
    """A conditional row does not sum to one."""


class RangeError(ModelInvalidError):
    """A probability or loss value lies outside [0, 1]."""


class DiscretizationError(LaboratoryError, ValueError):
    """A loss value cannot be represented in the loss alphabet."""


class EmptyClassError(LaboratoryError, ValueError):
    """A model class or parameter grid has no members."""


class ClassExhaustedError(LaboratoryError, RuntimeError):
    """Every member of the model class assigns probability zero to an observation."""


class DegenerateLossError(LaboratoryError, ValueError):
    """A 2x2 loss matrix has no well-defined decision threshold."""


class InstanceTooLargeError(LaboratoryError, ValueError):
    """A planning instance exceeds the exhaustive-enumeration guard."""


class NotApplicableError(LaboratoryError, ValueError):
    """The preconditions of a check do not hold for the given model."""


class ConfigError(LaboratoryError, ValueError):
    """A configuration file is malformed or references unknown entries."""
