"""
Small numeric helpers shared by the environment, predictor and planner code.

Probabilities and losses are either floats or ``fractions.Fraction``; exact
values stay exact, floats are summed with compensation.
"""

import math
from fractions import Fraction
from typing import Iterable, Sequence, Union

Probability = Union[float, Fraction]

# Normalisation slack for proper measures
NORMALIZATION_TOLERANCE = 1e-12

# Float values closer than this to the minimum count as tied
TIE_TOLERANCE = 1e-12


def is_exact(value) -> bool:
    """Return True for values that carry exact rational arithmetic."""
    return isinstance(value, (Fraction, int)) and not isinstance(value, bool)


def parse_probability(value) -> Probability:
    """
    Parse a probability-like number from a config value.

    Strings such as ``"3/4"`` become Fractions, everything else becomes a float.

    Args:
        value: Number or string

    Returns:
        Fraction or float
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    return float(value)


def accumulate(values: Iterable[Probability]) -> Probability:
    """
    Sum values exactly when they are all rational, otherwise with math.fsum.

    Args:
        values: Terms to add

    Returns:
        The sum
    """
    terms = list(values)
    if all(is_exact(v) for v in terms):
        return sum(terms, Fraction(0))
    return math.fsum(float(v) for v in terms)


def product(values: Iterable[Probability]) -> Probability:
    """Multiply probabilities, keeping Fractions exact."""
    result: Probability = Fraction(1)
    for v in values:
        result = result * v
    if not is_exact(result):
        return float(result)
    return result


def is_normalized(probs: Sequence[Probability], tolerance: float = NORMALIZATION_TOLERANCE) -> bool:
    """Check that a row sums to one (exactly for rationals)."""
    total = accumulate(probs)
    if is_exact(total):
        return total == 1
    return abs(total - 1.0) <= tolerance


def in_unit_interval(value: Probability) -> bool:
    return 0 <= value <= 1


def argmin_first(values: Sequence[Probability], tolerance: float = TIE_TOLERANCE) -> int:
    """
    Index of the minimum with ties resolved to the smallest index.

    Rational values are compared exactly; when any value is a float the
    comparison allows ``tolerance`` so that rounding does not break ties.

    Args:
        values: Candidate values, one per action
        tolerance: Float tie tolerance

    Returns:
        Index of the chosen entry
    """
    if not values:
        raise ValueError("argmin of an empty sequence")
    best = min(values)
    slack = 0 if all(is_exact(v) for v in values) else tolerance
    for index, value in enumerate(values):
        if value <= best + slack:
            return index
    return 0


def format_number(value: Probability) -> str:
    """Render a probability for serialisations and CSV cells."""
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    return repr(float(value))

