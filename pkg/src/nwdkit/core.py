"""Web code lengths and the normalized web distance over a snapshot.

All logarithms are base 2, so code lengths come out in bits. The distance
itself is a ratio of log differences and does not depend on the base.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NotASubsetError, UndefinedDeltaError
from .snapshot import FrequencySnapshot, TermSet

SCALED_TOLERANCE = 1e-12


def _termset(value) -> TermSet:
    return value if isinstance(value, TermSet) else TermSet(value)


def web_code_length(snapshot: FrequencySnapshot, termset) -> float:
    """Length in bits of the code word for the pages matching every term.

    Returns ``math.inf`` when no page matches.
    """
    f = snapshot.count(_termset(termset))
    if f == 0:
        return math.inf
    return math.log2(snapshot.normalizer) - math.log2(f)


@dataclass(frozen=True)
class NwdValue:
    termset: TermSet
    value: float
    defined: bool
    code_length_set: float
    code_lengths_members: tuple[float, ...]
    out_of_range_warning: bool = False

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None or math.isnan(x) else (str(x) if math.isinf(x) else x)

        return {
            "terms": list(self.termset.terms),
            "value": num(self.value),
            "defined": self.defined,
            "code_length_set": num(self.code_length_set),
            "code_lengths_members": [num(x) for x in self.code_lengths_members],
            "out_of_range_warning": self.out_of_range_warning,
        }


def nwd(snapshot: FrequencySnapshot, termset, clamp: bool = False) -> NwdValue:
    """Normalized web distance of a set of terms.

    The spread between the most frequent member and the joint count,
    ``max log f(x) - log f(X)``, is divided by ``(log N - min log f(x))``
    times ``|X| - 1``. A one-term set has distance 0 by convention. When the
    joint count is zero the result is returned with ``defined=False``.

    Values outside [0, 1] can only come from counts that break the event
    model (approximate engine counts); they are flagged, and clipped only
    when ``clamp`` is set.
    """
    X = _termset(termset)
    fX = snapshot.count(X)
    members = [snapshot.count(s) for s in X.singletons()]
    log_n = math.log2(snapshot.normalizer)
    member_bits = tuple(math.inf if f == 0 else log_n - math.log2(f) for f in members)
    set_bits = math.inf if fX == 0 else log_n - math.log2(fX)

    if fX == 0:
        return NwdValue(X, math.nan, False, set_bits, member_bits)
    if len(X) == 1:
        return NwdValue(X, 0.0, True, set_bits, member_bits)

    # fX > 0 and event consistency would force every member > 0; approximate
    # counts can still report a zero member alongside a positive joint count
    if min(members) == 0:
        return NwdValue(X, math.inf, True, set_bits, member_bits, out_of_range_warning=True)

    numerator = math.log2(max(members)) - math.log2(fX)
    denominator = (log_n - math.log2(min(members))) * (len(X) - 1)
    if denominator == 0:
        value = 0.0 if numerator == 0 else math.copysign(math.inf, numerator)
    else:
        value = numerator / denominator

    out_of_range = not (0.0 <= value <= 1.0)
    if out_of_range and clamp:
        value = min(1.0, max(0.0, value))
    return NwdValue(X, value, True, set_bits, member_bits, out_of_range)


def ngd_pair(snapshot: FrequencySnapshot, a: str, b: str, clamp: bool = False) -> NwdValue:
    """Pairwise special case: the NWD of the two-element set ``{a, b}``."""
    return nwd(snapshot, TermSet((a, b)), clamp=clamp)


def nwd_delta(snapshot: FrequencySnapshot, termset, term: str, clamp: bool = False) -> float:
    """``nwd(A + x) - nwd(A)``; raises UndefinedDeltaError if either is undefined."""
    A = _termset(termset)
    if len(A) < 2:
        raise ValueError(f"class set {A} needs at least two terms")
    grown = A.union(term)
    base = nwd(snapshot, A, clamp=clamp)
    if not base.defined:
        raise UndefinedDeltaError(A, f"NWD undefined for {A}; delta for {term!r} undefined")
    extended = nwd(snapshot, grown, clamp=clamp)
    if not extended.defined:
        raise UndefinedDeltaError(grown, f"NWD undefined for {grown}; delta for {term!r} undefined")
    return extended.value - base.value


def monotonicity_condition(
    size_x: int,
    nwd_x: float,
    f_x0: float,
    f_y0: float,
    f_x1: float,
    f_y1: float,
    f_X: float,
    f_Y: float,
) -> tuple[float, float, bool]:
    """Both sides of the growth condition for a subset X of Y.

    ``x0``/``y0`` are the least frequent and ``x1``/``y1`` the most frequent
    members. Returns ``(lhs, rhs, lhs >= rhs)`` where
    ``lhs = f(y1) f(X) / (f(x1) f(Y))`` and
    ``rhs = (f(x0) / f(y0)) ** ((|X| - 1) * nwd(X))``.
    """
    lhs = (f_y1 * f_X) / (f_x1 * f_Y)
    rhs = (f_x0 / f_y0) ** ((size_x - 1) * nwd_x)
    return lhs, rhs, lhs >= rhs


LE = "scaled-NWD(X) <= scaled-NWD(Y)"
GT = "scaled-NWD(X) > scaled-NWD(Y)"


@dataclass(frozen=True)
class MonotonicityReport:
    """How the size-scaled NWD changes when X is grown into Y.

    ``case`` is ``"i"`` when no member of Y is rarer than the rarest member
    of X, else ``"ii"``; in case ii the growth condition decides the
    direction. ``scaled_x``/``scaled_y`` are ``(|X|-1) nwd(X)`` and
    ``(|Y|-1) nwd(Y)``.
    """

    x0: tuple[str, int]
    x1: tuple[str, int]
    y0: tuple[str, int]
    y1: tuple[str, int]
    case: str
    lhs: float
    rhs: float
    condition_holds: bool
    predicted_inequality: str
    scaled_x: float
    scaled_y: float
    verified: bool


def _extremes(snapshot, ts):
    # ties go to the lexicographically smallest term; max() keeps the first maximum
    freqs = sorted((snapshot.count(TermSet((t,))), t) for t in ts)
    lo = freqs[0]
    hi = max(freqs, key=lambda p: p[0])
    return (lo[1], lo[0]), (hi[1], hi[0])


def check_monotonicity(snapshot: FrequencySnapshot, X, Y) -> MonotonicityReport:
    X, Y = _termset(X), _termset(Y)
    if not X.issubset(Y) or X == Y:
        raise NotASubsetError(f"{X} is not a proper subset of {Y}")
    if len(X) < 2:
        raise ValueError(f"{X} must have at least two terms")
    vx, vy = nwd(snapshot, X), nwd(snapshot, Y)
    for v in (vx, vy):
        if not v.defined:
            raise UndefinedDeltaError(v.termset)

    x0, x1 = _extremes(snapshot, X)
    y0, y1 = _extremes(snapshot, Y)
    lhs, rhs, holds = monotonicity_condition(
        len(X), vx.value, x0[1], y0[1], x1[1], y1[1], snapshot.count(X), snapshot.count(Y)
    )
    case = "i" if y0[1] >= x0[1] else "ii"
    predicted = LE if case == "i" or holds else GT

    scaled_x = (len(X) - 1) * vx.value
    scaled_y = (len(Y) - 1) * vy.value
    if predicted == LE:
        verified = scaled_x <= scaled_y + SCALED_TOLERANCE
    else:
        verified = scaled_x > scaled_y - SCALED_TOLERANCE
    return MonotonicityReport(
        x0, x1, y0, y1, case, lhs, rhs, holds, predicted, scaled_x, scaled_y, verified
    )
