"""Closed-form fraud probabilities and bounds for the four protocol families."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, InvalidParameterError
from .graphmodel import walk_powers
from .protocols import ProtocolKind

EXACT = "exact"
UPPER_BOUND = "upper_bound"

# ATP3 distance fraud per 3-round tree, obtained by exhaustive search
ATP3_DISTANCE_BASE = 0.3999


@dataclass(frozen=True)
class ClosedForm:
    protocol: ProtocolKind
    fraud: str
    exactness: str
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise DomainError(f"probability {self.value} outside [0, 1]")


@lru_cache(maxsize=256)
def _overlap_table(n: int) -> np.ndarray:
    """S[a, b] = sum_k M^a[1,k] M^b[2,k] + M^a[2,k] M^b[1,k] for a, b in [0, n-1].

    M is the one-step walk matrix; rows 1 and 2 are the two nodes the
    verifier and the adversary land on when their challenges first differ
    (taken mod 2n, so n = 1 uses rows 1 and 0).
    """
    powers = walk_powers(n)
    size = 2 * n
    first = np.array([powers[a][1 % size] for a in range(n)])
    second = np.array([powers[a][2 % size] for a in range(n)])
    table = first @ second.T + second @ first.T
    table.setflags(write=False)
    return table


def response_match_prob(n: int, i: int, j: int, t: int) -> float:
    """P(harvested response j equals the correct response of round i | first mismatch at t).

    Rounds are 1-based. Covers the four regimes: before the mismatch the
    response of the same round is certain and any other is a fair coin; a
    response harvested before the mismatch is a fair coin afterwards; two
    post-mismatch responses agree with probability 1/2 plus half the chance
    that both walks sit on the same node.
    """
    if not (1 <= i <= n and 1 <= j <= n and 1 <= t <= n):
        raise InvalidParameterError(f"need 1 <= i, j, t <= n={n}, got i={i}, j={j}, t={t}")
    if i < t:
        return 1.0 if i == j else 0.5
    if j < t:
        return 0.5
    return 0.5 + _overlap_table(n)[i - t, j - t] / 4.0


def best_source(n: int, i: int, t: int) -> int:
    """Harvested round j maximizing :func:`response_match_prob`; ties go to the smaller j."""
    if not 1 <= t <= n or not 1 <= i <= n:
        raise InvalidParameterError(f"need 1 <= t, i <= n={n}")
    if i < t:
        return i
    values = [response_match_prob(n, i, j, t) for j in range(1, n + 1)]
    top = max(values)
    return next(j for j, v in enumerate(values, start=1) if v >= top - 1e-12)


def graph_mafia(n: int) -> float:
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    table = _overlap_table(n)
    total = 0.5**n
    for t in range(1, n + 1):
        span = n - t + 1
        best = 0.5 + table[:span, :span].max(axis=1) / 4.0
        total += 0.5**t * float(np.prod(best))
    return total


def generic_distance_bound(n: int, collision_prob: float) -> float:
    """Upper bound on distance fraud from P(f(x) = f(y)) for random x, y."""
    floor = 0.5**n
    if collision_prob < floor * (1 - 1e-12) or collision_prob > 1.0:
        raise DomainError(f"collision probability must lie in [2^-{n}, 1], got {collision_prob}")
    disc = floor * floor - 4.0 * floor + 4.0 * collision_prob
    return min(1.0, (floor + math.sqrt(max(disc, 0.0))) / 2.0)


def graph_collision_prob(n: int) -> float:
    powers = walk_powers(n)
    p = 1.0
    for i in range(1, n + 1):
        row = powers[i][0]
        p *= 0.5 + 0.5 * float(row @ row)
    return p


def graph_distance_bound(n: int) -> float:
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    return generic_distance_bound(n, graph_collision_prob(n))


def atp_collision_prob(n: int) -> float:
    # depth-i nodes of a full binary tree: 2^i equally likely positions
    return math.prod(0.5 + 0.5 ** (i + 1) for i in range(1, n + 1))


def atp_distance_bound(n: int) -> float:
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    return generic_distance_bound(n, atp_collision_prob(n))


def kap_mafia(n: int, p_d: float) -> float:
    keep = (3.0 - p_d) / 4.0
    detected = sum(keep ** (i - 1) * 0.5 ** (n - i + 1) for i in range(1, n + 1))
    return p_d / 2.0 * detected + keep**n


def closed_form_mafia(kind: ProtocolKind) -> float:
    n = kind.n
    if kind.name == "HKP":
        return 0.75**n
    if kind.name == "KAP":
        return kap_mafia(n, kind.p_d)
    if kind.name == "ATP3":
        return 0.5**n * 2.5 ** (n // 3)
    if kind.name == "ATP":
        if kind.alpha == 1:
            return 0.5**n * (n / 2 + 1)
        # alpha independent trees of depth k
        return (0.5**kind.k * (kind.k / 2 + 1)) ** kind.alpha
    return graph_mafia(n)


def closed_form_distance(kind: ProtocolKind) -> ClosedForm:
    n = kind.n
    if kind.name == "HKP":
        return ClosedForm(kind, "distance", EXACT, 0.75**n)
    if kind.name == "KAP":
        return ClosedForm(kind, "distance", EXACT, (0.75 + kind.p_d / 4) ** n)
    if kind.name == "ATP3":
        return ClosedForm(kind, "distance", EXACT, ATP3_DISTANCE_BASE ** (n // 3))
    if kind.name == "ATP":
        if kind.alpha != 1:
            raise InvalidParameterError("the tree distance bound is stated for alpha = 1 only")
        return ClosedForm(kind, "distance", UPPER_BOUND, atp_distance_bound(n))
    return ClosedForm(kind, "distance", UPPER_BOUND, graph_distance_bound(n))


def closed_form(kind: ProtocolKind, fraud: str) -> ClosedForm:
    if fraud == "mafia":
        return ClosedForm(kind, "mafia", EXACT, closed_form_mafia(kind))
    if fraud == "distance":
        return closed_form_distance(kind)
    raise InvalidParameterError(f"unknown fraud kind {fraud!r}")
