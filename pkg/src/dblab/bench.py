"""Sweeps, Monte Carlo campaigns, oracle reports and the protocol trade-off map."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import analytics
from .adversary import (
    BRUTEFORCE_MAX_N,
    bruteforce_distance_exact,
    bruteforce_mafia_exact,
    distance_simulate,
    mafia_simulate,
)
from .bitcore import RngSpec
from .errors import InvalidParameterError, ResourceLimitError
from .protocols import ProtocolKind, memory_cost

ALL_PROTOCOLS = ("HKP", "KAP", "ATP", "GRAPH")
TRADEOFF_PROTOCOLS = ("GRAPH", "HKP", "KAP", "ATP3")
FRAUDS = ("mafia", "distance")

ANALYZE_COLUMNS = ("protocol", "fraud", "n", "param", "value", "exactness")
SIMULATE_COLUMNS = (
    "protocol", "fraud", "n", "param", "analytic", "exactness",
    "mc_mean", "mc_stderr", "trials", "seed",
)
TRADEOFF_COLUMNS = (
    "mafia_target", "distance_target", "winner", "param", "rounds_needed",
    "memory_bits", "mafia_value", "distance_value", "distance_exactness",
)
ORACLE_COLUMNS = (
    "protocol", "fraud", "n", "param", "oracle", "analytic", "delta", "relation", "status",
)

ORACLE_TOL = 1e-12
# the ATP3 per-tree constant is only known to four decimals
ATP3_TOL = 1e-3


@dataclass
class SweepSpec:
    protocols: Sequence[str] = ALL_PROTOCOLS
    frauds: Sequence[str] = FRAUDS
    n_values: Sequence[int] = (8,)
    p_d: Sequence[float] = (0.5,)
    trials: int = 100_000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.n_values:
            raise InvalidParameterError("n range is empty")
        if any(n < 1 for n in self.n_values):
            raise InvalidParameterError("n values must be >= 1")
        if self.trials < 1:
            raise InvalidParameterError("trials must be >= 1")
        for fraud in self.frauds:
            if fraud not in FRAUDS:
                raise InvalidParameterError(f"unknown fraud kind {fraud!r}")
        if not self.p_d:
            raise InvalidParameterError("need at least one p_d value")

    def kinds(self, n: int) -> list[ProtocolKind]:
        """Protocol instances for one round count; ATP3 is skipped unless 3 | n."""
        out = []
        for name in self.protocols:
            name = name.upper()
            if name == "KAP":
                out.extend(ProtocolKind("KAP", n, p_d=p) for p in self.p_d)
            elif name == "ATP3" and n % 3:
                continue
            else:
                out.append(ProtocolKind(name, n))
        return out

    def points(self) -> Iterable[tuple[ProtocolKind, str]]:
        for n in self.n_values:
            for kind in self.kinds(n):
                for fraud in self.frauds:
                    yield kind, fraud


def analyze(spec: SweepSpec) -> list[dict]:
    rows = []
    for kind, fraud in spec.points():
        form = analytics.closed_form(kind, fraud)
        rows.append({
            "protocol": kind.name, "fraud": fraud, "n": kind.n, "param": kind.param,
            "value": form.value, "exactness": form.exactness,
        })
    return rows


def point_rng(seed: int, kind: ProtocolKind, fraud: str) -> RngSpec:
    """Stream for one sweep point, independent of which other points run."""
    key = zlib.crc32(f"{kind.name}|{fraud}|{kind.n}|{kind.param}".encode())
    return RngSpec(seed).derive(key)


def simulate_point(kind: ProtocolKind, fraud: str, trials: int, seed: int, workers: int = 1):
    rng = point_rng(seed, kind, fraud)
    if fraud == "mafia":
        return mafia_simulate(kind, trials, rng, workers)
    return distance_simulate(kind, trials, rng, workers)


def simulate(spec: SweepSpec) -> list[dict]:
    rows = []
    for kind, fraud in spec.points():
        est = simulate_point(kind, fraud, spec.trials, spec.seed, spec.workers)
        rows.append({
            "protocol": kind.name, "fraud": fraud, "n": kind.n, "param": kind.param,
            "analytic": est.analytic, "exactness": est.exactness, "mc_mean": est.mc_mean,
            "mc_stderr": est.mc_stderr, "trials": est.trials, "seed": spec.seed,
        })
    return rows


# -- trade-off map ----------------------------------------------------------------


@dataclass(frozen=True)
class TradeoffCell:
    mafia_target: float
    distance_target: float
    winner: ProtocolKind | None
    rounds_needed: int | None
    memory_bits: int | None
    mafia_value: float | None = None
    distance_value: float | None = None
    distance_exactness: str | None = None

    @property
    def achievable(self) -> bool:
        return self.winner is not None

    def as_row(self) -> dict:
        w = self.winner
        return {
            "mafia_target": self.mafia_target, "distance_target": self.distance_target,
            "winner": w.name if w else "none", "param": w.param if w else "",
            "rounds_needed": self.rounds_needed if w else "", "memory_bits": self.memory_bits if w else "",
            "mafia_value": self.mafia_value if w else "", "distance_value": self.distance_value if w else "",
            "distance_exactness": self.distance_exactness if w else "",
        }


@dataclass
class _Curve:
    """Closed forms of one protocol configuration for n = 1 .. n_max."""

    kinds: list[ProtocolKind] = field(default_factory=list)
    mafia: list[float] = field(default_factory=list)
    distance: list[analytics.ClosedForm] = field(default_factory=list)

    def first_meeting(self, mafia_target: float, distance_target: float) -> int | None:
        for idx, (m, d) in enumerate(zip(self.mafia, self.distance)):
            # a bound at or below the target counts as meeting it
            if m <= mafia_target and d.value <= distance_target:
                return idx
        return None


def _curves(protocols: Sequence[str], p_d: Sequence[float], n_max: int) -> list[_Curve]:
    curves = []
    for name in protocols:
        name = name.upper()
        for p in (p_d if name == "KAP" else [None]):
            curve = _Curve()
            for n in range(1, n_max + 1):
                if name == "ATP3" and n % 3:
                    continue
                kind = ProtocolKind(name, n, p_d=p)
                curve.kinds.append(kind)
                curve.mafia.append(analytics.closed_form_mafia(kind))
                curve.distance.append(analytics.closed_form_distance(kind))
            curves.append(curve)
    return curves


def _tie_key(kind: ProtocolKind) -> tuple:
    return (kind.n, memory_cost(kind), kind.name, kind.p_d if kind.p_d is not None else -1.0)


def tradeoff(
    mafia_targets: Sequence[float],
    distance_targets: Sequence[float],
    n_max: int,
    protocols: Sequence[str] = TRADEOFF_PROTOCOLS,
    p_d: Sequence[float] = (0.5,),
) -> list[list[TradeoffCell]]:
    """Fewest-rounds protocol meeting both targets; ties go to less memory, then name."""
    if n_max < 1:
        raise InvalidParameterError("n_max must be >= 1")
    for target in list(mafia_targets) + list(distance_targets):
        if not 0.0 < target < 1.0:
            raise InvalidParameterError(f"targets must lie in (0, 1), got {target}")
    curves = _curves(protocols, p_d, n_max)
    grid = []
    for mt in mafia_targets:
        row = []
        for dt in distance_targets:
            best = None
            for curve in curves:
                idx = curve.first_meeting(mt, dt)
                if idx is None:
                    continue
                kind = curve.kinds[idx]
                if best is None or _tie_key(kind) < _tie_key(best[0]):
                    best = (kind, curve.mafia[idx], curve.distance[idx])
            if best is None:
                row.append(TradeoffCell(mt, dt, None, None, None))
            else:
                kind, m, d = best
                row.append(TradeoffCell(mt, dt, kind, kind.n, memory_cost(kind), m, d.value, d.exactness))
        grid.append(row)
    return grid


def log_grid(lo: float, hi: float, size: int) -> list[float]:
    if not 0 < lo <= hi < 1 or size < 1:
        raise InvalidParameterError("grid needs 0 < lo <= hi < 1 and size >= 1")
    return [float(x) for x in np.geomspace(hi, lo, size)]


# -- oracle report -------------------------------------------------------------------


def _oracle_row(kind, fraud, oracle, form, tol=ORACLE_TOL) -> dict:
    oracle = float(oracle)
    delta = abs(oracle - form.value)
    if form.exactness == analytics.EXACT:
        relation, ok = "==", delta <= tol
    else:
        relation, ok = "<=", oracle <= form.value + ORACLE_TOL
    return {
        "protocol": kind.name, "fraud": fraud, "n": kind.n, "param": kind.param,
        "oracle": oracle, "analytic": form.value, "delta": delta,
        "relation": relation, "status": "pass" if ok else "FAIL",
    }


def oracle_report(n_max: int, p_d: Sequence[float] = (0.5,)) -> list[dict]:
    if n_max > BRUTEFORCE_MAX_N:
        raise ResourceLimitError(f"oracles enumerate every instance; n_max must be <= {BRUTEFORCE_MAX_N}")
    if n_max < 1:
        raise InvalidParameterError("n_max must be >= 1")
    rows = []
    for n in range(1, n_max + 1):
        graph = ProtocolKind("GRAPH", n)
        rows.append(_oracle_row(graph, "mafia", bruteforce_mafia_exact(n), analytics.closed_form(graph, "mafia")))
        kinds = [ProtocolKind("HKP", n)]
        kinds += [ProtocolKind("KAP", n, p_d=p) for p in p_d]
        kinds += [ProtocolKind("ATP", n), graph]
        if n % 3 == 0:
            kinds.append(ProtocolKind("ATP3", n))
        for kind in kinds:
            tol = ATP3_TOL if kind.name == "ATP3" else ORACLE_TOL
            form = analytics.closed_form(kind, "distance")
            rows.append(_oracle_row(kind, "distance", bruteforce_distance_exact(kind), form, tol))
    return rows


def all_probabilities_valid(rows: Iterable[dict], keys: Sequence[str]) -> bool:
    return all(0.0 <= row[k] <= 1.0 for row in rows for k in keys if row[k] != "")

