"""Mafia-fraud and distance-fraud attackers, Monte Carlo estimators, exact oracles.

The Monte Carlo estimators run in blocks of ``BLOCK`` trials. Block ``b`` draws
from ``rng.derive(b)``, so results do not depend on how many worker
processes share the blocks.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Callable, Sequence

import numpy as np

from . import analytics
from .bitcore import BitString, RngSpec
from .errors import InvalidParameterError, ResourceLimitError
from .protocols import (
    ENUMERATION_LIMIT,
    Instance,
    ProtocolKind,
    Round,
    Transcript,
    Verdict,
    Verifier,
    challenge_matrix,
    make_prover,
    pack_rows,
    response_bits,
    verify,
)

BLOCK = 1 << 16
BRUTEFORCE_MAX_N = 3

Rule = Callable[[int, int], int]


@dataclass(frozen=True)
class FraudEstimate:
    protocol: ProtocolKind
    fraud: str
    analytic: float
    exactness: str
    mc_mean: float
    mc_stderr: float
    trials: int
    seed: int | None = None

    @classmethod
    def from_counts(cls, kind, fraud, form, successes, trials, seed=None):
        mean = successes / trials
        stderr = math.sqrt(mean * (1.0 - mean) / trials)
        return cls(kind, fraud, form.value, form.exactness, mean, stderr, trials, seed)

    def zscore(self) -> float:
        if self.mc_stderr == 0:
            return 0.0 if self.mc_mean == self.analytic else math.inf
        return (self.mc_mean - self.analytic) / self.mc_stderr


def best_j_rule(n: int, i: int, t: int) -> int:
    return analytics.best_source(n, i, t)


def default_rule(kind: ProtocolKind) -> Rule:
    if kind.name == "GRAPH":
        return lambda i, t: best_j_rule(kind.n, i, t)
    return lambda i, t: i


@dataclass(frozen=True)
class PreAskAttack:
    """Challenges sent to the prover ahead of time and what came back.

    ``rule(i, t)`` names the harvested round replayed in round i once the
    first mismatch happened at round t.
    """

    pre_ask_challenges: BitString
    harvested_responses: BitString
    rule: Rule

    def respond(self, verifier_challenges: Sequence[int]) -> int:
        i = len(verifier_challenges)
        t = next(
            (r + 1 for r, c in enumerate(verifier_challenges) if c != self.pre_ask_challenges[r]),
            None,
        )
        j = i if t is None or i < t else self.rule(i, t)
        return self.harvested_responses[j - 1]


def run_mafia_session(
    kind: ProtocolKind, instance: Instance, rng: RngSpec, rule: Rule | None = None
) -> tuple[Transcript, PreAskAttack]:
    """One pre-ask attack: query the prover early, then answer the verifier alone."""
    prover = make_prover(kind, instance, rng)
    guesses = rng.next_bits(kind.n)
    harvested = BitString(tuple(prover.respond(c) for c in guesses))
    attack = PreAskAttack(guesses, harvested, rule or default_rule(kind))
    detected = getattr(prover, "detected", False)
    verifier = Verifier(kind, instance, rng)
    rounds, seen = [], []
    for _ in range(kind.n):
        c = verifier.next_challenge()
        seen.append(c)
        verifier.expect(c)
        rounds.append(Round(c, attack.respond(seen), tag_detected=detected))
    auth = getattr(instance, "auth", None)
    draft = Transcript(kind, tuple(rounds), Verdict.REJECT, auth, instance)
    return Transcript(kind, draft.rounds, verify(kind, instance, draft), auth, instance), attack


def run_relay_session(kind: ProtocolKind, instance: Instance, rng: RngSpec) -> Transcript:
    """Pure relay: every answer is right but arrives too late."""
    prover = make_prover(kind, instance, rng)
    verifier = Verifier(kind, instance, rng)
    rounds = []
    for _ in range(kind.n):
        c = verifier.next_challenge()
        verifier.expect(c)
        rounds.append(Round(c, prover.respond(c), relayed=True))
    auth = getattr(instance, "auth", None)
    draft = Transcript(kind, tuple(rounds), Verdict.REJECT, auth, instance)
    return Transcript(kind, draft.rounds, verify(kind, instance, draft), auth, instance)


# -- vectorized Monte Carlo ------------------------------------------------------


def _bits(gen: np.random.Generator, *shape) -> np.ndarray:
    return gen.integers(0, 2, size=shape, dtype=np.uint8)


def _walk(q_shape_nodes: int, s: np.ndarray, challenges: np.ndarray) -> np.ndarray:
    batch, n = challenges.shape
    rows = np.arange(batch)
    node = np.zeros(batch, dtype=np.int64)
    path = np.empty((batch, n), dtype=np.int64)
    for r in range(n):
        node = np.where(s[rows, node] == challenges[:, r], node + 1, node + 2) % q_shape_nodes
        path[:, r] = node
    return path


def _first_mismatch(guesses: np.ndarray, challenges: np.ndarray) -> np.ndarray:
    """1-based round of the first differing challenge, n + 1 when none differs."""
    diff = guesses != challenges
    n = guesses.shape[1]
    return np.where(diff.any(axis=1), diff.argmax(axis=1) + 1, n + 1)


def rule_table(n: int, rule: Rule) -> np.ndarray:
    """``table[t, i]`` = harvested round used in round i when the first mismatch is t."""
    table = np.zeros((n + 2, n + 1), dtype=np.int64)
    for t in range(1, n + 2):
        for i in range(1, n + 1):
            table[t, i] = i if i < t else rule(i, t)
    return table


def _mafia_block(kind: ProtocolKind, count: int, seed: int, spawn_key: tuple) -> int:
    gen = RngSpec(seed, spawn_key).generator
    n = kind.n
    guesses = _bits(gen, count, n)
    if kind.name in ("HKP", "KAP"):
        r0, r1 = _bits(gen, count, n), _bits(gen, count, n)
        if kind.name == "HKP":
            harvested = np.where(guesses == 1, r1, r0)
            challenges = _bits(gen, count, n)
            correct = np.where(challenges == 1, r1, r0)
        else:
            d = _bits(gen, count, n)
            random_round = gen.random((count, n)) >= kind.p_d
            latched = np.logical_or.accumulate(~random_round & (guesses != d), axis=1)
            answer = np.where(random_round, np.where(guesses == 1, r1, r0), r0)
            harvested = np.where(latched, _bits(gen, count, n), answer)
            challenges = np.where(random_round, _bits(gen, count, n), d)
            correct = np.where(random_round, np.where(challenges == 1, r1, r0), r0)
        return int(np.all(harvested == correct, axis=1).sum())
    challenges = _bits(gen, count, n)
    if kind.is_tree:
        # labels of distinct tree nodes are independent, so only the two paths are drawn
        harvested = _bits(gen, count, n)
        fresh = _bits(gen, count, n)
        same = guesses == challenges
        shared = np.empty_like(same)
        for tree in range(kind.alpha):
            seg = slice(tree * kind.k, (tree + 1) * kind.k)
            shared[:, seg] = np.logical_and.accumulate(same[:, seg], axis=1)
        correct = np.where(shared, harvested, fresh)
        return int(np.all(harvested == correct, axis=1).sum())
    size = 2 * n
    q, s = _bits(gen, count, size), _bits(gen, count, size)
    adv = _walk(size, s, guesses)
    ver = _walk(size, s, challenges)
    table = rule_table(n, default_rule(kind))
    t = _first_mismatch(guesses, challenges)
    source = table[t][:, 1:] - 1
    rows = np.arange(count)[:, None]
    sent = q[rows, adv[rows, source]]
    correct = q[rows, ver]
    return int(np.all(sent == correct, axis=1).sum())


def _run_blocks(fn, kind: ProtocolKind, trials: int, rng: RngSpec, workers: int) -> int:
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    jobs = []
    for b, start in enumerate(range(0, trials, BLOCK)):
        child = rng.derive(b)
        jobs.append((kind, min(BLOCK, trials - start), child.seed, child.spawn_key))
    if workers <= 1 or len(jobs) == 1:
        return sum(fn(*job) for job in jobs)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(fn, *zip(*jobs)))


def mafia_simulate(kind: ProtocolKind, trials: int, rng: RngSpec, workers: int = 1) -> FraudEstimate:
    """Success rate of the pre-ask attacker.

    HKP, KAP and the trees replay the response of the same round; the graph
    attacker replays the harvested round with the best per-round match
    probability.
    """
    successes = _run_blocks(_mafia_block, kind, trials, rng, workers)
    form = analytics.closed_form(kind, "mafia")
    return FraudEstimate.from_counts(kind, "mafia", form, successes, trials, rng.seed)


def random_registers(kind: ProtocolKind, count: int, gen: np.random.Generator) -> dict:
    n = kind.n
    if kind.name == "HKP":
        return {"r0": _bits(gen, count, n), "r1": _bits(gen, count, n)}
    if kind.name == "KAP":
        return {
            "r0": _bits(gen, count, n),
            "r1": _bits(gen, count, n),
            "t": (gen.random((count, n)) >= kind.p_d).astype(np.uint8),
        }
    if kind.is_tree:
        labels = _bits(gen, count, kind.alpha, 2 ** (kind.k + 1) - 1)
        labels[:, :, 0] = 0
        return {"labels": labels}
    return {"q": _bits(gen, count, 2 * n), "s": _bits(gen, count, 2 * n)}


def _row_max_count(table: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per row: the most frequent value (smallest on ties) and its multiplicity."""
    batch = table.shape[0]
    width = 2**n
    counts = np.bincount((table + np.arange(batch)[:, None] * width).ravel(), minlength=batch * width)
    counts = counts.reshape(batch, width)
    return counts.argmax(axis=1), counts.max(axis=1)


def preimage_maxima(kind: ProtocolKind, registers: dict) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Prover-function tables and their best pre-images for a batch of instances."""
    n = kind.n
    tables = pack_rows(response_bits(kind, registers, challenge_matrix(n)))
    best_y, best_size = _row_max_count(tables, n)
    return tables, best_y, best_size


def _distance_block(kind: ProtocolKind, count: int, seed: int, spawn_key: tuple) -> int:
    gen = RngSpec(seed, spawn_key).generator
    n = kind.n
    chunk = max(1, (1 << 20) // (2**n * n))
    wins = 0
    for start in range(0, count, chunk):
        size = min(chunk, count - start)
        tables, best_y, _ = preimage_maxima(kind, random_registers(kind, size, gen))
        x = gen.integers(0, 2**n, size=size)
        wins += int((tables[np.arange(size), x] == best_y).sum())
    return wins


def distance_simulate(
    kind: ProtocolKind, trials: int, rng: RngSpec, workers: int = 1, limit: int = ENUMERATION_LIMIT
) -> FraudEstimate:
    """Dishonest prover sends the response string with the largest pre-image early."""
    if kind.n > limit:
        raise ResourceLimitError(
            f"distance fraud enumerates 2^{kind.n} challenge strings per trial (limit n <= {limit})"
        )
    successes = _run_blocks(_distance_block, kind, trials, rng, workers)
    form = analytics.closed_form(kind, "distance")
    return FraudEstimate.from_counts(kind, "distance", form, successes, trials, rng.seed)


# -- exhaustive oracles ------------------------------------------------------------


def _check_small(n: int, limit: int = BRUTEFORCE_MAX_N):
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if n > limit:
        raise ResourceLimitError(f"exhaustive enumeration limited to n <= {limit}, got {n}")


def _all_bits(width: int) -> np.ndarray:
    if width == 0:
        return np.zeros((1, 0), dtype=np.uint8)
    return challenge_matrix(width)


class _PreAskSpace:
    """Every (edge labels, pre-ask string, verifier string) of the n-round graph."""

    def __init__(self, n: int):
        size = 2 * n
        labels = _all_bits(size)
        strings = _all_bits(n)
        s_idx, g_idx, c_idx = np.meshgrid(
            np.arange(len(labels)), np.arange(len(strings)), np.arange(len(strings)), indexing="ij"
        )
        s = labels[s_idx.ravel()]
        guesses = strings[g_idx.ravel()]
        challenges = strings[c_idx.ravel()]
        self.n = n
        self.adv = _walk(size, s, guesses)
        self.ver = _walk(size, s, challenges)
        self.first = _first_mismatch(guesses, challenges)
        self.values = _all_bits(size)  # every node valuation
        self.total = len(self.adv) * len(self.values)

    def wins(self, t: int, sources: Sequence[int]) -> int:
        """Node valuations x walks with first mismatch t on which the rule wins every round."""
        sel = self.first == t
        adv, ver = self.adv[sel], self.ver[sel]
        rounds = np.arange(t - 1, self.n)
        src = np.asarray(sources, dtype=np.int64) - 1
        left = self.values[:, adv[:, src]]
        right = self.values[:, ver[:, rounds]]
        return int(np.all(left == right, axis=2).sum())

    def sure_wins(self) -> int:
        return int((self.first == self.n + 1).sum()) * len(self.values)


def optimal_pre_ask_rules(n: int) -> tuple[Fraction, dict[int, tuple[int, ...]]]:
    """Best per-mismatch replay rule for the graph protocol, by exhaustive search.

    Rounds before the first mismatch t replay their own response. For rounds
    t..n every assignment of harvested rounds is tried; the adversary knows t.
    Returns the exact success probability and the winning sources per t
    (lexicographically smallest among optimal ones).
    """
    _check_small(n)
    space = _PreAskSpace(n)
    wins = space.sure_wins()
    rules = {}
    for t in range(1, n + 1):
        best, best_rule = -1, None
        for sources in product(range(1, n + 1), repeat=n - t + 1):
            w = space.wins(t, sources)
            if w > best:
                best, best_rule = w, sources
        wins += best
        rules[t] = best_rule
    return Fraction(wins, space.total), rules


def bruteforce_mafia_exact(n: int, kind: ProtocolKind | None = None) -> Fraction:
    """Exact pre-ask mafia-fraud success on the graph protocol with the optimal rule."""
    if kind is not None and kind.name != "GRAPH":
        raise InvalidParameterError("the mafia oracle covers the graph protocol only")
    return optimal_pre_ask_rules(n)[0]


def pre_ask_rule_value(n: int, rule: Rule) -> Fraction:
    """Exact success probability of one fixed replay rule on the graph protocol."""
    _check_small(n)
    space = _PreAskSpace(n)
    wins = space.sure_wins()
    for t in range(1, n + 1):
        wins += space.wins(t, [rule(i, t) for i in range(t, n + 1)])
    return Fraction(wins, space.total)


def bruteforce_round_match(n: int, i: int, j: int, t: int) -> Fraction:
    """P(harvested response j equals the correct response of round i | first mismatch t)."""
    _check_small(n)
    space = _PreAskSpace(n)
    sel = space.first == t
    left = space.values[:, space.adv[sel, j - 1]]
    right = space.values[:, space.ver[sel, i - 1]]
    return Fraction(int((left == right).sum()), left.size)


def _weights(kind: ProtocolKind, registers: dict) -> list[Fraction]:
    if kind.name != "KAP":
        return [Fraction(1)] * len(next(iter(registers.values())))
    p_d = Fraction(kind.p_d)
    return [
        math.prod((1 - p_d) if bit else p_d for bit in row)
        for row in registers["t"].tolist()
    ]


def all_registers(kind: ProtocolKind) -> dict:
    """Every instance of a small protocol as one batch.

    KAP enumerates R^0, R^1 and T; the D register never changes the prover
    function and is left out.
    """
    n = kind.n
    if kind.name == "HKP":
        bits = _all_bits(2 * n)
        return {"r0": bits[:, :n], "r1": bits[:, n:]}
    if kind.name == "KAP":
        bits = _all_bits(3 * n)
        return {"r0": bits[:, :n], "r1": bits[:, n : 2 * n], "t": bits[:, 2 * n :]}
    if kind.is_tree:
        width = 2 ** (kind.k + 1) - 2
        bits = _all_bits(kind.alpha * width)
        labels = np.zeros((len(bits), kind.alpha, width + 1), dtype=np.uint8)
        labels[:, :, 1:] = bits.reshape(len(bits), kind.alpha, width)
        return {"labels": labels}
    bits = _all_bits(4 * n)
    return {"q": bits[:, : 2 * n], "s": bits[:, 2 * n :]}


def bruteforce_distance_exact(kind: ProtocolKind) -> Fraction:
    """E over all instances of max_y |I_y| / 2^n, weighted by the instance distribution."""
    _check_small(kind.n)
    registers = all_registers(kind)
    _, _, sizes = preimage_maxima(kind, registers)
    weights = _weights(kind, registers)
    total = sum(w * int(s) for w, s in zip(weights, sizes))
    return Fraction(total, 2**kind.n) / sum(weights)
