"""Prover and verifier state machines for HKP, KAP, ATP and the graph protocol.

Every protocol here uses single-bit rounds and no final phase, so each
instance also has a prover function: the table from full challenge strings to
correct response strings. Challenge and response strings are packed into
integers with the first round as the most significant bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Union

import numpy as np

from .bitcore import BitString, PrfSpec, RngSpec, split_registers
from .errors import (
    ConfigurationError,
    MalformedTranscriptError,
    ResourceLimitError,
)
from .graphmodel import LabeledGraph, build_topology, label_graph

PROTOCOL_NAMES = ("HKP", "KAP", "ATP", "ATP3", "GRAPH")
ENUMERATION_LIMIT = 16
# largest ATP tree depth that is ever materialized bit by bit
ATP_MAX_DEPTH = 20


@dataclass(frozen=True)
class ProtocolKind:
    name: str
    n: int
    p_d: float | None = None
    alpha: int | None = None
    k: int | None = None
    auth_bits: int = 8

    def __post_init__(self):
        name = self.name.upper()
        object.__setattr__(self, "name", name)
        if name not in PROTOCOL_NAMES:
            raise ConfigurationError(f"unknown protocol {self.name!r}")
        if self.n < 1:
            raise ConfigurationError("n must be >= 1")
        if name == "KAP":
            if self.p_d is None or not 0.0 <= self.p_d <= 1.0:
                raise ConfigurationError("KAP needs p_d in [0, 1]")
        elif self.p_d is not None:
            raise ConfigurationError(f"{name} takes no p_d")
        if name == "ATP3":
            if self.n % 3:
                raise ConfigurationError(f"ATP3 needs 3 | n, got n={self.n}")
            alpha, k = self.n // 3, 3
        elif name == "ATP":
            alpha = self.alpha if self.alpha is not None else (1 if self.k is None else self.n // self.k)
            k = self.k if self.k is not None else self.n // alpha
        else:
            alpha = k = None
        if name in ("ATP", "ATP3"):
            if (self.alpha is not None and self.alpha != alpha) or (self.k is not None and self.k != k):
                raise ConfigurationError(f"{name} with n={self.n} fixes alpha={alpha}, k={k}")
            if alpha < 1 or k < 1 or alpha * k != self.n:
                raise ConfigurationError(f"ATP needs n = alpha * k, got n={self.n}, alpha={alpha}, k={k}")
            if self.auth_bits < 0:
                raise ConfigurationError("auth_bits must be >= 0")
        elif self.alpha is not None or self.k is not None:
            raise ConfigurationError(f"{name} takes no tree parameters")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "k", k)

    @property
    def is_tree(self) -> bool:
        return self.name in ("ATP", "ATP3")

    @property
    def param(self) -> str:
        if self.name == "KAP":
            return f"{self.p_d:g}"
        return ""

    def with_n(self, n: int) -> "ProtocolKind":
        if self.name == "ATP" and self.alpha != 1:
            raise ConfigurationError("with_n only rescales standard ATP (alpha = 1)")
        return ProtocolKind(self.name, n, p_d=self.p_d)

    def __str__(self) -> str:
        extra = f", p_d={self.p_d:g}" if self.name == "KAP" else ""
        if self.name == "ATP" and self.alpha != 1:
            extra = f", alpha={self.alpha}, k={self.k}"
        return f"{self.name}(n={self.n}{extra})"


def memory_cost(kind: ProtocolKind) -> int:
    """Bits of fast-phase material the tag stores."""
    n = kind.n
    if kind.name == "HKP":
        return 2 * n
    if kind.name in ("KAP", "GRAPH"):
        return 4 * n
    if kind.name == "ATP3":
        return 14 * n // 3
    return kind.alpha * (2 ** (kind.k + 1) - 2)


def material_length(kind: ProtocolKind) -> int:
    if kind.is_tree:
        if kind.k > ATP_MAX_DEPTH:
            raise ResourceLimitError(f"ATP trees of depth {kind.k} are too large to materialize")
        return kind.auth_bits + memory_cost(kind)
    return memory_cost(kind)


# -- instances -------------------------------------------------------------


@dataclass(frozen=True)
class HkpInstance:
    r0: BitString
    r1: BitString


@dataclass(frozen=True)
class KapInstance:
    r0: BitString
    r1: BitString
    t: BitString
    d: BitString


@dataclass(frozen=True)
class AtpInstance:
    """``trees[i][x - 1]`` is the label of BFS node x (root 0 carries no label)."""

    k: int
    auth: BitString
    trees: tuple[BitString, ...]

    def label(self, tree: int, node: int) -> int:
        return self.trees[tree][node - 1]


@dataclass(frozen=True)
class GraphInstance:
    graph: LabeledGraph


Instance = Union[HkpInstance, KapInstance, AtpInstance, GraphInstance]


def build_instance(kind: ProtocolKind, material: BitString, rng: RngSpec | None = None) -> Instance:
    """Split slow-phase output into the protocol's registers.

    For KAP the T register is redrawn as independent Bernoulli bits with
    P(T_i = 0) = p_d, so ``rng`` is required there.
    """
    n = kind.n
    if len(material) != material_length(kind):
        raise ConfigurationError(
            f"{kind} needs {material_length(kind)} bits of material, got {len(material)}"
        )
    if kind.name == "HKP":
        return HkpInstance(*split_registers(material, [n, n]))
    if kind.name == "KAP":
        r0, r1, _, d = split_registers(material, [n, n, n, n])
        if rng is None:
            raise ConfigurationError("KAP instances need an rng for the T register")
        t = BitString(tuple(1 - rng.bernoulli(kind.p_d) for _ in range(n)))
        return KapInstance(r0, r1, t, d)
    if kind.is_tree:
        size = 2 ** (kind.k + 1) - 2
        parts = split_registers(material, [kind.auth_bits] + [size] * kind.alpha)
        return AtpInstance(kind.k, parts[0], tuple(parts[1:]))
    return GraphInstance(label_graph(build_topology(n), material))


def random_instance(kind: ProtocolKind, rng: RngSpec) -> Instance:
    return build_instance(kind, rng.next_bits(material_length(kind)), rng)


def correct_responses(kind: ProtocolKind, instance: Instance, challenges: Sequence[int]) -> list[int | None]:
    """Responses the verifier accepts for a challenge sequence.

    ``None`` marks a challenge the verifier would never send (a KAP
    predefined round whose challenge differs from D_i).
    """
    out: list[int | None] = []
    if isinstance(instance, HkpInstance):
        for i, c in enumerate(challenges):
            out.append((instance.r1 if c else instance.r0)[i])
    elif isinstance(instance, KapInstance):
        for i, c in enumerate(challenges):
            if instance.t[i]:
                out.append((instance.r1 if c else instance.r0)[i])
            else:
                out.append(instance.r0[i] if c == instance.d[i] else None)
    elif isinstance(instance, AtpInstance):
        k = instance.k
        node = 0
        for pos, c in enumerate(challenges):
            if pos % k == 0:
                node = 0
            node = 2 * node + 1 + c
            out.append(instance.label(pos // k, node))
    else:
        g = instance.graph
        node = 0
        for c in challenges:
            node = g.step(node, c)
            out.append(g.node_values[node])
    return out


# -- state machines -------------------------------------------------------------


class Prover:
    """Honest prover: answers one challenge per call, in round order."""

    def __init__(self, kind: ProtocolKind, instance: Instance):
        self.kind = kind
        self.instance = instance
        self.round = 0

    def respond(self, challenge: int) -> int:
        if self.round >= self.kind.n:
            raise MalformedTranscriptError("prover already answered n challenges")
        r = self._respond(challenge)
        self.round += 1
        return r

    def _respond(self, challenge: int) -> int:
        inst = self.instance
        return (inst.r1 if challenge else inst.r0)[self.round]


class KapProver(Prover):
    """Latches on the first wrong predefined challenge and answers randomly afterwards."""

    def __init__(self, kind, instance, rng: RngSpec):
        super().__init__(kind, instance)
        self.rng = rng
        self.detected = False

    def _respond(self, challenge):
        inst, i = self.instance, self.round
        if not self.detected and not inst.t[i] and challenge != inst.d[i]:
            self.detected = True
        if self.detected:
            return self.rng.next_bit()
        if inst.t[i]:
            return (inst.r1 if challenge else inst.r0)[i]
        return inst.r0[i]


class AtpProver(Prover):
    def __init__(self, kind, instance):
        super().__init__(kind, instance)
        self.node = 0

    def _respond(self, challenge):
        k = self.kind.k
        if self.round % k == 0:
            self.node = 0
        self.node = 2 * self.node + 1 + challenge
        return self.instance.label(self.round // k, self.node)


class GraphProver(Prover):
    def __init__(self, kind, instance):
        super().__init__(kind, instance)
        self.node = 0

    def _respond(self, challenge):
        g = self.instance.graph
        self.node = g.step(self.node, challenge)
        return g.node_values[self.node]


def make_prover(kind: ProtocolKind, instance: Instance, rng: RngSpec | None = None) -> Prover:
    if kind.name == "KAP":
        return KapProver(kind, instance, rng if rng is not None else RngSpec(0))
    if kind.is_tree:
        return AtpProver(kind, instance)
    if kind.name == "GRAPH":
        return GraphProver(kind, instance)
    return Prover(kind, instance)


class Verifier:
    """Picks challenges and tracks the expected response round by round."""

    def __init__(self, kind: ProtocolKind, instance: Instance, rng: RngSpec):
        self.kind = kind
        self.instance = instance
        self.rng = rng
        self.round = 0
        self.node = 0  # graph protocol only

    def next_challenge(self) -> int:
        inst = self.instance
        if isinstance(inst, KapInstance) and not inst.t[self.round]:
            return inst.d[self.round]
        return self.rng.next_bit()

    def expect(self, challenge: int) -> int | None:
        """Expected response to ``challenge`` in the current round; advances the state."""
        inst = self.instance
        if isinstance(inst, GraphInstance):
            self.node = inst.graph.step(self.node, challenge)
            expected = inst.graph.node_values[self.node]
        elif isinstance(inst, AtpInstance):
            k = self.kind.k
            if self.round % k == 0:
                self.node = 0
            self.node = 2 * self.node + 1 + challenge
            expected = inst.label(self.round // k, self.node)
        elif isinstance(inst, KapInstance) and not inst.t[self.round]:
            expected = inst.r0[self.round] if challenge == inst.d[self.round] else None
        else:
            expected = (inst.r1 if challenge else inst.r0)[self.round]
        self.round += 1
        return expected


# -- transcripts ------------------------------------------------------------


class Verdict(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass(frozen=True)
class Round:
    challenge: int
    response: int
    relayed: bool = False
    tag_detected: bool = False


@dataclass(frozen=True)
class Transcript:
    kind: ProtocolKind
    rounds: tuple[Round, ...]
    verdict: Verdict
    auth: BitString | None = None
    material: Instance | None = field(default=None, compare=False, repr=False)

    @property
    def challenges(self) -> list[int]:
        return [r.challenge for r in self.rounds]

    @property
    def responses(self) -> list[int]:
        return [r.response for r in self.rounds]

    def replace_round(self, index: int, **changes) -> "Transcript":
        rounds = list(self.rounds)
        old = rounds[index]
        rounds[index] = Round(**{**old.__dict__, **changes})
        return Transcript(self.kind, tuple(rounds), self.verdict, self.auth, self.material)


def verify(kind: ProtocolKind, material: Instance, transcript: Transcript) -> Verdict:
    if len(transcript.rounds) != kind.n:
        raise MalformedTranscriptError(f"expected {kind.n} rounds, got {len(transcript.rounds)}")
    if kind.is_tree and transcript.auth != material.auth:
        return Verdict.REJECT
    if any(r.relayed for r in transcript.rounds):
        return Verdict.REJECT
    expected = correct_responses(kind, material, transcript.challenges)
    ok = all(e is not None and e == r.response for e, r in zip(expected, transcript.rounds))
    return Verdict.ACCEPT if ok else Verdict.REJECT


def run_honest_session(kind: ProtocolKind, prf: PrfSpec, rng: RngSpec) -> Transcript:
    """Slow phase (nonces + PRF), then n timed rounds between honest parties."""
    nonce_v = rng.next_bytes(16)
    nonce_p = rng.next_bytes(16)
    material = prf.expand(nonce_p, nonce_v, material_length(kind))
    instance = build_instance(kind, material, rng)
    prover = make_prover(kind, instance, rng)
    verifier = Verifier(kind, instance, rng)
    rounds = []
    for _ in range(kind.n):
        c = verifier.next_challenge()
        r = prover.respond(c)
        verifier.expect(c)
        rounds.append(Round(c, r, tag_detected=getattr(prover, "detected", False)))
    auth = instance.auth if isinstance(instance, AtpInstance) else None
    draft = Transcript(kind, tuple(rounds), Verdict.REJECT, auth, instance)
    return Transcript(kind, draft.rounds, verify(kind, instance, draft), auth, instance)


# -- prover functions ----------------------------------------------------------


def challenge_matrix(n: int) -> np.ndarray:
    """All 2^n challenge strings as rows, row index = packed integer."""
    idx = np.arange(2**n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


def pack_rows(bits: np.ndarray) -> np.ndarray:
    n = bits.shape[-1]
    weights = np.left_shift(np.int64(1), np.arange(n - 1, -1, -1, dtype=np.int64))
    return (bits.astype(np.int64) * weights).sum(axis=-1)


def response_bits(kind: ProtocolKind, registers: dict, challenges: np.ndarray) -> np.ndarray:
    """Correct response bits for batches of instances and challenge rows.

    ``registers`` holds arrays with a leading batch axis of size B:
    HKP ``r0, r1`` (B, n); KAP adds ``t``; trees ``labels`` (B, alpha, 2^(k+1)-1)
    indexed by BFS node; GRAPH ``q, s`` (B, 2n). ``challenges`` is (C, n).
    Returns (B, C, n). KAP predefined rounds answer R^0_i whatever the
    challenge, since the verifier only ever sends D_i there.
    """
    c = challenges[None, :, :].astype(bool)
    if kind.name in ("HKP", "KAP"):
        r0 = registers["r0"][:, None, :]
        r1 = registers["r1"][:, None, :]
        out = np.where(c, r1, r0)
        if kind.name == "KAP":
            out = np.where(registers["t"][:, None, :].astype(bool), out, r0)
        return out.astype(np.uint8)
    n = kind.n
    batch, count = registers[next(iter(registers))].shape[0], challenges.shape[0]
    out = np.empty((batch, count, n), dtype=np.uint8)
    rows = np.arange(batch)[:, None]
    if kind.is_tree:
        labels = registers["labels"]
        node = np.zeros((batch, count), dtype=np.int64)
        for pos in range(n):
            tree, depth = divmod(pos, kind.k)
            if depth == 0:
                node[:] = 0
            node = 2 * node + 1 + challenges[None, :, pos]
            out[:, :, pos] = labels[rows, tree, node]
        return out
    q, s = registers["q"], registers["s"]
    size = 2 * n
    node = np.zeros((batch, count), dtype=np.int64)
    for pos in range(n):
        follow_short = s[rows, node] == challenges[None, :, pos]
        node = np.where(follow_short, node + 1, node + 2) % size
        out[:, :, pos] = q[rows, node]
    return out


def instance_registers(kind: ProtocolKind, instance: Instance) -> dict:
    """Single instance as a batch of one for :func:`response_bits`."""
    if isinstance(instance, HkpInstance):
        return {"r0": instance.r0.to_array()[None], "r1": instance.r1.to_array()[None]}
    if isinstance(instance, KapInstance):
        return {
            "r0": instance.r0.to_array()[None],
            "r1": instance.r1.to_array()[None],
            "t": instance.t.to_array()[None],
        }
    if isinstance(instance, AtpInstance):
        width = 2 ** (instance.k + 1) - 1
        labels = np.zeros((1, len(instance.trees), width), dtype=np.uint8)
        for i, tree in enumerate(instance.trees):
            labels[0, i, 1:] = tree.to_array()
        return {"labels": labels}
    g = instance.graph
    return {
        "q": np.array(g.node_values, dtype=np.uint8)[None],
        "s": np.array(g.short_labels, dtype=np.uint8)[None],
    }


@dataclass(frozen=True)
class ProverFunction:
    n: int
    table: tuple[int, ...]

    def __post_init__(self):
        if len(self.table) != 2**self.n:
            raise ConfigurationError(f"table must have 2^{self.n} entries")

    def __call__(self, challenges: BitString | Sequence[int]) -> BitString:
        index = BitString(tuple(challenges)).to_int()
        return BitString.from_int(self.table[index], self.n)

    def preimage(self, y: int) -> list[int]:
        return [x for x, fx in enumerate(self.table) if fx == y]

    def preimage_sizes(self) -> dict[int, int]:
        values, counts = np.unique(np.asarray(self.table), return_counts=True)
        return dict(zip(values.tolist(), counts.tolist()))

    def best_response(self) -> tuple[int, int]:
        """(y, |I_y|) with the largest pre-image; ties go to the smallest y."""
        sizes = self.preimage_sizes()
        best = max(sizes.values())
        return min(y for y, size in sizes.items() if size == best), best


def prover_function(kind: ProtocolKind, instance: Instance, limit: int = ENUMERATION_LIMIT) -> ProverFunction:
    if kind.n > limit:
        raise ResourceLimitError(f"prover function table needs 2^{kind.n} entries (limit 2^{limit})")
    bits = response_bits(kind, instance_registers(kind, instance), challenge_matrix(kind.n))
    return ProverFunction(kind.n, tuple(pack_rows(bits[0]).tolist()))
