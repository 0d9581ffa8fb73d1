"""Distance-bounding protocol lab: the graph-based protocol, HKP, KAP and ATP,
their fraud probabilities in closed form, Monte Carlo estimates, and exhaustive
oracles for small round counts."""

from .adversary import (
    FraudEstimate,
    PreAskAttack,
    best_j_rule,
    bruteforce_distance_exact,
    bruteforce_mafia_exact,
    distance_simulate,
    mafia_simulate,
)
from .analytics import (
    atp_distance_bound,
    closed_form_distance,
    closed_form_mafia,
    generic_distance_bound,
    graph_distance_bound,
    graph_mafia,
    response_match_prob,
)
from .bitcore import BitString, PrfSpec, RngSpec, prf_expand, split_registers
from .graphmodel import build_topology, head_node, label_graph, rotation_check, walk_probability
from .protocols import ProtocolKind, Transcript, memory_cost, prover_function, run_honest_session, verify

__version__ = "0.1.0"
