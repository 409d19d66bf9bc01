import math

import pytest

from homecyber.graph import AttackGraph, Edge, VulnNode
from homecyber.losses import (
    BusinessLine,
    RateSumExponential,
    TriggeredGamma,
    TriggeredLognormal,
)
from homecyber.scenario import bundled_case_study_path, load_scenario


def build_case_graph() -> AttackGraph:
    """The seven-node smart-home graph, built independently of the data file."""
    nodes = [
        VulnNode(1, "iPhone", 0.01),
        VulnNode(2, "smart TV", 0.02),
        VulnNode(3, "smart home hub"),
        VulnNode(4, "smart sensor"),
        VulnNode(5, "smart camera"),
        VulnNode(6, "smart lock"),
        VulnNode(7, "laptop", 0.9),
    ]
    edges = [
        Edge(1, 3, 0.01),
        Edge(2, 3, 0.01),
        Edge(3, 4, 0.01),
        Edge(3, 5, 0.01),
        Edge(4, 6, 0.01),
        Edge(7, 5, 0.01),
        Edge(7, 6, 0.01),
    ]
    return AttackGraph(nodes, edges)


def build_case_lines() -> list[BusinessLine]:
    return [
        BusinessLine(1, "data breach", frozenset({1, 2, 3, 4, 7}),
                     RateSumExponential(((1, 1 / 160), (2, 1 / 32), (3, 1 / 80),
                                         (4, 1 / 80), (7, 1 / 160)))),
        BusinessLine(2, "loss of use", frozenset({3, 5}),
                     RateSumExponential(((3, 1 / 640), (5, 1 / 320)))),
        BusinessLine(3, "ransomware", frozenset({7}), TriggeredLognormal(4.0, 1.0)),
        BusinessLine(4, "cyber extortion", frozenset({5}), TriggeredLognormal(7.0, 1.0)),
        BusinessLine(5, "online fraud", frozenset({1}), TriggeredGamma(1000.0, 1.0)),
        BusinessLine(6, "property theft", frozenset({6}), TriggeredGamma(2000.0, 1.0)),
    ]


@pytest.fixture(scope="session")
def case_graph():
    return build_case_graph()


@pytest.fixture(scope="session")
def case_lines():
    return build_case_lines()


@pytest.fixture(scope="session")
def case_scenario():
    return load_scenario(bundled_case_study_path())


def recursive_joint_prob(graph: AttackGraph, states) -> float:
    """Independent oracle: multiply conditional terms node by node, recursively.

    Walks nodes in id order and resolves each node's conditional probability
    from its parents' states directly, without any of the vectorized
    enumeration machinery.
    """

    def node_term(node):
        parents = graph.parents_of(node.id)
        if not parents:
            p = node.entry_prob
        else:
            survive = 1.0
            for parent_id, cond in parents:
                if states[graph.position(parent_id)]:
                    survive *= 1.0 - cond
            p = 1.0 - survive
        return p if states[graph.position(node.id)] else 1.0 - p

    def product(remaining):
        if not remaining:
            return 1.0
        return node_term(remaining[0]) * product(remaining[1:])

    return product(sorted(graph.nodes, key=lambda nd: nd.id))


def all_states(n: int):
    for index in range(1 << n):
        yield tuple((index >> k) & 1 for k in range(n))


def brute_force_marginals(graph: AttackGraph) -> dict[int, float]:
    """Exact marginals by brute-force sum of the recursive oracle over 2^n states."""
    totals = {node.id: 0.0 for node in graph.nodes}
    for states in all_states(graph.n):
        p = recursive_joint_prob(graph, states)
        for node in graph.nodes:
            if states[graph.position(node.id)]:
                totals[node.id] += p
    return totals


def lev_quadrature(dist, d: float, c: float) -> float:
    """Numeric-integration oracle: integrate the survival function on [d, d+c]."""
    from scipy.integrate import quad

    upper = math.inf if math.isinf(c) else d + c
    value, _ = quad(dist.survival, d, upper, limit=400, epsabs=1e-13, epsrel=1e-11)
    return value
