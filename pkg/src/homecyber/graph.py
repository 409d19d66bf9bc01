"""Vulnerability DAG: validation, exact joint exploitation law, state sampling.

Nodes are vulnerabilities; a directed edge (i, j) carries the conditional
probability that exploiting i leads to exploiting j.  Entry nodes (no
parents) are exploited with their own entry probability; every other node
combines its exploited parents with a noisy-OR.  A state vector holds one
boolean per node, index-aligned with ``AttackGraph.nodes``.
"""

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_ENUMERATION_CAP = 22

# State vectors are boolean arrays index-aligned with AttackGraph.nodes.
StateVector = np.ndarray


class GraphValidationError(ValueError):
    """Raised when an operation requires a valid graph and does not get one."""


class EnumerationSizeError(ValueError):
    """Raised when exact enumeration would exceed the configured state cap."""


@dataclass(frozen=True)
class VulnNode:
    """One vulnerability.  ``label`` is opaque metadata (CVE id, CVSS, ...)."""

    id: int
    label: str = ""
    entry_prob: float | None = None


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    cond_prob: float


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


class AttackGraph:
    """Immutable vulnerability graph.

    Construction never raises on bad data; run :func:`validate_graph` to get
    the list of invariant violations.  Derived structure (positions, parent
    lists) is precomputed once and shared, so instances are safe for
    concurrent readers.
    """

    def __init__(self, nodes: Iterable[VulnNode], edges: Iterable[Edge]):
        self.nodes: tuple[VulnNode, ...] = tuple(nodes)
        self.edges: tuple[Edge, ...] = tuple(edges)
        self._position: dict[int, int] = {}
        for pos, node in enumerate(self.nodes):
            self._position.setdefault(node.id, pos)
        # Parent lists keep only resolvable endpoints; validation reports the rest.
        parents: dict[int, list[tuple[int, float]]] = {n.id: [] for n in self.nodes}
        for edge in self.edges:
            if edge.src in self._position and edge.dst in self._position:
                parents[edge.dst].append((edge.src, edge.cond_prob))
        self._parents = {
            nid: tuple(sorted(plist)) for nid, plist in parents.items()
        }
        self._topo_cache: tuple[int, ...] | None = None

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(node.id for node in self.nodes)

    def position(self, node_id: int) -> int:
        try:
            return self._position[node_id]
        except KeyError:
            raise GraphValidationError(f"unknown node id {node_id}") from None

    def node(self, node_id: int) -> VulnNode:
        return self.nodes[self.position(node_id)]

    def parents_of(self, node_id: int) -> tuple[tuple[int, float], ...]:
        """(parent id, conditional probability) pairs, ascending by parent id."""
        return self._parents.get(node_id, ())


def validate_graph(graph: AttackGraph) -> ValidationReport:
    """Check every type invariant; violations are data, not exceptions."""
    violations: list[str] = []
    seen_ids: set[int] = set()
    for node in graph.nodes:
        if node.id in seen_ids:
            violations.append(f"node {node.id}: duplicate id")
        seen_ids.add(node.id)
        if node.entry_prob is not None and not 0.0 <= node.entry_prob <= 1.0:
            violations.append(
                f"node {node.id}: entry_prob {node.entry_prob} outside [0, 1]"
            )

    seen_edges: set[tuple[int, int]] = set()
    for edge in graph.edges:
        ident = f"edge {edge.src}->{edge.dst}"
        if edge.src == edge.dst:
            violations.append(f"{ident}: self-loop")
        if (edge.src, edge.dst) in seen_edges:
            violations.append(f"{ident}: duplicate edge")
        seen_edges.add((edge.src, edge.dst))
        if not 0.0 <= edge.cond_prob <= 1.0:
            violations.append(f"{ident}: cond_prob {edge.cond_prob} outside [0, 1]")
        for endpoint in (edge.src, edge.dst):
            if endpoint not in graph._position:
                violations.append(f"{ident}: references unknown node {endpoint}")

    for node in graph.nodes:
        has_parents = bool(graph.parents_of(node.id))
        if has_parents and node.entry_prob is not None:
            violations.append(f"node {node.id}: entry_prob on parented node")
        if not has_parents and node.entry_prob is None:
            violations.append(f"node {node.id}: entry node missing entry_prob")

    if _kahn_order(graph) is None:
        cyclic = sorted(set(graph.node_ids) - set(_kahn_prefix(graph)))
        violations.append(f"cycle detected involving nodes {cyclic}")

    return ValidationReport(tuple(violations))


def _kahn_prefix(graph: AttackGraph) -> list[int]:
    """Kahn's algorithm with an id-ordered heap; short when a cycle remains."""
    indegree = {node.id: len(graph.parents_of(node.id)) for node in graph.nodes}
    children: dict[int, list[int]] = {node.id: [] for node in graph.nodes}
    for edge in graph.edges:
        if edge.src in children and edge.dst in indegree:
            children[edge.src].append(edge.dst)
    ready = [nid for nid, deg in indegree.items() if deg == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for child in children[nid]:
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(ready, child)
    return order


def _kahn_order(graph: AttackGraph) -> list[int] | None:
    order = _kahn_prefix(graph)
    return order if len(order) == graph.n else None


def topological_order(graph: AttackGraph) -> tuple[int, ...]:
    """Parent-first node ids, ties broken by ascending id.  Raises on cycles."""
    if graph._topo_cache is None:
        order = _kahn_order(graph)
        if order is None:
            raise GraphValidationError("graph contains a cycle; no topological order")
        graph._topo_cache = tuple(order)
    return graph._topo_cache


def conditional_exploit_prob(
    node_id: int, parent_states: Sequence[bool] | StateVector, graph: AttackGraph
) -> float:
    """Bernoulli parameter of one node given the states of its parents.

    Entry nodes return their entry probability unconditionally.  Non-entry
    nodes survive only if every exploited parent independently fails, so the
    probability is ``1 - prod(1 - e_ij)`` over exploited parents and 0 when
    none are exploited.
    """
    parents = graph.parents_of(node_id)
    if not parents:
        entry = graph.node(node_id).entry_prob
        if entry is None:
            raise GraphValidationError(f"entry node {node_id} has no entry_prob")
        return entry
    survive = 1.0
    for parent_id, cond_prob in parents:
        if parent_states[graph.position(parent_id)]:
            survive *= 1.0 - cond_prob
    return 1.0 - survive


@dataclass(frozen=True)
class JointDistribution:
    """Exact probability of each of the 2^n states.

    ``probs[idx]`` is the probability of the state whose bit k (of ``idx``)
    is the boolean state of ``node_ids[k]``.  The array is read-only.
    """

    node_ids: tuple[int, ...]
    probs: np.ndarray

    def state_index(self, states: Sequence[bool] | StateVector) -> int:
        if len(states) != len(self.node_ids):
            raise ValueError(
                f"state vector length {len(states)} != node count {len(self.node_ids)}"
            )
        idx = 0
        for k, s in enumerate(states):
            if s:
                idx |= 1 << k
        return idx

    def state_of(self, index: int) -> tuple[int, ...]:
        return tuple((index >> k) & 1 for k in range(len(self.node_ids)))

    def prob_of(self, states: Sequence[bool] | StateVector) -> float:
        return float(self.probs[self.state_index(states)])

    def total(self) -> float:
        return math.fsum(self.probs.tolist())


def enumerate_joint(
    graph: AttackGraph, cap: int = DEFAULT_ENUMERATION_CAP
) -> JointDistribution:
    """Exact joint law as the parent-first product of conditional terms.

    Raises :class:`EnumerationSizeError` above ``cap`` nodes (callers should
    fall back to Monte Carlo marginals there).
    """
    n = graph.n
    if n > cap:
        raise EnumerationSizeError(
            f"{n} nodes exceed the enumeration cap of {cap} (2^{n} states)"
        )
    size = 1 << n
    index = np.arange(size, dtype=np.uint64)
    bits = [((index >> np.uint64(k)) & np.uint64(1)).astype(bool) for k in range(n)]
    probs = np.ones(size, dtype=np.float64)
    for node_id in topological_order(graph):
        pos = graph.position(node_id)
        parents = graph.parents_of(node_id)
        if not parents:
            entry = graph.node(node_id).entry_prob
            if entry is None:
                raise GraphValidationError(f"entry node {node_id} has no entry_prob")
            exploited_prob = np.full(size, entry)
        else:
            survive = np.ones(size)
            for parent_id, cond_prob in parents:
                survive *= np.where(bits[graph.position(parent_id)], 1.0 - cond_prob, 1.0)
            exploited_prob = 1.0 - survive
        probs *= np.where(bits[pos], exploited_prob, 1.0 - exploited_prob)
    total = math.fsum(probs.tolist())
    if abs(total - 1.0) > 1e-12:
        raise GraphValidationError(
            f"joint probabilities sum to {total!r}, off by more than 1e-12"
        )
    probs.flags.writeable = False
    return JointDistribution(graph.node_ids, probs)


def marginal_exploit_probs(
    graph: AttackGraph, cap: int = DEFAULT_ENUMERATION_CAP
) -> np.ndarray:
    """Exact per-node exploitation probabilities, aligned with ``graph.nodes``."""
    joint = enumerate_joint(graph, cap=cap)
    n = graph.n
    index = np.arange(1 << n, dtype=np.uint64)
    marginals = np.empty(n)
    for pos in range(n):
        mask = ((index >> np.uint64(pos)) & np.uint64(1)).astype(bool)
        if n <= 16:
            # fsum keeps entry-node marginals exact to the last ulp
            marginals[pos] = math.fsum(joint.probs[mask].tolist())
        else:
            marginals[pos] = float(joint.probs[mask].sum())
    return marginals


def sample_state(graph: AttackGraph, rng: np.random.Generator) -> StateVector:
    """One Bernoulli state vector, nodes drawn in topological order."""
    states = np.zeros(graph.n, dtype=bool)
    for node_id in topological_order(graph):
        p = conditional_exploit_prob(node_id, states, graph)
        states[graph.position(node_id)] = rng.random() < p
    return states


def sample_states(
    graph: AttackGraph, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized batch of state vectors, shape ``(count, n)``.

    Draw order is fixed (one uniform vector per node, topological order), so
    the batch is reproducible for a given stream regardless of the states
    that come up.
    """
    states = np.zeros((count, graph.n), dtype=bool)
    for node_id in topological_order(graph):
        parents = graph.parents_of(node_id)
        if not parents:
            entry = graph.node(node_id).entry_prob
            if entry is None:
                raise GraphValidationError(f"entry node {node_id} has no entry_prob")
            p = np.full(count, entry)
        else:
            survive = np.ones(count)
            for parent_id, cond_prob in parents:
                survive *= np.where(
                    states[:, graph.position(parent_id)], 1.0 - cond_prob, 1.0
                )
            p = 1.0 - survive
        states[:, graph.position(node_id)] = rng.random(count) < p
    return states
