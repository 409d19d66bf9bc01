"""Scenario files, canonical serialization, digests, and run manifests.

A scenario is a single JSON document holding the vulnerability graph, the
business lines, and a default policy.  The canonical serialization (sorted
keys, minimal separators, shortest round-trip numbers) defines the digest
recorded in every run manifest, so semantically identical files hash alike.
"""

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import __version__
from .graph import AttackGraph, Edge, VulnNode, validate_graph
from .losses import (
    BusinessLine,
    RateSumExponential,
    TriggeredGamma,
    TriggeredLognormal,
)
from .pricing import Policy

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Scenario file cannot be parsed or fails validation."""


@dataclass(frozen=True)
class Scenario:
    graph: AttackGraph
    lines: tuple[BusinessLine, ...]
    default_policy: Policy | None
    description: str
    schema_version: int


def bundled_case_study_path() -> Path:
    """Path of the scenario shipped with the package (seven-node smart home)."""
    return Path(resources.files("homecyber").joinpath("data/case_study.json"))


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return parse_scenario(data, source=str(path))


def parse_scenario(data, source: str = "<scenario>") -> Scenario:
    """Build and validate a Scenario from a parsed JSON document."""
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: top level must be an object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(
            f"{source}: schema_version {version!r} not recognized "
            f"(expected {SCHEMA_VERSION})"
        )

    graph_doc = _require(data, "graph", dict, source)
    nodes = []
    for i, node_doc in enumerate(_require(graph_doc, "nodes", list, source)):
        where = f"{source}: graph.nodes[{i}]"
        nodes.append(
            VulnNode(
                id=_require(node_doc, "id", int, where),
                label=str(node_doc.get("label", "")),
                entry_prob=(
                    float(node_doc["entry_prob"])
                    if node_doc.get("entry_prob") is not None
                    else None
                ),
            )
        )
    edges = []
    for i, edge_doc in enumerate(_require(graph_doc, "edges", list, source)):
        where = f"{source}: graph.edges[{i}]"
        edges.append(
            Edge(
                src=_require(edge_doc, "src", int, where),
                dst=_require(edge_doc, "dst", int, where),
                cond_prob=float(_require(edge_doc, "cond_prob", (int, float), where)),
            )
        )
    graph = AttackGraph(nodes, edges)
    report = validate_graph(graph)
    if not report.ok:
        listing = "; ".join(report.violations)
        raise ScenarioError(f"{source}: invalid graph: {listing}")

    lines = []
    seen_indices: set[int] = set()
    for i, line_doc in enumerate(_require(data, "lines", list, source)):
        where = f"{source}: lines[{i}]"
        index = _require(line_doc, "index", int, where)
        name = str(line_doc.get("name", f"line {index}"))
        where = f"{source}: lines[{i}] (index {index}, {name!r})"
        if index in seen_indices:
            raise ScenarioError(f"{where}: duplicate line index")
        seen_indices.add(index)
        triggers = _require(line_doc, "trigger_set", list, where)
        for nid in triggers:
            if nid not in graph.node_ids:
                raise ScenarioError(f"{where}: trigger node {nid} not in graph")
        try:
            model = _parse_model(_require(line_doc, "model", dict, where), where)
            lines.append(
                BusinessLine(
                    index=index,
                    name=name,
                    trigger_set=frozenset(int(t) for t in triggers),
                    model=model,
                )
            )
        except ValueError as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
    if not lines:
        raise ScenarioError(f"{source}: at least one business line is required")

    policy_doc = data.get("default_policy")
    policy = None
    if policy_doc is not None:
        try:
            policy = Policy(
                deductible=float(_require(policy_doc, "deductible", (int, float), source)),
                coverage=float(_require(policy_doc, "coverage", (int, float), source)),
            )
        except ValueError as exc:
            raise ScenarioError(f"{source}: default_policy: {exc}") from exc

    return Scenario(
        graph=graph,
        lines=tuple(sorted(lines, key=lambda ln: ln.index)),
        default_policy=policy,
        description=str(data.get("description", "")),
        schema_version=SCHEMA_VERSION,
    )


def _require(doc, key, kind, source):
    if not isinstance(doc, dict) or key not in doc:
        raise ScenarioError(f"{source}: missing required field {key!r}")
    value = doc[key]
    if kind is int and isinstance(value, bool):
        raise ScenarioError(f"{source}: field {key!r} must be an integer")
    if not isinstance(value, kind):
        expected = kind.__name__ if isinstance(kind, type) else "number"
        raise ScenarioError(f"{source}: field {key!r} must be {expected}")
    return value


def _parse_model(doc: dict, where: str):
    family = doc.get("family")
    if family == "rate_sum_exponential":
        rates_doc = _require(doc, "rates", dict, where)
        return RateSumExponential(
            tuple((int(nid), float(rate)) for nid, rate in rates_doc.items())
        )
    if family == "triggered_lognormal":
        return TriggeredLognormal(
            mu=float(_require(doc, "mu", (int, float), where)),
            sigma=float(_require(doc, "sigma", (int, float), where)),
        )
    if family == "triggered_gamma":
        return TriggeredGamma(
            alpha=float(_require(doc, "alpha", (int, float), where)),
            beta=float(_require(doc, "beta", (int, float), where)),
        )
    raise ScenarioError(f"{where}: unknown model family {family!r}")


# --- canonical form and digest ---------------------------------------------


def canonical_document(scenario: Scenario) -> dict:
    """Scenario as plain data in canonical order (nodes by id, lines by index)."""
    nodes = []
    for node in sorted(scenario.graph.nodes, key=lambda nd: nd.id):
        doc: dict = {"id": node.id, "label": node.label}
        if node.entry_prob is not None:
            doc["entry_prob"] = node.entry_prob
        nodes.append(doc)
    edges = [
        {"src": e.src, "dst": e.dst, "cond_prob": e.cond_prob}
        for e in sorted(scenario.graph.edges, key=lambda e: (e.src, e.dst))
    ]
    lines = []
    for line in scenario.lines:
        model = line.model
        if isinstance(model, RateSumExponential):
            model_doc = {
                "family": "rate_sum_exponential",
                "rates": {str(nid): rate for nid, rate in model.rates},
            }
        elif isinstance(model, TriggeredLognormal):
            model_doc = {"family": "triggered_lognormal", "mu": model.mu, "sigma": model.sigma}
        else:
            model_doc = {"family": "triggered_gamma", "alpha": model.alpha, "beta": model.beta}
        lines.append(
            {
                "index": line.index,
                "name": line.name,
                "trigger_set": sorted(line.trigger_set),
                "model": model_doc,
            }
        )
    doc = {
        "schema_version": scenario.schema_version,
        "description": scenario.description,
        "graph": {"nodes": nodes, "edges": edges},
        "lines": lines,
    }
    if scenario.default_policy is not None:
        doc["default_policy"] = {
            "deductible": scenario.default_policy.deductible,
            "coverage": scenario.default_policy.coverage,
        }
    return doc


def canonical_serialization(scenario: Scenario) -> str:
    return json.dumps(canonical_document(scenario), sort_keys=True, separators=(",", ":"))


def scenario_digest(scenario: Scenario) -> str:
    return hashlib.sha256(canonical_serialization(scenario).encode("utf-8")).hexdigest()


# --- run manifests ----------------------------------------------------------


@dataclass(frozen=True)
class RunManifest:
    scenario_digest: str
    master_seed: int
    runs: int | None = None
    replications: int | None = None
    homes: int | None = None
    tool_version: str = __version__

    def to_document(self) -> dict:
        return {
            "scenario_digest": self.scenario_digest,
            "master_seed": self.master_seed,
            "runs": self.runs,
            "replications": self.replications,
            "homes": self.homes,
            "tool_version": self.tool_version,
        }


def write_manifest(manifest: RunManifest, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "manifest.json"
    payload = json.dumps(manifest.to_document(), sort_keys=True, separators=(",", ":"))
    path.write_text(payload + "\n")
    return path
