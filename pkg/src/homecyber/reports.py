"""Fixed-layout CSV tables for simulation, pricing, portfolio, and proposals.

Output is byte-deterministic: fixed column orders per table kind, "\\n" line
terminator, and floats printed with their shortest round-trip representation
(Python repr), so every numeric cell re-parses to the identical double.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .graph import AttackGraph, JointDistribution
from .portfolio import PortfolioResult, profit_summary
from .search import ProposalRow
from .simulate import SimulationResult, SummaryStats, summarize

SUMMARY_HEADER = (
    "Min", "Q25", "Median", "Q75", "Q90", "Q95", "Q99", "Q99.5", "Q99.9",
    "Max", "Mean", "SD",
)
SUMMARY_LEVELS = (0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 0.995, 0.999)
PROFIT_LEVELS = (0.01, 0.05, 0.1, 0.15, 0.5, 0.75)
PROFIT_HEADER = ("Label", "Min", "Q1", "Q5", "Q10", "Q15", "Q50", "Q75", "Max", "Mean", "SD")
LR_LEVELS = (0.25, 0.5, 0.75, 0.9, 0.95, 0.995)
LR_HEADER = ("Label", "Min", "Q25", "Q50", "Q75", "Q90", "Q95", "Q99.5", "Max", "Mean", "SD")


@dataclass(frozen=True)
class Table:
    header: tuple[str, ...]
    rows: tuple[tuple, ...]


def _format_cell(value) -> str:
    if isinstance(value, bool):
        raise TypeError("boolean cells are not part of any table layout")
    if isinstance(value, float):
        text = repr(value)
    elif isinstance(value, int):
        text = str(value)
    elif value is None:
        text = ""
    else:
        text = str(value)
        if "," in text or "\n" in text:
            raise ValueError(f"cell {text!r} would break the CSV layout")
    return text


def render_csv(table: Table) -> str:
    out = [",".join(table.header)]
    for row in table.rows:
        out.append(",".join(_format_cell(cell) for cell in row))
    return "\n".join(out) + "\n"


def export_csv(table: Table, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_csv(table))
    return path


def export_csv_blocks(tables: Sequence[Table], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(render_csv(t) for t in tables))
    return path


def _stat_row(stats: SummaryStats) -> tuple[float, ...]:
    quantiles = tuple(value for _, value in stats.quantiles)
    return (stats.minimum, *quantiles, stats.maximum, stats.mean, stats.sd)


def summary_table(result: SimulationResult) -> Table:
    """Per-line rows then the total-loss row, with the twelve stat columns."""
    rows = []
    for col in range(result.line_losses.shape[1]):
        rows.append(_stat_row(summarize(result.line_losses[:, col], SUMMARY_LEVELS)))
    rows.append(_stat_row(summarize(result.total_losses, SUMMARY_LEVELS)))
    return Table(header=SUMMARY_HEADER, rows=tuple(rows))


def premium_table(
    line_labels: Sequence[str], per_principle: dict[str, Sequence[float]]
) -> Table:
    """Rows per line plus a total row; one column per principle."""
    principles = tuple(per_principle)
    rows = []
    for i, label in enumerate(line_labels):
        rows.append((label, *(float(per_principle[p][i]) for p in principles)))
    rows.append(("total", *(float(sum(per_principle[p])) for p in principles)))
    return Table(header=("Line", *principles), rows=tuple(rows))


def portfolio_tables(
    results: Sequence[tuple[str, PortfolioResult]]
) -> tuple[Table, Table]:
    """Profit block and LR block in the two-block portfolio layout."""
    profit_rows = []
    lr_rows = []
    for label, result in results:
        p = profit_summary(result, PROFIT_LEVELS)
        profit_rows.append((f"{label} Profit", *_stat_row(p)))
        l = summarize(result.lr, LR_LEVELS)
        lr_rows.append((f"{label} LR", *_stat_row(l)))
    return (
        Table(header=PROFIT_HEADER, rows=tuple(profit_rows)),
        Table(header=LR_HEADER, rows=tuple(lr_rows)),
    )


def proposal_table(rows: Sequence[ProposalRow]) -> Table:
    header = (
        "Principle", "Total premium", "Coverage limit",
        "Deductible 1", "Mean Profit 1", "Deductible 2", "Mean Profit 2",
    )
    body = tuple(
        (
            r.principle, r.total_premium, r.coverage,
            r.deductible_1, r.mean_profit_1, r.deductible_2, r.mean_profit_2,
        )
        for r in rows
    )
    return Table(header=header, rows=body)


def joint_table(joint: JointDistribution) -> Table:
    header = (*(f"S{nid}" for nid in joint.node_ids), "Prob")
    rows = []
    for index in range(joint.probs.size):
        rows.append((*joint.state_of(index), float(joint.probs[index])))
    return Table(header=header, rows=tuple(rows))


def marginals_table(graph: AttackGraph, marginals) -> Table:
    rows = tuple(
        (node.id, node.label, float(marginals[pos]))
        for pos, node in enumerate(graph.nodes)
    )
    return Table(header=("Node", "Label", "Prob"), rows=rows)
