"""Monte Carlo loss simulation: R independent runs of state + per-line draws.

Each run samples one exploitation state (nodes in topological order) and then
one loss per business line in ascending line order.  Run r draws from its own
substream derived from (master_seed, r), which makes results bit-identical
whether runs execute serially or across any number of workers.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import streams
from .graph import AttackGraph, sample_state
from .losses import BusinessLine, sample_loss

DEFAULT_QUANTILE_LEVELS = (0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 0.995, 0.999)


@dataclass(frozen=True)
class SimulationResult:
    """Per-run line losses (R x M) and their row sums, plus the seed record."""

    line_losses: np.ndarray
    total_losses: np.ndarray
    run_count: int
    master_seed: int
    line_indices: tuple[int, ...]


@dataclass(frozen=True)
class SummaryStats:
    minimum: float
    maximum: float
    mean: float
    sd: float
    quantiles: tuple[tuple[float, float], ...]

    def quantile(self, level: float) -> float:
        for lv, value in self.quantiles:
            if lv == level:
                return value
        raise KeyError(f"no quantile at level {level}")


def run_simulation(
    graph: AttackGraph,
    lines: Sequence[BusinessLine],
    runs: int,
    master_seed: int,
    workers: int = 1,
) -> SimulationResult:
    """Simulate ``runs`` independent loss rows.

    Args:
        graph: validated vulnerability graph.
        lines: business lines; simulated in ascending ``index`` order.
        runs: number of Monte Carlo runs (>= 1).
        master_seed: seed from which every per-run substream derives.
        workers: worker threads; any value yields bit-identical results.

    Returns:
        SimulationResult whose ``total_losses[r]`` is the ascending-index sum
        of ``line_losses[r]``, term by term in float64.
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    ordered = sorted(lines, key=lambda ln: ln.index)
    line_losses = np.zeros((runs, len(ordered)))

    def fill(run_range):
        for r in run_range:
            rng = streams.substream(master_seed, r, lane=streams.RUN_LANE)
            state = sample_state(graph, rng)
            for col, line in enumerate(ordered):
                line_losses[r, col] = sample_loss(line, state, graph, rng)

    if workers <= 1:
        fill(range(runs))
    else:
        chunk = -(-runs // workers)
        ranges = [range(lo, min(lo + chunk, runs)) for lo in range(0, runs, chunk)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, ranges))

    total = np.zeros(runs)
    for col in range(len(ordered)):
        total += line_losses[:, col]
    line_losses.flags.writeable = False
    total.flags.writeable = False
    return SimulationResult(
        line_losses=line_losses,
        total_losses=total,
        run_count=runs,
        master_seed=master_seed,
        line_indices=tuple(line.index for line in ordered),
    )


def summarize(
    samples: Sequence[float] | np.ndarray,
    levels: Sequence[float] = DEFAULT_QUANTILE_LEVELS,
) -> SummaryStats:
    """Sample statistics with linearly interpolated empirical quantiles.

    SD uses the n-1 divisor; a single observation reports SD 0.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("cannot summarize an empty sample")
    levels = tuple(float(lv) for lv in levels)
    if any(not 0.0 < lv < 1.0 for lv in levels):
        raise ValueError(f"quantile levels must lie in (0, 1): {levels}")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError(f"quantile levels must be strictly increasing: {levels}")
    qs = np.quantile(x, levels) if levels else np.empty(0)
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return SummaryStats(
        minimum=float(x.min()),
        maximum=float(x.max()),
        mean=float(x.mean()),
        sd=sd,
        quantiles=tuple(zip(levels, (float(q) for q in qs))),
    )
