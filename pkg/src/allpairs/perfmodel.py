"""Analytical lower-bound model for all-pairs runs.

Estimates total GPU/CPU/IO time for processing all C(n,2) pairs given
average stage costs and a data-reuse factor R (total loads / n), plus the
idealized lower bound on run time and the system-efficiency ratio used to
judge measured runs against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Single-node efficiencies reported for the three reference workloads on
# real hardware; kept as comparison constants for the experiment harness.
REFERENCE_EFFICIENCY = {
    "forensics": 0.946,
    "bioinformatics": 0.885,
    "microscopy": 0.992,
}


def pair_count(n: int) -> int:
    """Number of unordered pairs over n items: n*(n-1)/2."""
    if n < 0:
        raise ValueError(f"item count must be non-negative, got {n}")
    return n * (n - 1) // 2


@dataclass(frozen=True)
class StageCosts:
    """Average per-stage durations (seconds) and I/O characteristics.

    All costs are means; the model deliberately ignores variance.
    """

    t_parse: float = 0.0
    t_preprocess: float = 0.0
    t_comparison: float = 0.0
    t_postprocess: float = 0.0
    mean_file_bytes: float = 0.0
    io_bandwidth: float = math.inf  # bytes/second

    def __post_init__(self) -> None:
        for name in ("t_parse", "t_preprocess", "t_comparison", "t_postprocess",
                     "mean_file_bytes"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.io_bandwidth <= 0:
            raise ValueError("io_bandwidth must be positive")


@dataclass(frozen=True)
class ModelReport:
    """Computed model quantities for one (n, R, costs) scenario."""

    n: int
    r_factor: float
    t_gpu: float
    t_cpu: float
    t_io: float
    t_min: float
    efficiency: float | None = None

    def as_dict(self) -> dict:
        out = {
            "n": self.n,
            "R": self.r_factor,
            "T_gpu_s": self.t_gpu,
            "T_cpu_s": self.t_cpu,
            "T_io_s": self.t_io,
            "T_min_s": self.t_min,
        }
        if self.efficiency is not None:
            out["efficiency"] = self.efficiency
        return out


def t_gpu(n: int, r_factor: float, costs: StageCosts) -> float:
    """Total device time: R*n preprocess executions plus C(n,2) comparisons."""
    _check(n, r_factor)
    return r_factor * n * costs.t_preprocess + pair_count(n) * costs.t_comparison


def t_cpu(n: int, r_factor: float, costs: StageCosts) -> float:
    """Total CPU time: R*n parse executions plus C(n,2) post-process steps."""
    _check(n, r_factor)
    return r_factor * n * costs.t_parse + pair_count(n) * costs.t_postprocess


def t_io(n: int, r_factor: float, costs: StageCosts) -> float:
    """Estimated I/O time: R*n file reads at the average I/O bandwidth."""
    _check(n, r_factor)
    if math.isinf(costs.io_bandwidth):
        return 0.0
    return r_factor * n * costs.mean_file_bytes / costs.io_bandwidth


def t_min(n: int, costs: StageCosts) -> float:
    """Lower bound on run time: perfect reuse (R=1), free I/O, device-bound."""
    return t_gpu(n, 1.0, costs)


def efficiency(t_lower_bound: float, p: int, t_measured: float) -> float:
    """Ratio of the ideal per-node share of the lower bound to the measured time.

    May exceed 1.0 for p > 1 when the baseline was computed with a worse
    (single-node) reuse factor than the cluster achieves.
    """
    if p < 1:
        raise ValueError("node count must be >= 1")
    if t_measured <= 0:
        raise ValueError("measured time must be positive")
    return (t_lower_bound / p) / t_measured


def report(n: int, r_factor: float, costs: StageCosts,
           p: int = 1, t_measured: float | None = None) -> ModelReport:
    """Evaluate the full model; includes efficiency when a measurement is given."""
    eff = None
    if t_measured is not None:
        eff = efficiency(t_min(n, costs), p, t_measured)
    return ModelReport(
        n=n,
        r_factor=r_factor,
        t_gpu=t_gpu(n, r_factor, costs),
        t_cpu=t_cpu(n, r_factor, costs),
        t_io=t_io(n, r_factor, costs),
        t_min=t_min(n, costs),
        efficiency=eff,
    )


def _check(n: int, r_factor: float) -> None:
    if n < 0:
        raise ValueError("item count must be non-negative")
    if r_factor < 1.0 and n > 0:
        raise ValueError("reuse factor R must be >= 1")
