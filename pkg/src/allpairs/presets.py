"""Built-in workload shapes for the synthetic application.

Each preset captures the measured characteristics of a real all-pairs
workload: item count, raw file size, cache slot size, per-node slot budgets,
and per-stage durations (mean and standard deviation, seconds). The
forensics shape is regular (tiny spread), the other two are irregular.
"""

from __future__ import annotations

from dataclasses import dataclass

from .perfmodel import StageCosts


@dataclass(frozen=True)
class WorkloadShape:
    name: str
    n: int
    mean_file_bytes: float
    slot_bytes: int
    device_slots: int
    host_slots: int
    # (mean_seconds, std_seconds) per stage
    parse: tuple[float, float]
    preprocess: tuple[float, float]
    comparison: tuple[float, float]
    postprocess: tuple[float, float] = (0.0, 0.0)

    def stage_costs(self, io_bandwidth: float = float("inf")) -> StageCosts:
        return StageCosts(
            t_parse=self.parse[0],
            t_preprocess=self.preprocess[0],
            t_comparison=self.comparison[0],
            t_postprocess=self.postprocess[0],
            mean_file_bytes=self.mean_file_bytes,
            io_bandwidth=io_bandwidth,
        )


FORENSICS = WorkloadShape(
    name="forensics",
    n=4980,
    mean_file_bytes=19.4e9 / 4980,
    slot_bytes=int(38.1e6),
    device_slots=291,
    host_slots=1050,
    parse=(130.8e-3, 14.11e-3),
    preprocess=(20.5e-3, 0.02e-3),
    comparison=(1.1e-3, 0.01e-3),
)

BIOINFORMATICS = WorkloadShape(
    name="bioinformatics",
    n=2500,
    mean_file_bytes=1.8e9 / 2500,
    slot_bytes=int(145.8e6),
    device_slots=81,
    host_slots=280,
    parse=(36.9e-3, 14.79e-3),
    preprocess=(27.0e-3, 4.90e-3),
    comparison=(2.1e-3, 0.79e-3),
)

MICROSCOPY = WorkloadShape(
    name="microscopy",
    n=256,
    mean_file_bytes=150e6 / 256,
    slot_bytes=6000,
    device_slots=256,
    host_slots=256,
    parse=(27.4e-3, 1.56e-3),
    preprocess=(0.0, 0.0),
    comparison=(564.3e-3, 348e-3),
)

SHAPES = {s.name: s for s in (FORENSICS, BIOINFORMATICS, MICROSCOPY)}
