"""Activity-based energy accounting and efficiency reports."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

from .archconfig import ArchConfig
from .pipeline import SimStats


class EnergyError(ValueError):
    pass


@dataclass
class EnergyReport:
    component_energy: dict[str, float]  # joules
    total_energy: float
    run_time: float  # seconds
    avg_power: float  # watts
    tops: float
    tops_per_watt: float
    energy_per_image: float

    def to_dict(self) -> dict:
        return asdict(self)


def run_energy(stats: SimStats, config: ArchConfig) -> EnergyReport:
    """Charge each component ``power_active`` for every instance-cycle it was active.

    Idle instances draw ``leakage_fraction`` of their active power over the
    run time; the shipped default is fully gated (0).
    """
    names = {c.name for c in config.components}
    unknown = set(stats.activity) - names
    if unknown:
        raise EnergyError(f"activity counters for unknown components: {sorted(unknown)}")
    seconds = stats.seconds_per_logical_cycle
    run_time = stats.run_time
    leak = config.timing.leakage_fraction
    energy = {}
    for comp in config.components:
        active = stats.activity.get(comp.name, 0)
        e = comp.power_active * active * seconds
        if leak:
            idle_time = max(config.instances(comp) * run_time - active * seconds, 0.0)
            e += leak * comp.power_active * idle_time
        energy[comp.name] = e
    total = math.fsum(energy.values())
    avg_power = total / run_time if run_time > 0 else 0.0
    return EnergyReport(
        component_energy=energy,
        total_energy=total,
        run_time=run_time,
        avg_power=avg_power,
        tops=stats.tops,
        tops_per_watt=stats.tops / avg_power if avg_power > 0 else 0.0,
        energy_per_image=total / stats.images_completed,
    )


ENERGY_COLUMNS = ("net", "noc", "scenario", "images", "total_energy_j", "energy_per_image_j", "avg_power_w", "tops", "tops_per_watt")


def energy_row(stats: SimStats, report: EnergyReport) -> list:
    return [
        stats.network,
        stats.noc,
        stats.scenario,
        stats.images_completed,
        f"{report.total_energy:.6g}",
        f"{report.energy_per_image:.6g}",
        f"{report.avg_power:.6g}",
        f"{report.tops:.6g}",
        f"{report.tops_per_watt:.6g}",
    ]


def append_energy_csv(path: str | Path, stats: SimStats, report: EnergyReport) -> None:
    path = Path(path)
    new = not path.exists()
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(ENERGY_COLUMNS)
        w.writerow(energy_row(stats, report))
