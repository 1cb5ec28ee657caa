"""Architecture parameters and the per-component power/area table.

Everything else in the package reads hardware numbers from an
:class:`ArchConfig`; nothing hardcodes them.  Configs are JSON files with
three top-level keys (``arch``, ``components``, ``timing``) plus a
``schema_version``.  The shipped default lives in ``data/default_config.json``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any

SCHEMA_VERSION = 1
SCOPES = ("core", "tile", "node")


class ConfigError(ValueError):
    """Raised when a config file cannot be parsed or violates an invariant."""


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    power_active: float  # watts per instance while active
    area: float  # mm^2 per instance
    count_per_scope: int
    scope: str
    provenance: str = ""

    def validate(self) -> None:
        if self.scope not in SCOPES:
            raise ConfigError(f"component {self.name!r}: scope must be one of {SCOPES}, got {self.scope!r}")
        if self.power_active < 0:
            raise ConfigError(f"component {self.name!r}: power_active must be >= 0")
        if self.area < 0:
            raise ConfigError(f"component {self.name!r}: area must be >= 0")
        if self.count_per_scope < 1:
            raise ConfigError(f"component {self.name!r}: count_per_scope must be >= 1")


@dataclass(frozen=True)
class TimingConfig:
    # Wall time of one logical cycle's compute phase. Calibrated, see README.
    seconds_per_logical_cycle: float = 2.5e-7
    # Router clocks available per logical compute phase; converts NoC cycles
    # into logical-cycle stretch.
    clocks_per_logical_cycle: int = 1000
    # Fraction of active power drawn by idle components (0 = fully gated).
    leakage_fraction: float = 0.0

    def validate(self) -> None:
        if not self.seconds_per_logical_cycle > 0:
            raise ConfigError("timing.seconds_per_logical_cycle must be > 0")
        if self.clocks_per_logical_cycle < 1:
            raise ConfigError("timing.clocks_per_logical_cycle must be >= 1")
        if not 0.0 <= self.leakage_fraction <= 1.0:
            raise ConfigError("timing.leakage_fraction must be in [0, 1]")


@dataclass(frozen=True)
class ArchConfig:
    mesh_rows: int = 16
    mesh_cols: int = 20
    cores_per_tile: int = 12
    subarrays_per_core: int = 8
    subarray_rows: int = 128
    subarray_cols: int = 128
    cell_bits: int = 2
    weight_bits: int = 16
    input_bits: int = 16
    dac_bits: int = 1
    adc_bits: int = 8
    flit_bits: int = 128
    tile_budget: int = 320
    timing: TimingConfig = field(default_factory=TimingConfig)
    components: tuple[ComponentSpec, ...] = ()

    @property
    def cells_per_weight(self) -> int:
        return self.weight_bits // self.cell_bits

    @property
    def n_tiles(self) -> int:
        return self.mesh_rows * self.mesh_cols

    @property
    def seconds_per_logical_cycle(self) -> float:
        return self.timing.seconds_per_logical_cycle

    def validate(self) -> None:
        for f in fields(self):
            if f.name in ("timing", "components"):
                continue
            value = getattr(self, f.name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"arch.{f.name} must be an integer, got {value!r}")
            if value <= 0:
                raise ConfigError(f"arch.{f.name} must be strictly positive, got {value}")
        if self.weight_bits % self.cell_bits:
            raise ConfigError(
                f"arch.weight_bits ({self.weight_bits}) must be divisible by arch.cell_bits ({self.cell_bits})"
            )
        if self.tile_budget > self.n_tiles:
            raise ConfigError(
                f"arch.tile_budget ({self.tile_budget}) exceeds mesh capacity {self.mesh_rows}x{self.mesh_cols}"
            )
        self.timing.validate()
        names = set()
        for comp in self.components:
            comp.validate()
            if comp.name in names:
                raise ConfigError(f"duplicate component name {comp.name!r}")
            names.add(comp.name)

    def component(self, name: str) -> ComponentSpec:
        for comp in self.components:
            if comp.name == name:
                return comp
        raise KeyError(name)

    def scope_multiplicity(self, scope: str) -> int:
        """Number of scope instances on the node."""
        if scope == "node":
            return 1
        if scope == "tile":
            return self.tile_budget
        if scope == "core":
            return self.tile_budget * self.cores_per_tile
        raise ConfigError(f"unknown scope {scope!r}")

    def instances(self, comp: ComponentSpec) -> int:
        return comp.count_per_scope * self.scope_multiplicity(comp.scope)


@dataclass(frozen=True)
class NodeTotals:
    total_area: float
    peak_power: float


def node_totals(config: ArchConfig) -> NodeTotals:
    """Sum area and peak power over every component instance on the node."""
    if not config.components:
        raise ConfigError("component table is empty")
    area = math.fsum(c.area * config.instances(c) for c in config.components)
    power = math.fsum(c.power_active * config.instances(c) for c in config.components)
    return NodeTotals(total_area=area, peak_power=power)


def from_dict(data: dict[str, Any]) -> ArchConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    arch = dict(data.get("arch", {}))
    known = {f.name for f in fields(ArchConfig)} - {"timing", "components"}
    unknown = set(arch) - known
    if unknown:
        raise ConfigError(f"unknown arch keys: {sorted(unknown)}")
    try:
        timing = TimingConfig(**data.get("timing", {}))
        components = tuple(ComponentSpec(**c) for c in data.get("components", []))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    config = ArchConfig(**arch, timing=timing, components=components)
    config.validate()
    return config


def to_dict(config: ArchConfig) -> dict[str, Any]:
    arch = {f.name: getattr(config, f.name) for f in fields(config) if f.name not in ("timing", "components")}
    return {
        "schema_version": SCHEMA_VERSION,
        "arch": arch,
        "timing": asdict(config.timing),
        "components": [asdict(c) for c in config.components],
    }


def dumps(config: ArchConfig) -> str:
    return json.dumps(to_dict(config), indent=2)


def load_config(path: str | Path | None = None) -> ArchConfig:
    """Load and validate a JSON config; ``None`` loads the shipped default."""
    if path is None:
        text = resources.files("pimsim").joinpath("data/default_config.json").read_text()
        source = "<default>"
    else:
        source = str(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON: {exc}") from exc
    return from_dict(data)


def default_config() -> ArchConfig:
    return load_config(None)


def with_mesh(config: ArchConfig, rows: int, cols: int) -> ArchConfig:
    """Copy of ``config`` on a different mesh, with the tile budget set to fill it."""
    out = replace(config, mesh_rows=rows, mesh_cols=cols, tile_budget=rows * cols)
    out.validate()
    return out
