"""Crossbar footprints, weight-replication plans and tile placement.

A layer's weight matrix has ``c*l*l`` rows and ``n`` columns of 16-bit
weights; each weight spans ``weight_bits / cell_bits`` adjacent cells.  The
matrix is folded into 128x128 subarrays, subarrays into cores, and cores
into tiles.  Replicas of one layer may share a tile; layers never do.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from math import ceil

from .archconfig import ArchConfig
from .workload import LayerSpec, NetworkSpec

# Spatial size -> replication factor. Anything not listed (fc, 7x7) gets 1.
REPLICATION_LADDER = {224: 16, 112: 8, 56: 4, 28: 2, 14: 1}


class BudgetError(RuntimeError):
    pass


class PlacementError(RuntimeError):
    pass


class BudgetWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LayerFootprint:
    rows_needed: int
    col_cells_needed: int
    row_groups: int
    col_groups: int
    subarrays: int
    cores: int


def footprint(layer: LayerSpec, config: ArchConfig) -> LayerFootprint:
    rows = layer.c * layer.l * layer.l
    cols = layer.n * config.cells_per_weight
    row_groups = ceil(rows / config.subarray_rows)
    col_groups = ceil(cols / config.subarray_cols)
    subarrays = row_groups * col_groups
    return LayerFootprint(
        rows_needed=rows,
        col_cells_needed=cols,
        row_groups=row_groups,
        col_groups=col_groups,
        subarrays=subarrays,
        cores=ceil(subarrays / config.subarrays_per_core),
    )


@dataclass(frozen=True)
class LayerPlan:
    index: int
    name: str
    kind: str
    footprint: LayerFootprint
    replication: int
    cores_total: int
    tiles: int
    tile_ids: tuple[tuple[int, int], ...] = ()

    @property
    def multi_tile(self) -> bool:
        """True when the layer occupies more than one tile."""
        return self.tiles > 1


@dataclass(frozen=True)
class MappingPlan:
    network: str
    layers: tuple[LayerPlan, ...]
    total_tiles: int
    conv_tiles: int
    tile_budget: int
    budget_ok: bool
    replication_enabled: bool
    strict: bool = False
    wrapped: bool = False  # placement reused mesh positions (non-strict overflow)
    notes: tuple[str, ...] = field(default=())

    def replications(self) -> list[int]:
        return [lp.replication for lp in self.layers]

    def to_dict(self) -> dict:
        return {
            "network": self.network,
            "replication_enabled": self.replication_enabled,
            "total_tiles": self.total_tiles,
            "conv_tiles": self.conv_tiles,
            "tile_budget": self.tile_budget,
            "budget_ok": self.budget_ok,
            "wrapped": self.wrapped,
            "notes": list(self.notes),
            "layers": [
                {
                    "name": lp.name,
                    "kind": lp.kind,
                    "rows_needed": lp.footprint.rows_needed,
                    "col_cells_needed": lp.footprint.col_cells_needed,
                    "subarrays": lp.footprint.subarrays,
                    "cores": lp.footprint.cores,
                    "replication": lp.replication,
                    "cores_total": lp.cores_total,
                    "tiles": lp.tiles,
                    "tile_ids": [list(t) for t in lp.tile_ids],
                }
                for lp in self.layers
            ],
        }


def _layer_plan(index: int, layer: LayerSpec, fp: LayerFootprint, rep: int, config: ArchConfig) -> LayerPlan:
    cores_total = fp.cores * rep
    return LayerPlan(
        index=index,
        name=layer.name or f"layer{index}",
        kind=layer.kind,
        footprint=fp,
        replication=rep,
        cores_total=cores_total,
        tiles=ceil(cores_total / config.cores_per_tile),
    )


def ladder_replication(layer: LayerSpec) -> int:
    if layer.kind == "fc":
        return 1
    return REPLICATION_LADDER.get(layer.h, 1)


def plan(
    net: NetworkSpec,
    config: ArchConfig,
    replication_enabled: bool,
    strict: bool = False,
    replications: list[int] | None = None,
) -> MappingPlan:
    """Build a replication plan under the tile budget.

    Conv replication follows the stage ladder; while the conv layers alone
    exceed the budget, the replicated layer holding the most tiles is halved
    (earliest wins ties).  FC layers are never replicated.  Whether the full
    conv+fc total fits is reported in ``budget_ok``; in strict mode a miss
    raises, otherwise a :class:`BudgetWarning` is emitted.

    ``replications`` overrides the ladder with explicit per-layer factors.
    """
    fps = [footprint(layer, config) for layer in net.layers]
    if replications is not None:
        if len(replications) != len(net.layers) or min(replications) < 1:
            raise ValueError("replications must give one factor >= 1 per layer")
        reps = list(replications)
    elif replication_enabled:
        reps = [ladder_replication(layer) for layer in net.layers]
    else:
        reps = [1] * len(net.layers)

    def tiles_of(i):
        return ceil(fps[i].cores * reps[i] / config.cores_per_tile)

    conv_idx = [i for i, layer in enumerate(net.layers) if layer.kind == "conv"]
    notes = []
    while sum(tiles_of(i) for i in conv_idx) > config.tile_budget:
        candidates = [i for i in conv_idx if reps[i] > 1]
        if not candidates:
            break
        victim = max(candidates, key=lambda i: (tiles_of(i), -i))
        reps[victim] //= 2
        notes.append(f"halved replication of {net.layers[victim].name} to {reps[victim]}")

    layer_plans = tuple(_layer_plan(i, layer, fps[i], reps[i], config) for i, layer in enumerate(net.layers))
    total = sum(lp.tiles for lp in layer_plans)
    conv_total = sum(layer_plans[i].tiles for i in conv_idx)
    ok = total <= config.tile_budget
    if not ok:
        msg = (
            f"{net.name}: mapping needs {total} tiles ({conv_total} conv + {total - conv_total} fc) "
            f"but only {config.tile_budget} are available"
        )
        if strict:
            raise BudgetError(msg)
        warnings.warn(msg, BudgetWarning, stacklevel=2)
        notes.append(msg)
    return MappingPlan(
        network=net.name,
        layers=layer_plans,
        total_tiles=total,
        conv_tiles=conv_total,
        tile_budget=config.tile_budget,
        budget_ok=ok,
        replication_enabled=replication_enabled,
        strict=strict,
        notes=tuple(notes),
    )


def place(mplan: MappingPlan, config: ArchConfig, allow_wrap: bool = False) -> MappingPlan:
    """Assign tiles in row-major mesh order, one contiguous range per layer.

    Coordinates are ``(row, col)``.  A plan larger than the mesh raises
    unless ``allow_wrap`` is set, in which case positions are reused modulo
    the mesh size and the plan is flagged ``wrapped``.
    """
    capacity = config.mesh_rows * config.mesh_cols
    if mplan.total_tiles > capacity and not allow_wrap:
        raise PlacementError(
            f"plan needs {mplan.total_tiles} tiles but the {config.mesh_rows}x{config.mesh_cols} mesh has {capacity}"
        )
    cursor = 0
    placed = []
    for lp in mplan.layers:
        ids = tuple(divmod((cursor + k) % capacity, config.mesh_cols) for k in range(lp.tiles))
        cursor += lp.tiles
        placed.append(replace(lp, tile_ids=ids))
    return replace(mplan, layers=tuple(placed), wrapped=mplan.total_tiles > capacity)
