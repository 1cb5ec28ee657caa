"""Intra-layer, inter-layer and batch pipeline scheduling.

Time is counted in logical cycles: one pixel vector per replica per layer
per cycle.  A layer with replication ``r`` fires groups of ``r``
consecutive (row-major) output pixels.  A group fires once every pixel in
it has its receptive window available, no earlier than one cycle after the
previous group, and no earlier than the cycle after the same layer finished
the previous image.

NoC cost enters in two places.  Each layer-to-layer edge has a zero-load
packet latency that is added to input availability (in whole logical
cycles), and a lock-step communication phase stretches every logical cycle
by ``(C + B) / C`` where ``C`` is the number of router clocks in one compute
phase and ``B`` is the measured delivery time of one steady-state step of
inter-layer traffic.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .archconfig import ArchConfig, default_config
from .mapping import LayerPlan, MappingPlan, place
from .noc import FLOWS, Noc
from .workload import LayerSpec, NetworkSpec, cycles_wait, network_ops, output_dims

INTRA_LATENCY = {(False, False): 24, (False, True): 29, (True, False): 26, (True, True): 31}


class HazardError(RuntimeError):
    """A layer was scheduled to work on two images, or two groups, at once."""


def intra_layer_latency(multi_tile: bool, pooling: bool) -> int:
    return INTRA_LATENCY[(bool(multi_tile), bool(pooling))]


@dataclass(frozen=True)
class ScenarioId:
    replication: bool
    batch: bool

    @property
    def number(self) -> int:
        return 1 + int(self.batch) + 2 * int(self.replication)

    @classmethod
    def from_number(cls, n: int) -> "ScenarioId":
        if n not in (1, 2, 3, 4):
            raise ValueError(f"scenario must be 1..4, got {n}")
        return cls(replication=n >= 3, batch=n in (2, 4))

    def __str__(self):
        return str(self.number)


SCENARIOS = tuple(ScenarioId.from_number(n) for n in (1, 2, 3, 4))


@dataclass(frozen=True)
class LayerSchedule:
    name: str
    start_offset: int
    intra_latency: int
    occupancy: int
    busy_span: int  # first fire to last fire, inclusive
    done_offset: int  # cycle the layer's last output is ready


@dataclass(frozen=True)
class PipelineSchedule:
    layers: tuple[LayerSchedule, ...]
    image_latency: int
    issue_interval: int
    batch: bool

    def to_dict(self) -> dict:
        return {
            "image_latency": self.image_latency,
            "issue_interval": self.issue_interval,
            "batch": self.batch,
            "layers": [asdict(layer) for layer in self.layers],
        }


def layer_occupancy(layer: LayerSpec, lp: LayerPlan, config: ArchConfig) -> int:
    """Logical cycles a layer is busy per image.

    Conv layers fire one group of ``r`` pixels per cycle.  An fc layer's
    input register feeds one 128-row group per cycle, so it needs one cycle
    per row group (split across replicas when replicated).
    """
    if layer.kind == "fc":
        return math.ceil(lp.footprint.row_groups / lp.replication)
    return math.ceil(layer.pixels / lp.replication)


def _pooled_ready(ready: np.ndarray, h: int, w: int) -> np.ndarray:
    # ready times are nondecreasing in row-major order, so a 2x2 window is
    # complete when its bottom-right pixel is
    qy, qx = np.meshgrid(np.arange(h // 2), np.arange(w // 2), indexing="ij")
    return ready[((2 * qy + 1) * w + 2 * qx + 1).ravel()]


@dataclass
class _LayerRun:
    fires: np.ndarray
    ready: np.ndarray  # per output value vector (post-pool), logical cycle


def _run_image(
    net: NetworkSpec,
    mplan: MappingPlan,
    config: ArchConfig,
    edge_latency: list[int],
    issue: int,
    busy_free: list[int] | None = None,
) -> list[_LayerRun]:
    """Fire times of every group of every layer for one image."""
    runs: list[_LayerRun] = []
    prev_ready = None
    for i, (layer, lp) in enumerate(zip(net.layers, mplan.layers)):
        intra = intra_layer_latency(lp.multi_tile, layer.pooling_after)
        occ = layer_occupancy(layer, lp, config)
        if prev_ready is None:
            avail_all = issue
        else:
            avail_all = int(prev_ready[-1]) + edge_latency[i - 1]
        if layer.kind == "fc" or prev_ready is None:
            req = np.zeros(occ, dtype=np.int64)
            req[0] = avail_all
        else:
            pixels = np.arange(layer.pixels, dtype=np.int64)
            need = np.minimum(pixels + cycles_wait(layer.w, layer.l), len(prev_ready)) - 1
            pix_req = prev_ready[need] + edge_latency[i - 1]
            last = np.minimum(np.arange(occ, dtype=np.int64) * lp.replication + lp.replication, layer.pixels) - 1
            req = pix_req[last]
        if busy_free is not None:
            req[0] = max(int(req[0]), busy_free[i])
        g = np.arange(occ, dtype=np.int64)
        fires = g + np.maximum.accumulate(req - g)
        if layer.kind == "fc":
            ready = np.array([fires[-1] + intra + 1], dtype=np.int64)
        else:
            pix_fire = np.repeat(fires, lp.replication)[: layer.pixels]
            ready = pix_fire + intra + 1
            if layer.pooling_after:
                ready = _pooled_ready(ready, layer.h, layer.w)
        runs.append(_LayerRun(fires, ready))
        prev_ready = ready
    return runs


def _check_plan(net: NetworkSpec, mplan: MappingPlan) -> None:
    if len(mplan.layers) != len(net.layers):
        raise ValueError(f"plan has {len(mplan.layers)} layers, network {net.name} has {len(net.layers)}")


def build_schedule(
    net: NetworkSpec,
    mplan: MappingPlan,
    scenario: ScenarioId,
    noc_latency_per_edge: list[int] | dict[int, int] | None = None,
    config: ArchConfig | None = None,
) -> PipelineSchedule:
    """Schedule one image issued at cycle 0.

    ``noc_latency_per_edge`` maps edge ``i`` (layer i -> i+1) to extra
    logical cycles; missing edges cost nothing.  In batch mode images are
    issued every ``max busy_span`` cycles, which keeps every layer working
    on one image at a time and every image on the same relative timetable.
    """
    _check_plan(net, mplan)
    config = config or default_config()
    edges = _edge_list(noc_latency_per_edge, len(net.layers))
    runs = _run_image(net, mplan, config, edges, issue=0)
    layers = []
    for layer, lp, run in zip(net.layers, mplan.layers, runs):
        layers.append(
            LayerSchedule(
                name=lp.name,
                start_offset=int(run.fires[0]),
                intra_latency=intra_layer_latency(lp.multi_tile, layer.pooling_after),
                occupancy=len(run.fires),
                busy_span=int(run.fires[-1] - run.fires[0] + 1),
                done_offset=int(run.ready[-1]),
            )
        )
    latency = layers[-1].done_offset
    interval = max(ls.busy_span for ls in layers) if scenario.batch else latency
    return PipelineSchedule(tuple(layers), latency, interval, scenario.batch)


def _edge_list(edges, n_layers: int) -> list[int]:
    out = [0] * max(n_layers - 1, 0)
    if edges is None:
        return out
    items = edges.items() if isinstance(edges, dict) else enumerate(edges)
    for k, v in items:
        if not 0 <= k < len(out):
            raise ValueError(f"no edge {k} in a {n_layers}-layer network")
        if v < 0:
            raise ValueError("edge latency must be >= 0")
        out[k] = int(v)
    return out


# -- NoC coupling --------------------------------------------------------------


@dataclass(frozen=True)
class NocModel:
    flow: str = "smart"
    hpcmax: int = 14
    buffer_depth: int = 4
    router_delay: int = 1
    link_delay: int = 1

    def __post_init__(self):
        if self.flow not in FLOWS:
            raise ValueError(f"unknown flow control {self.flow!r}")

    def make(self, config: ArchConfig) -> Noc:
        return Noc(
            config.mesh_rows,
            config.mesh_cols,
            self.flow,
            hpcmax=self.hpcmax,
            buffer_depth=self.buffer_depth,
            router_delay=self.router_delay,
            link_delay=self.link_delay,
        )


def _xy(tile: tuple[int, int]) -> tuple[int, int]:
    row, col = tile
    return (col, row)


def _replica_tile(lp: LayerPlan, k: int, last_core: bool, config: ArchConfig) -> tuple[int, int]:
    cores = lp.footprint.cores
    core = (k + 1) * cores - 1 if last_core else k * cores
    return lp.tile_ids[min(core // config.cores_per_tile, len(lp.tile_ids) - 1)]


def step_traffic(net: NetworkSpec, mplan: MappingPlan, config: ArchConfig) -> list[tuple[int, tuple, tuple, int]]:
    """Packets ``(edge, src_xy, dst_xy, flits)`` of one steady-state step.

    Each output pixel vector travels as one packet from the producing
    replica's last tile to the consuming replica's first tile.  A pooling
    layer emits a quarter as many vectors (at least one); an fc layer spreads
    its output vector over its occupancy.
    """
    packets = []
    for i in range(len(net.layers) - 1):
        layer, lp, nlp = net.layers[i], mplan.layers[i], mplan.layers[i + 1]
        nxt = net.layers[i + 1]
        channels = output_dims(layer)[0]
        flits = math.ceil(channels * config.input_bits / config.flit_bits)
        if layer.kind == "fc":
            occ = layer_occupancy(layer, lp, config)
            sends = [(lp.tile_ids[-1], math.ceil(flits / occ))]
        else:
            r = lp.replication
            emitted = max(1, r // 4) if layer.pooling_after else r
            sends = [(_replica_tile(lp, j * r // emitted, True, config), flits) for j in range(emitted)]
        for j, (src, length) in enumerate(sends):
            if nxt.kind == "fc":
                dst = nlp.tile_ids[0]
            else:
                dst = _replica_tile(nlp, j % nlp.replication, False, config)
            if src != dst:
                packets.append((i, _xy(src), _xy(dst), length))
    return packets


@dataclass
class NocCost:
    edge_clocks: list[int]  # zero-load latency of one packet per edge
    bundle_clocks: int
    packet_latencies: list[int]


def measure_noc(net: NetworkSpec, mplan: MappingPlan, model: NocModel, config: ArchConfig) -> NocCost:
    traffic = step_traffic(net, mplan, config)
    edge_clocks = [0] * (len(net.layers) - 1)
    seen = set()
    for edge, src, dst, length in traffic:
        if edge in seen:
            continue
        seen.add(edge)
        noc = model.make(config)
        pkt = noc.inject(src, dst, length)
        noc.run_until_idle()
        edge_clocks[edge] = pkt.latency
    noc = model.make(config)
    pkts = [noc.inject(src, dst, length, tag=edge) for edge, src, dst, length in traffic]
    noc.run_until_idle()
    bundle = max((p.done_cycle for p in pkts), default=0)
    return NocCost(edge_clocks, bundle, [p.latency for p in pkts])


# -- simulation ----------------------------------------------------------------


@dataclass
class SimStats:
    network: str
    noc: str
    scenario: int
    images_completed: int
    cycles_total: int  # logical cycles, first issue to last output
    issue_interval: int
    steady_interval: int  # measured between the last two completions
    image_latency: int
    stretch: float
    seconds_per_logical_cycle: float
    network_ops: int
    fps: float
    tops: float
    activity: dict[str, int] = field(default_factory=dict)  # component -> instance-cycles
    noc_packet_latencies: list[int] = field(default_factory=list)
    uniform: bool = True
    completions: list[int] = field(default_factory=list)
    layer_starts: list[list[int]] = field(default_factory=list)  # [image][layer]

    @property
    def run_time(self) -> float:
        """Seconds spent on the completed images at the steady-state rate."""
        return self.images_completed / self.fps if self.fps > 0 else 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimStats":
        return cls(**data)


def _activity(net: NetworkSpec, mplan: MappingPlan, config: ArchConfig) -> tuple[int, int]:
    """(core-cycles, tile-cycles) one image spends across all layers."""
    core_cycles = tile_cycles = 0
    cpt = config.cores_per_tile
    for layer, lp in zip(net.layers, mplan.layers):
        fp = lp.footprint
        if layer.kind == "fc":
            occ = layer_occupancy(layer, lp, config)
            per_step = math.ceil(fp.col_groups / config.subarrays_per_core) * lp.replication
            core_cycles += occ * per_step
            tile_cycles += occ * math.ceil(per_step / cpt)
        else:
            full, rest = divmod(layer.pixels, lp.replication)
            core_cycles += layer.pixels * fp.cores
            tile_cycles += full * math.ceil(lp.replication * fp.cores / cpt)
            if rest:
                tile_cycles += math.ceil(rest * fp.cores / cpt)
    return core_cycles, tile_cycles


def simulate(
    net: NetworkSpec,
    mplan: MappingPlan,
    scenario: ScenarioId | int,
    noc_model: NocModel | str = "ideal",
    n_images: int = 4,
    config: ArchConfig | None = None,
) -> SimStats:
    """Run ``n_images`` through the mapped network.

    Images are issued at the schedule's interval; each layer may only start
    an image after finishing the previous one.  The run is deterministic:
    the seed-free processing model has no random choices and the NoC
    bundle is replayed from a fixed injection order.
    """
    if n_images < 1:
        raise ValueError("n_images must be >= 1")
    _check_plan(net, mplan)
    config = config or default_config()
    if isinstance(scenario, int):
        scenario = ScenarioId.from_number(scenario)
    if isinstance(noc_model, str):
        noc_model = NocModel(noc_model)
    if not all(lp.tile_ids for lp in mplan.layers):
        mplan = place(mplan, config, allow_wrap=True)

    cost = measure_noc(net, mplan, noc_model, config)
    clocks = config.timing.clocks_per_logical_cycle
    edges = [c // clocks for c in cost.edge_clocks]
    stretch = (clocks + cost.bundle_clocks) / clocks
    sched = build_schedule(net, mplan, scenario, edges, config)

    busy_free = [0] * len(net.layers)
    completions, starts = [], []
    for k in range(n_images):
        runs = _run_image(net, mplan, config, edges, k * sched.issue_interval, busy_free)
        for j, run in enumerate(runs):
            if run.fires[0] < busy_free[j] or (len(run.fires) > 1 and np.any(np.diff(run.fires) < 1)):
                raise HazardError(f"layer {mplan.layers[j].name} double-booked on image {k}")
            busy_free[j] = int(run.fires[-1]) + 1
        completions.append(int(runs[-1].ready[-1]))
        starts.append([int(r.fires[0]) for r in runs])

    gaps = [tuple(np.diff(s)) for s in starts]
    uniform = all(g == gaps[0] for g in gaps)
    steady = completions[-1] - completions[-2] if n_images > 1 else sched.issue_interval
    seconds = config.seconds_per_logical_cycle
    fps = 1.0 / (steady * stretch * seconds)
    ops = network_ops(net)

    core_cycles, tile_cycles = _activity(net, mplan, config)
    activity = {}
    for comp in config.components:
        if comp.scope == "core":
            active = core_cycles
        elif comp.scope == "tile":
            active = tile_cycles
        else:
            active = completions[-1]
        activity[comp.name] = active * comp.count_per_scope * (n_images if comp.scope != "node" else 1)

    return SimStats(
        network=net.name,
        noc=noc_model.flow,
        scenario=scenario.number,
        images_completed=n_images,
        cycles_total=completions[-1],
        issue_interval=sched.issue_interval,
        steady_interval=steady,
        image_latency=sched.image_latency,
        stretch=stretch,
        seconds_per_logical_cycle=seconds,
        network_ops=ops,
        fps=fps,
        tops=fps * ops / 1e12,
        activity=activity,
        noc_packet_latencies=cost.packet_latencies,
        uniform=uniform,
        completions=completions,
        layer_starts=starts,
    )


def geomean(values) -> float:
    values = list(values)
    if not values or min(values) <= 0:
        raise ValueError("geometric mean needs positive values")
    return math.exp(math.fsum(math.log(v) for v in values) / len(values))


def speedup_table(results: dict, baseline, axis: int) -> dict:
    """Normalize throughput along one key axis.

    ``results`` maps ``(net, noc, scenario)`` to :class:`SimStats` (or fps).
    ``axis`` picks the key position being compared (1 = noc, 2 = scenario)
    and ``baseline`` its reference value.  Returns ``{"speedups": {key: x},
    "geomean": {value: g}}`` with geometric means over the nets.
    """
    def fps(v):
        return v.fps if isinstance(v, SimStats) else float(v)

    speedups = {}
    for key, val in results.items():
        base_key = key[:axis] + (baseline,) + key[axis + 1:]
        if base_key not in results:
            raise KeyError(f"missing baseline {base_key}")
        speedups[key] = fps(val) / fps(results[base_key])
    groups: dict = {}
    for key, s in speedups.items():
        rest = tuple(k for n, k in enumerate(key) if n != 0)
        groups.setdefault(rest, []).append(s)
    return {"speedups": speedups, "geomean": {k: geomean(v) for k, v in groups.items()}}
