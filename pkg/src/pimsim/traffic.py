"""Synthetic traffic patterns, injection-rate sweeps and saturation detection."""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from pathlib import Path

from .noc import Noc

PATTERNS = ("uniform_random", "transpose", "tornado", "shuffle", "neighbor", "bit_complement")
SATURATION_FACTOR = 3.0


class PatternError(ValueError):
    pass


def _index_bits(rows: int, cols: int) -> int:
    n = rows * cols
    if n & (n - 1):
        raise PatternError(f"pattern needs a power-of-two node count, mesh is {cols}x{rows}")
    return n.bit_length() - 1


def destination(pattern: str, src: tuple[int, int], mesh: tuple[int, int], rng: random.Random | None = None):
    """Destination of a packet from ``src`` on a ``(rows, cols)`` mesh.

    Deterministic patterns may map a node to itself; callers drop those
    packets.  ``uniform_random`` never returns ``src``.
    """
    rows, cols = mesh
    x, y = src
    if not (0 <= x < cols and 0 <= y < rows):
        raise ValueError(f"{src} is off the mesh")
    if pattern == "uniform_random":
        if rows * cols < 2:
            raise PatternError("uniform_random needs at least two nodes")
        rng = rng or random.Random(0)
        while True:
            d = (rng.randrange(cols), rng.randrange(rows))
            if d != src:
                return d
    if pattern == "transpose":
        if rows != cols:
            raise PatternError("transpose needs a square mesh")
        return (y, x)
    if pattern == "tornado":
        return ((x + (cols + 1) // 2 - 1) % cols, y)
    if pattern == "neighbor":
        return ((x + 1) % cols, y)
    if pattern in ("shuffle", "bit_complement"):
        if rows != cols:
            raise PatternError(f"{pattern} needs a square mesh")
        bits = _index_bits(rows, cols)
        mask = (1 << bits) - 1
        idx = y * cols + x
        if pattern == "shuffle":
            out = ((idx << 1) | (idx >> (bits - 1))) & mask
        else:
            out = ~idx & mask
        return (out % cols, out // cols)
    raise PatternError(f"unknown traffic pattern {pattern!r}")


@dataclass
class SweepPoint:
    injection_rate: float
    avg_latency: float
    reception_rate: float
    packets: int


@dataclass
class SweepCurve:
    pattern: str
    flow: str
    points: list[SweepPoint] = field(default_factory=list)
    saturation_rate: float | None = None
    zero_load_latency: float | None = None

    def to_rows(self):
        return [(p.injection_rate, p.avg_latency, p.reception_rate) for p in self.points]

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["injection_rate", "avg_latency_cycles", "reception_rate"])
            for rate, lat, rec in self.to_rows():
                w.writerow([f"{rate:.6g}", f"{lat:.6g}", f"{rec:.6g}"])


def run_point(
    pattern: str,
    flow: str,
    rate: float,
    mesh: tuple[int, int] = (8, 8),
    warmup: int = 10_000,
    measure: int = 50_000,
    seed: int = 0,
    packet_length: int = 5,
    trace_path: str | Path | None = None,
    **noc_kwargs,
) -> SweepPoint:
    """Simulate one injection rate (flits/node/cycle, Bernoulli per node)."""
    if not 0 < rate <= 1:
        raise ValueError(f"injection rate must be in (0, 1], got {rate}")
    rows, cols = mesh
    rng = random.Random(f"{seed}:{pattern}:{rate!r}")
    noc = Noc(rows, cols, flow, trace=trace_path is not None, **noc_kwargs)
    p_packet = rate / packet_length
    nodes = [(x, y) for y in range(rows) for x in range(cols)]
    fixed = {}
    if pattern != "uniform_random":
        fixed = {n: destination(pattern, n, mesh) for n in nodes}
    end = warmup + measure
    measured = []
    delivered_before = 0
    for t in range(end):
        if t == warmup:
            delivered_before = noc.stats.delivered_flits
        for n in nodes:
            if rng.random() < p_packet:
                d = fixed[n] if fixed else destination(pattern, n, mesh, rng)
                if d == n:
                    continue
                pkt = noc.inject(n, d, packet_length)
                if t >= warmup:
                    measured.append(pkt)
        noc.step()
    received = noc.stats.delivered_flits - delivered_before
    # drain so measured packets report a latency, bounded by one extra window
    limit = end + measure
    while noc.cycle < limit and any(p.done_cycle is None for p in measured[-50:]):
        noc.step()
    if not measured:
        raise ValueError(f"no packets injected in the measurement window at rate {rate}")
    if trace_path is not None:
        noc.write_trace(trace_path)
    lat = [(p.done_cycle if p.done_cycle is not None else noc.cycle) - p.inject_cycle for p in measured]
    return SweepPoint(rate, sum(lat) / len(lat), received / (len(nodes) * measure), len(measured))


def saturation_from_points(points: list[SweepPoint], factor: float = SATURATION_FACTOR):
    """Interpolated rate where average latency first exceeds ``factor`` x zero-load.

    Zero-load latency is the latency at the lowest swept rate.
    """
    if not points:
        return None, None
    zero = points[0].avg_latency
    threshold = factor * zero
    prev = points[0]
    for p in points[1:]:
        if p.avg_latency > threshold:
            frac = (threshold - prev.avg_latency) / (p.avg_latency - prev.avg_latency)
            return prev.injection_rate + frac * (p.injection_rate - prev.injection_rate), zero
        prev = p
    return None, zero


def sweep(
    pattern: str,
    flow: str,
    rates: list[float],
    warmup: int = 10_000,
    measure: int = 50_000,
    seed: int = 0,
    mesh: tuple[int, int] = (8, 8),
    stop_after_saturation: bool = False,
    **noc_kwargs,
) -> SweepCurve:
    rates = sorted(rates)
    if any(b <= a for a, b in zip(rates, rates[1:])):
        raise ValueError("rates must be strictly increasing")
    curve = SweepCurve(pattern, flow)
    for rate in rates:
        pt = run_point(pattern, flow, rate, mesh, warmup, measure, seed, **noc_kwargs)
        curve.points.append(pt)
        if stop_after_saturation and len(curve.points) > 1:
            if pt.avg_latency > 2 * SATURATION_FACTOR * curve.points[0].avg_latency:
                break
    curve.saturation_rate, curve.zero_load_latency = saturation_from_points(curve.points)
    if curve.points and all(p.packets == 0 for p in curve.points):
        raise ValueError("measurement window with zero deliveries")
    return curve


def reception_curve(curve: SweepCurve):
    """Return the (injection, reception) series and the plateau reception rate."""
    series = [(p.injection_rate, p.reception_rate) for p in curve.points]
    plateau = max((r for _, r in series), default=0.0)
    return series, plateau


def parse_rates(text: str) -> list[float]:
    """``"0.01:0.5:0.01"`` (start:stop:step, inclusive) or ``"0.1,0.2"``."""
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        out = []
        k = 0
        while True:
            r = round(start + k * step, 10)
            if r > stop + 1e-12:
                break
            out.append(r)
            k += 1
        return out
    return [float(v) for v in text.split(",") if v]
