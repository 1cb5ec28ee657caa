"""Cycle-accurate 2D-mesh NoC with XY routing.

Three flow-control models share one engine:

* ``wormhole``: a flit spends ``router_delay`` cycles in each router and
  ``link_delay`` cycles on each link.  Output ports are owned by a packet
  from its head flit to its tail flit; buffers hold single flits.
* ``smart``: a flit that wins its local switch sends a setup request down
  its current straight XY segment and, in the same traversal slot, crosses
  up to ``hpcmax`` routers without being buffered.  At every router the
  closest requester wins the output (the local buffered flit is closest).
  The flit is buffered where it must turn, loses a grant, or arrives.
  With ``hpcmax=1`` this reduces exactly to wormhole.
* ``ideal``: no network; a packet of L flits arrives ``1 + (L - 1)`` cycles
  after injection.

Coordinates are ``(x, y)``; X hops are taken first.  Ports are indexed by
direction of travel, so the input buffer fed by the eastbound link of a
router is ``EAST`` at the receiving router.
"""

from __future__ import annotations

import csv
import heapq
from collections import deque
from dataclasses import dataclass, field

LOCAL, EAST, WEST, NORTH, SOUTH = range(5)
PORT_NAMES = ("local", "east", "west", "north", "south")
_STEP = {EAST: (1, 0), WEST: (-1, 0), NORTH: (0, 1), SOUTH: (0, -1)}
FLOWS = ("wormhole", "smart", "ideal")


class NocError(RuntimeError):
    pass


class NocDeadlock(NocError):
    pass


def xy_route(src: tuple[int, int], dst: tuple[int, int], rows: int | None = None, cols: int | None = None):
    """Return the ordered list of hop directions and the hop count."""
    for name, (x, y) in (("src", src), ("dst", dst)):
        if x < 0 or y < 0 or (cols is not None and x >= cols) or (rows is not None and y >= rows):
            raise ValueError(f"{name} {(x, y)} is off the {rows}x{cols} mesh")
    dx = dst[0] - src[0]
    dy = dst[1] - src[1]
    hops = [EAST if dx > 0 else WEST] * abs(dx) + [NORTH if dy > 0 else SOUTH] * abs(dy)
    return hops, len(hops)


def analytic_latency(t_w: float, hops: int, t_c: float, t_s: float) -> float:
    """Wire delay per hop times hop count, plus contention and serialization."""
    if min(t_w, hops, t_c, t_s) < 0:
        raise ValueError("latency terms must be non-negative")
    return t_w * hops + t_c + t_s


@dataclass(eq=False)
class Packet:
    id: int
    src: tuple[int, int]
    dst: tuple[int, int]
    length: int
    inject_cycle: int
    tag: object = None
    delivered: int = 0
    head_cycle: int | None = None
    done_cycle: int | None = None

    @property
    def latency(self) -> int | None:
        if self.done_cycle is None:
            return None
        return self.done_cycle - self.inject_cycle


class Flit:
    __slots__ = ("packet", "seq", "head", "tail", "dx", "dy", "ready")

    def __init__(self, packet: Packet, seq: int):
        self.packet = packet
        self.seq = seq
        self.head = seq == 0
        self.tail = seq == packet.length - 1
        self.dx, self.dy = packet.dst
        self.ready = 0

    def __repr__(self):
        return f"Flit(p{self.packet.id}.{self.seq})"


@dataclass
class NocStats:
    injected_packets: int = 0
    injected_flits: int = 0
    delivered_packets: int = 0
    delivered_flits: int = 0
    throttled_cycles: int = 0
    flit_hops: int = 0
    latencies: list = field(default_factory=list)


class Noc:
    """Mesh network state advanced one cycle per :meth:`step`."""

    def __init__(
        self,
        rows: int,
        cols: int,
        flow: str = "wormhole",
        hpcmax: int = 14,
        buffer_depth: int = 4,
        router_delay: int = 1,
        link_delay: int = 1,
        credit_delay: int = 1,
        deadlock_window: int = 10_000,
        allow_loopback: bool = False,
        trace: bool = False,
    ):
        if flow not in FLOWS:
            raise ValueError(f"unknown flow control {flow!r}")
        if rows < 1 or cols < 1 or hpcmax < 1 or buffer_depth < 1 or router_delay < 0 or link_delay < 1 or credit_delay < 1:
            raise ValueError("invalid NoC parameters")
        self.rows, self.cols = rows, cols
        self.flow = flow
        self.hpcmax = hpcmax if flow == "smart" else 1
        self.depth = buffer_depth
        self.hop_delay = router_delay + link_delay
        self.credit_delay = credit_delay
        # SMART flits finishing a segment at their destination skip its router
        self.eject_bypass = flow == "smart" and self.hpcmax > 1
        self.deadlock_window = deadlock_window
        self.allow_loopback = allow_loopback
        n = rows * cols
        self.cycle = 0
        self._bufs = [deque() for _ in range(n * 5)]
        self._held = [0] * (n * 5)  # slots not yet credited back upstream
        self._credits: dict[int, list[int]] = {}
        self._arrivals: dict[int, list] = {}  # cycle -> [(flit, node)] bypass ejections
        self._owner = [None] * (n * 5)  # (node*5 + out_port) -> packet id
        self._rr = [0] * (n * 5)
        self._srcq = [deque() for _ in range(n)]
        self._active_src: set[int] = set()
        self._ideal: list = []
        self._next_id = 0
        self._in_network = 0  # flits in router buffers
        self._last_progress = 0
        self.packets: list[Packet] = []
        self.stats = NocStats()
        self.received_flits = [0] * n
        self.trace: list | None = [] if trace else None

    # -- injection -----------------------------------------------------------

    def node(self, xy: tuple[int, int]) -> int:
        x, y = xy
        if not (0 <= x < self.cols and 0 <= y < self.rows):
            raise ValueError(f"{xy} is off the {self.cols}x{self.rows} mesh")
        return y * self.cols + x

    def inject(self, src, dst, length: int = 1, cycle: int | None = None, tag=None) -> Packet:
        """Queue a packet at ``src``'s network interface."""
        if length < 1:
            raise ValueError("packet length must be >= 1")
        s, d = self.node(src), self.node(dst)
        if s == d and not self.allow_loopback:
            raise ValueError(f"loopback packet {src}->{dst} not allowed")
        pkt = Packet(self._next_id, tuple(src), tuple(dst), length, self.cycle if cycle is None else cycle, tag)
        self._next_id += 1
        self.packets.append(pkt)
        self.stats.injected_packets += 1
        self.stats.injected_flits += length
        if self.flow == "ideal":
            heapq.heappush(self._ideal, (pkt.inject_cycle + length, pkt.id, pkt))
        else:
            q = self._srcq[s]
            q.extend(Flit(pkt, i) for i in range(length))
            self._active_src.add(s)
        return pkt

    # -- accounting ----------------------------------------------------------

    @property
    def flits_in_flight(self) -> int:
        return self.stats.injected_flits - self.stats.delivered_flits

    @property
    def idle(self) -> bool:
        return self.flits_in_flight == 0

    def _deliver(self, flit: Flit, node: int, t: int):
        pkt = flit.packet
        if flit.seq != pkt.delivered:
            raise NocError(f"out-of-order delivery of {flit}: expected seq {pkt.delivered}")
        pkt.delivered += 1
        if flit.head:
            pkt.head_cycle = t
        self.stats.delivered_flits += 1
        self.received_flits[node] += 1
        if flit.tail:
            pkt.done_cycle = t
            self.stats.delivered_packets += 1
            self.stats.latencies.append(t - pkt.inject_cycle)
        if self.trace is not None:
            self.trace.append((t, f"{pkt.id}.{flit.seq}", node, "eject"))

    def write_trace(self, path) -> None:
        """Dump the recorded trace as CSV (cycle, flit, router, action)."""
        if self.trace is None:
            raise NocError("tracing was not enabled")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("cycle", "flit", "router", "action"))
            w.writerows(self.trace)

    # -- main loop -----------------------------------------------------------

    def step(self) -> None:
        t = self.cycle
        if self.flow == "ideal":
            self._step_ideal(t)
        else:
            self._step_mesh(t)
        self.cycle = t + 1

    def run(self, cycles: int) -> None:
        for _ in range(cycles):
            self.step()

    def run_until_idle(self, max_cycles: int = 1_000_000) -> int:
        start = self.cycle
        while not self.idle:
            if self.cycle - start >= max_cycles:
                raise NocError(f"network not idle after {max_cycles} cycles")
            self.step()
        return self.cycle

    def _step_ideal(self, t: int) -> None:
        heap = self._ideal
        while heap and heap[0][0] <= t:
            _, _, pkt = heapq.heappop(heap)
            n = self.node(pkt.dst)
            pkt.delivered = pkt.length
            pkt.head_cycle = pkt.inject_cycle + 1
            pkt.done_cycle = t
            self.stats.delivered_flits += pkt.length
            self.stats.delivered_packets += 1
            self.received_flits[n] += pkt.length
            self.stats.latencies.append(t - pkt.inject_cycle)

    def _step_mesh(self, t: int) -> None:
        cols = self.cols
        bufs, owner, rr, depth = self._bufs, self._owner, self._rr, self.depth
        ready_at = t + self.hop_delay
        tr = self.trace
        held = self._held
        for idx in self._credits.pop(t, ()):
            held[idx] -= 1
        for f, node in self._arrivals.pop(t, ()):
            self._deliver(f, node, t)

        # network interfaces feed the local input buffer, one flit per cycle
        if self._active_src:
            for s in sorted(self._active_src):
                q = self._srcq[s]
                if q[0].packet.inject_cycle > t:
                    continue
                lb = bufs[s * 5]
                if held[s * 5] < depth:
                    f = q.popleft()
                    f.ready = t
                    lb.append(f)
                    held[s * 5] += 1
                    self._in_network += 1
                    if not q:
                        self._active_src.discard(s)
                else:
                    self.stats.throttled_cycles += 1

        if self._in_network == 0:
            self._last_progress = t
            return

        # local switch allocation: one winner per output port
        winners = []  # (node, in_port, out_port, flit)
        claimed = {}  # node*5+out -> flit
        for node in range(len(self._srcq)):
            base = node * 5
            requests = None
            for port in range(5):
                b = bufs[base + port]
                if not b:
                    continue
                f = b[0]
                if f.ready > t:
                    continue
                x, y = node % cols, node // cols
                if f.dx != x:
                    out = EAST if f.dx > x else WEST
                elif f.dy != y:
                    out = NORTH if f.dy > y else SOUTH
                else:
                    out = LOCAL
                own = owner[base + out]
                if own is not None and own != f.packet.id:
                    continue
                if own is None and not f.head:
                    raise NocError(f"body flit {f} requests unowned port")
                if requests is None:
                    requests = {}
                requests.setdefault(out, []).append(port)
            if not requests:
                continue
            for out, ports in requests.items():
                if len(ports) == 1:
                    win = ports[0]
                else:
                    ptr = rr[base + out]
                    win = min(ports, key=lambda p: (p - ptr) % 5)
                f = bufs[base + win][0]
                winners.append((node, win, out, f))
                claimed[base + out] = f

        moves = []  # (flit, from_buf_index, dest_node, dest_port or LOCAL eject, ports_crossed)
        for node, inp, out, f in winners:
            base = node * 5
            if out == LOCAL:
                moves.append((f, base + inp, node, LOCAL, [base + LOCAL]))
                continue
            sx, sy = _STEP[out]
            x, y = node % cols, node // cols
            if out in (EAST, WEST):
                straight = abs(f.dx - x)
            else:
                straight = abs(f.dy - y)
            m = min(self.hpcmax, straight)
            crossed = [base + out]
            stops = []  # candidate stop nodes in order
            cx, cy = x, y
            for j in range(1, m + 1):
                cx += sx
                cy += sy
                b_node = cy * cols + cx
                stops.append(b_node)
                if j == m:
                    break
                key = b_node * 5 + out
                c = claimed.get(key)
                own = owner[key]
                if (c is not None and c is not f) or (own is not None and own != f.packet.id) or bufs[key]:
                    break
                crossed.append(key)
            last = stops[-1]
            if (
                self.eject_bypass
                and last == f.dy * cols + f.dx
                and len(stops) == m
                and not bufs[last * 5 + out]
                and claimed.get(last * 5 + LOCAL) is None
                and owner[last * 5 + LOCAL] in (None, f.packet.id)
            ):
                crossed.append(last * 5 + LOCAL)
                claimed[last * 5 + LOCAL] = f
                for key in crossed[1:]:
                    claimed[key] = f
                moves.append((f, base + inp, last, -1, crossed))
                continue
            # stop at the furthest reached router with buffer room
            while stops and held[stops[-1] * 5 + out] >= depth:
                stops.pop()
            if not stops:
                continue
            dest = stops[-1]
            n_cross = len(stops)
            crossed = crossed[:n_cross]
            for key in crossed[1:]:
                claimed[key] = f
            moves.append((f, base + inp, dest, out, crossed))

        if not moves:
            if t - self._last_progress > self.deadlock_window:
                raise NocDeadlock(f"no flit progress for {t - self._last_progress} cycles at cycle {t}")
            return
        self._last_progress = t

        credit_at = t + self.credit_delay
        for f, src_idx, dest, port, crossed in moves:
            bufs[src_idx].popleft()
            self._credits.setdefault(credit_at, []).append(src_idx)
            pid = f.packet.id
            for key in crossed:
                if f.head:
                    owner[key] = pid
                if f.tail:
                    owner[key] = None
            rr[crossed[0]] = (src_idx % 5 + 1) % 5
            if tr is not None:
                for key in crossed:
                    tr.append((t, f"{pid}.{f.seq}", key // 5, f"out_{PORT_NAMES[key % 5]}"))
            if port == LOCAL:
                self._in_network -= 1
                self._deliver(f, dest, t)
            elif port == -1:
                self._in_network -= 1
                self._arrivals.setdefault(ready_at, []).append((f, dest))
                self.stats.flit_hops += len(crossed) - 1
            else:
                f.ready = ready_at
                bufs[dest * 5 + port].append(f)
                held[dest * 5 + port] += 1
                self.stats.flit_hops += len(crossed)
                if tr is not None:
                    tr.append((t, f"{pid}.{f.seq}", dest, f"arrive_{PORT_NAMES[port]}_{len(crossed)}hop"))
