"""Discrete-event simulation of the windowed request/response swarm.

Topology: each peer owns an uplink and a downlink FIFO served at a fixed
bit rate; the core between them adds a fixed delay of tp/2 per direction
and never congests. A request crosses the requester's uplink and the
responder's downlink; the data reply crosses the responder's uplink and
the requester's downlink, so one round trip visits four queues plus tp.

Request packets are tiny: they add no load to a link (the server timeline
never advances for them), but they experience the latency a data packet
would have seen there, i.e. the backlog present on arrival plus one
data-sized transmission time. That keeps every queue loaded only by data
traffic while all four stages obey the same delay law.

Protocol per thread: compose a request with a fresh node-wide sequence
number, pick a destination uniformly among the other peers, enqueue it,
arm a timer, and wait. A matching data packet is delivered upward and the
thread immediately starts the next request; a non-matching (stale) data
packet is dropped after having consumed downlink bandwidth and the thread
keeps waiting; a timer expiry abandons the request and composes a brand
new one (new id, new destination) on the spot.

Determinism: all randomness comes from per-peer streams derived from
(seed, label); events pop in (time, insertion-sequence) order; identical
configs produce bit-identical reports.
"""

from __future__ import annotations

import dataclasses
import heapq
import math
from dataclasses import dataclass
from typing import TextIO

from .errors import ParameterError
from .stats import RngStream, derive_stream

KIND_REQUEST = "request"
KIND_DATA = "data"

PHASE_IDLE = "idle"
PHASE_WAITING = "waiting"

DELIVER = "deliver"
DROP_STALE = "drop_stale"

EV_THREAD_START = "ThreadStart"
EV_UPLINK_DONE = "UplinkServiceDone"
EV_CORE_ARRIVAL = "CoreArrival"
EV_DOWNLINK_DONE = "DownlinkServiceDone"
EV_TIMER_FIRED = "TimerFired"

# Internal heap tags; the tuple layout is (time, seq, tag, payload...).
_H_START = 0
_H_CORE = 1
_H_DOWN = 2
_H_TIMER = 3


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one simulation experiment."""

    n_peers: int
    threads_per_peer: int
    uplink_bps: float = 512_000.0
    downlink_bps: float = 512_000.0
    mean_data_bytes: float = 1000.0
    tp: float = 0.6
    tout: float = math.inf
    sim_duration: float = 100.0
    warmup: float = 10.0
    seed: int = 1
    resample_size_per_link: bool = False
    thread_overrides: tuple[int, ...] | None = None
    fixed_size_bytes: float | None = None  # test hook: every size draw returns this

    def validate(self) -> None:
        if self.n_peers < 2:
            raise ParameterError(f"n_peers must be >= 2, got {self.n_peers}")
        if self.threads_per_peer < 0:
            raise ParameterError("threads_per_peer must be >= 0")
        if not (self.uplink_bps > 0 and self.downlink_bps > 0):
            raise ParameterError("link rates must be > 0")
        if not self.mean_data_bytes > 0:
            raise ParameterError("mean_data_bytes must be > 0")
        if self.tp < 0:
            raise ParameterError("tp must be >= 0")
        if not self.tout > 0:
            raise ParameterError("tout must be > 0")
        if not 0 <= self.warmup < self.sim_duration:
            raise ParameterError("need sim_duration > warmup >= 0")
        if self.thread_overrides is not None:
            if len(self.thread_overrides) != self.n_peers:
                raise ParameterError("thread_overrides must list one count per peer")
            if any(t < 0 for t in self.thread_overrides):
                raise ParameterError("thread_overrides must be >= 0")
        if self.fixed_size_bytes is not None and not self.fixed_size_bytes > 0:
            raise ParameterError("fixed_size_bytes must be > 0")

    def threads_of(self, peer: int) -> int:
        if self.thread_overrides is not None:
            return self.thread_overrides[peer]
        return self.threads_per_peer


@dataclass(slots=True)
class Packet:
    """Wire unit; requests carry size_bits = 0, their load is negligible."""

    kind: str
    request_id: int
    data_id: int
    src: int
    dst: int
    size_bits: float
    issued_at: float
    thread: int  # index of the issuing thread, carried for tracing


@dataclass(slots=True)
class ThreadState:
    """One stop-wait request thread."""

    owner: int
    index: int
    current_request_id: int = -1
    phase: str = PHASE_IDLE
    request_sent_at: float = 0.0
    timer_deadline: float | None = None


@dataclass(frozen=True)
class Event:
    """Trace record; the queue pops in (time, sequence) order."""

    time: float
    sequence: int
    kind: str
    payload: Packet | ThreadState


@dataclass(frozen=True)
class SimReport:
    """Counters and measured statistics from one run.

    Counters attribute each request to the window of its emission time, so
    requests_sent == data_ontime + timeouts + pending_at_end holds exactly.
    gamma_raw and the utilizations measure bandwidth actually moved inside
    the window, whatever the emission time.
    """

    requests_sent: int
    data_ontime: int
    data_late_dropped: int
    timeouts: int
    pending_at_end: int
    rtt_mean: float
    rtt_min: float
    rtt_max: float
    rtt_samples: int
    p_timeout_empirical: float
    gamma_good: float
    gamma_raw: float
    uplink_utilization: float
    downlink_utilization: float


def select_destination(self_index: int, n: int, stream: RngStream) -> int:
    """Uniform over the n - 1 peers other than self_index."""
    if n < 2:
        raise ParameterError(f"need at least 2 peers, got {n}")
    j = stream.randrange(n - 1)
    return j if j < self_index else j + 1


def service_time(pkt: Packet, link_bps: float) -> float:
    """Transmission time on a link; requests add no service load."""
    if not link_bps > 0:
        raise ParameterError(f"link_bps must be > 0, got {link_bps}")
    if pkt.kind == KIND_DATA:
        return pkt.size_bits / link_bps
    return 0.0


def on_data_arrival(thread: ThreadState, pkt: Packet, now: float) -> str:
    """Deliver iff the thread still waits on exactly this request; else stale."""
    if thread.phase == PHASE_WAITING and pkt.request_id == thread.current_request_id:
        return DELIVER
    return DROP_STALE


class Simulation:
    """One deterministic run; construct, call run(), read the report."""

    def __init__(self, cfg: ScenarioConfig, collect_trace: bool = False):
        cfg.validate()
        self.cfg = cfg
        n = cfg.n_peers
        self._mean_bits = cfg.mean_data_bytes * 8.0
        self._fixed_bits = (
            None if cfg.fixed_size_bytes is None else cfg.fixed_size_bytes * 8.0
        )
        self._up_busy = [0.0] * n
        self._down_busy = [0.0] * n
        self._up_work = 0.0  # data service time inside the window, all uplinks
        self._down_work = 0.0
        self._next_rid = [0] * n
        self._next_did = [0] * n
        self._outstanding: list[dict[int, tuple[ThreadState, float]]] = [
            {} for _ in range(n)
        ]
        self._dest = [derive_stream(cfg.seed, f"dest-{i}") for i in range(n)]
        self._size = [derive_stream(cfg.seed, f"size-{i}") for i in range(n)]
        self._phantom = [derive_stream(cfg.seed, f"phantom-{i}") for i in range(n)]
        self.threads: list[ThreadState] = []
        for p in range(n):
            for _ in range(cfg.threads_of(p)):
                self.threads.append(ThreadState(owner=p, index=len(self.threads)))
        self._heap: list[tuple] = []
        self._seq = 0
        self._trace: list[Event] | None = [] if collect_trace else None
        self.now = 0.0
        self.requests_sent = 0
        self.data_ontime = 0
        self.data_late_dropped = 0
        self.timeouts = 0
        self._rtt_sum = 0.0
        self._rtt_n = 0
        self._rtt_min = math.inf
        self._rtt_max = -math.inf
        self._good_bits = 0.0
        self._raw_bits = 0.0

    # -- randomness -------------------------------------------------------

    def _draw_bits(self, stream: RngStream) -> float:
        if self._fixed_bits is not None:
            return self._fixed_bits
        return stream.exponential(self._mean_bits)

    # -- protocol actions -------------------------------------------------

    def _record(self, time: float, kind: str, payload) -> None:
        if self._trace is not None:
            if isinstance(payload, ThreadState):
                # Threads mutate as the run continues; freeze what was seen.
                payload = dataclasses.replace(payload)
            self._trace.append(Event(time, self._seq, kind, payload))

    def _push(self, entry: tuple) -> None:
        heapq.heappush(self._heap, entry)
        self._seq += 1

    def _compose(self, thread: ThreadState, now: float) -> Packet:
        """Emit a fresh request for this thread: new id, new destination."""
        cfg = self.cfg
        p = thread.owner
        rid = self._next_rid[p]
        self._next_rid[p] = rid + 1
        did = self._next_did[p]
        self._next_did[p] = did + 1
        dst = select_destination(p, cfg.n_peers, self._dest[p])
        pkt = Packet(KIND_REQUEST, rid, did, p, dst, 0.0, now, thread.index)
        self._outstanding[p][rid] = (thread, now)
        thread.current_request_id = rid
        thread.phase = PHASE_WAITING
        thread.request_sent_at = now
        if now >= cfg.warmup:
            self.requests_sent += 1
        phantom = self._draw_bits(self._phantom[p])
        depart = max(now, self._up_busy[p]) + phantom / cfg.uplink_bps
        self._record(depart, EV_UPLINK_DONE, pkt)
        self._push((depart + cfg.tp * 0.5, self._seq, _H_CORE, pkt, phantom))
        if math.isfinite(cfg.tout):
            thread.timer_deadline = now + cfg.tout
            if thread.timer_deadline <= cfg.sim_duration:
                self._push((thread.timer_deadline, self._seq, _H_TIMER, thread, rid))
        else:
            thread.timer_deadline = None
        return pkt

    def on_timer_fired(self, thread: ThreadState, now: float) -> Packet:
        """Abandon the outstanding request and start a brand-new one."""
        if thread.request_sent_at >= self.cfg.warmup:
            self.timeouts += 1
        thread.phase = PHASE_IDLE
        return self._compose(thread, now)

    # -- event loop --------------------------------------------------------

    def run(self) -> SimReport:
        cfg = self.cfg
        for thread in self.threads:
            self._push((0.0, self._seq, _H_START, thread))

        heap = self._heap
        pop = heapq.heappop
        duration = cfg.sim_duration
        warmup = cfg.warmup
        up_bps = cfg.uplink_bps
        down_bps = cfg.downlink_bps
        half_tp = cfg.tp * 0.5
        resample = cfg.resample_size_per_link
        up_busy = self._up_busy
        down_busy = self._down_busy
        outstanding = self._outstanding
        compose = self._compose

        while heap:
            entry = pop(heap)
            t = entry[0]
            if t > duration:
                break
            self.now = t
            tag = entry[2]

            if tag == _H_CORE:
                pkt = entry[3]
                bits = entry[4]
                self._record(t, EV_CORE_ARRIVAL, pkt)
                q = pkt.dst
                if pkt.kind == KIND_DATA:
                    if resample:
                        bits = self._draw_bits(self._size[q])
                    start = max(t, down_busy[q])
                    depart = start + bits / down_bps
                    down_busy[q] = depart
                    self._down_work += max(
                        0.0, min(depart, duration) - max(start, warmup)
                    )
                else:
                    if resample:
                        bits = self._draw_bits(self._phantom[q])
                    depart = max(t, down_busy[q]) + bits / down_bps
                self._push((depart, self._seq, _H_DOWN, pkt, bits))

            elif tag == _H_DOWN:
                pkt = entry[3]
                bits = entry[4]
                self._record(t, EV_DOWNLINK_DONE, pkt)
                if pkt.kind == KIND_REQUEST:
                    # The responder always answers with a data packet.
                    p = pkt.dst
                    size = self._draw_bits(self._size[p])
                    data = Packet(
                        KIND_DATA, pkt.request_id, pkt.data_id,
                        p, pkt.src, size, t, pkt.thread,
                    )
                    start = max(t, up_busy[p])
                    depart = start + size / up_bps
                    up_busy[p] = depart
                    self._up_work += max(
                        0.0, min(depart, duration) - max(start, warmup)
                    )
                    self._record(depart, EV_UPLINK_DONE, data)
                    self._push((depart + half_tp, self._seq, _H_CORE, data, size))
                else:
                    if t >= warmup:
                        self._raw_bits += bits
                    thread, emitted = outstanding[pkt.dst].pop(pkt.request_id)
                    if on_data_arrival(thread, pkt, t) == DELIVER:
                        if emitted >= warmup:
                            self.data_ontime += 1
                            self._good_bits += bits
                            rtt = t - emitted
                            self._rtt_sum += rtt
                            self._rtt_n += 1
                            if rtt < self._rtt_min:
                                self._rtt_min = rtt
                            if rtt > self._rtt_max:
                                self._rtt_max = rtt
                        thread.phase = PHASE_IDLE
                        compose(thread, t)
                    elif emitted >= warmup:
                        self.data_late_dropped += 1

            elif tag == _H_TIMER:
                thread = entry[3]
                if thread.phase == PHASE_WAITING and thread.current_request_id == entry[4]:
                    self._record(t, EV_TIMER_FIRED, thread)
                    self.on_timer_fired(thread, t)

            else:  # _H_START
                thread = entry[3]
                compose(thread, t)
                # Recorded after composing so the snapshot carries the first id.
                self._record(t, EV_THREAD_START, thread)

        return self._report()

    # -- reporting ----------------------------------------------------------

    def _report(self) -> SimReport:
        cfg = self.cfg
        pending = sum(
            1
            for th in self.threads
            if th.phase == PHASE_WAITING and th.request_sent_at >= cfg.warmup
        )
        window = cfg.sim_duration - cfg.warmup
        n = cfg.n_peers
        resolved = self.timeouts + self.data_ontime
        has_rtt = self._rtt_n > 0
        return SimReport(
            requests_sent=self.requests_sent,
            data_ontime=self.data_ontime,
            data_late_dropped=self.data_late_dropped,
            timeouts=self.timeouts,
            pending_at_end=pending,
            rtt_mean=self._rtt_sum / self._rtt_n if has_rtt else math.nan,
            rtt_min=self._rtt_min if has_rtt else math.nan,
            rtt_max=self._rtt_max if has_rtt else math.nan,
            rtt_samples=self._rtt_n,
            p_timeout_empirical=self.timeouts / resolved if resolved else 0.0,
            gamma_good=self._good_bits / (window * n * cfg.downlink_bps),
            gamma_raw=self._raw_bits / (window * n * cfg.downlink_bps),
            uplink_utilization=self._up_work / (window * n),
            downlink_utilization=self._down_work / (window * n),
        )

    def trace_events(self) -> list[Event]:
        """Collected trace, ordered by (time, sequence)."""
        if self._trace is None:
            raise ParameterError("trace collection was not enabled for this run")
        return sorted(self._trace, key=lambda e: (e.time, e.sequence))


def _trace_line(ev: Event) -> str:
    pl = ev.payload
    if isinstance(pl, ThreadState):
        peer, thread, rid = pl.owner, pl.index, pl.current_request_id
    elif ev.kind == EV_DOWNLINK_DONE or ev.kind == EV_CORE_ARRIVAL:
        peer, thread, rid = pl.dst, pl.thread, pl.request_id
    else:
        peer, thread, rid = pl.src, pl.thread, pl.request_id
    return f"{ev.time:.9f} {ev.kind} peer={peer} thread={thread} rid={rid}"


def write_trace(events: list[Event], out: TextIO) -> None:
    """Line-delimited trace: time, event kind, peer, thread, request id."""
    for ev in events:
        out.write(_trace_line(ev) + "\n")


def run_simulation(cfg: ScenarioConfig, trace_file: str | None = None) -> SimReport:
    """Run one scenario; optionally dump the event trace to a file."""
    sim = Simulation(cfg, collect_trace=trace_file is not None)
    report = sim.run()
    if trace_file is not None:
        with open(trace_file, "w") as fh:
            write_trace(sim.trace_events(), fh)
    return report
