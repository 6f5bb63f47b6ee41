"""Experiment driver: scenario assembly, per-trial simulation, metrics and sweeps.

Every trial draws its randomness from independent Philox streams keyed by
(master seed, trial, stream), so trial results do not depend on execution
order or on the number of worker processes.

Stream keys: 0 source (originals and coefficients), 1 first link, 2 second
link, 3 relay recoding.
"""
from __future__ import annotations

import csv
import io
import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .channel import BinarySymmetricChannel, make_rng
from .codec import (CodedPacket, ConfigError, Decoder, Encoder, GenerationConfig,
                    random_originals)
from .galois import field_for
from .recovery import (BrokenVector, DependencyTracker, RecoveryConfig, _relation_broken,
                       recover_group, repair_dependent)
from .relay import RECODE, STORE_AND_FORWARD, Relay, RelayConfig

POINT_TO_POINT = "point-to-point"
TWO_HOP = "two-hop"
DENSE = "dense"
SNC = "snc"
FPRAC = "fprac"
NONE = "none"

# link indices used as RNG stream keys
_SOURCE, _LINK1, _LINK2, _RELAY = 0, 1, 2, 3


@dataclass(frozen=True)
class ScenarioConfig:
    topology: str = POINT_TO_POINT
    mode: str = DENSE
    recovery: str = FPRAC
    g: int = 100
    payload_bytes: int = 700
    s: int = 1
    R: int = 10
    w: int | None = None
    q: int = 8
    epsilon: float = 1e-4
    epsilon2: float | None = None  # second hop; defaults to epsilon
    relay_recovery: bool = True
    data_rate: float = 500_000.0  # bit/s
    trials: int = 10
    master_seed: int = 0
    max_flip_weight: int = 3
    max_transmissions: int | None = None
    measure_wall: bool = False

    def __post_init__(self):
        if self.topology not in (POINT_TO_POINT, TWO_HOP):
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.mode not in (DENSE, SNC):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.recovery not in (FPRAC, NONE):
            raise ConfigError(f"unknown recovery {self.recovery!r}")
        if self.mode == SNC and self.w is None:
            raise ConfigError("SNC mode needs a sparsity w")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.data_rate > 0:
            raise ConfigError("data_rate must be positive")
        if self.payload_bytes < 1 or (self.payload_bytes * 8) % self.q:
            raise ConfigError("payload must be a whole number of symbols")
        for eps in (self.epsilon, self.link2_epsilon):
            if not 0.0 <= eps <= 1.0:
                raise ConfigError(f"epsilon={eps} outside [0, 1]")
        self.generation()  # validates g, l, s, R, w

    @property
    def l(self) -> int:
        return self.payload_bytes * 8 // self.q

    @property
    def link2_epsilon(self) -> float:
        return self.epsilon if self.epsilon2 is None else self.epsilon2

    @property
    def cap(self) -> int:
        return self.max_transmissions or 50 * self.g

    def generation(self) -> GenerationConfig:
        R = self.R if self.recovery == FPRAC else None
        w = self.w if self.mode == SNC else None
        return GenerationConfig(self.g, self.l, self.s, R, field_for(self.q), w)

    def recovery_config(self) -> RecoveryConfig:
        return RecoveryConfig(max_flip_weight=self.max_flip_weight)


@dataclass
class TrialResult:
    total_transmissions: int = 0  # packets put on any link (source + relay)
    source_transmissions: int = 0  # packets sent by the source alone
    corrupted: int = 0
    pending: int = 0  # corrupted packets never processed because decoding finished first
    recovered: int = 0  # partial packets repaired to their true content
    false_recoveries: int = 0  # repairs that passed every CRC but are wrong
    decode_ok: bool = False
    d: np.ndarray | None = None
    model_time: float = 0.0
    wall_time: float = 0.0

    @property
    def add(self) -> float:
        return float(np.mean(self.d))


@dataclass(frozen=True)
class MetricsRow:
    trials: int
    total_transmissions: float
    total_transmissions_std: float
    source_transmissions: float
    corrupted: float
    pending: float
    recovered: float
    false_recoveries: float
    recovery_ratio: float
    add: float
    goodput: float
    completion_time_model: float
    completion_time_wall: float
    decode_success: float
    d_i: tuple = field(default=(), repr=False)


METRIC_COLUMNS = [f.name for f in fields(MetricsRow) if f.name not in ("trials", "d_i")]
PARAM_COLUMNS = [f.name for f in fields(ScenarioConfig)]


# ---------------------------------------------------------------- receivers

def _is_true(packet: CodedPacket, originals: np.ndarray, fs) -> bool:
    """Ground truth: the symbols equal the coefficient row applied to the originals."""
    return np.array_equal(fs.combine(packet.coefficients, originals), packet.symbols)


class _Receiver:
    """Decoder plus bookkeeping shared by both receiver flavours.

    ``originals`` is only used as a ground-truth oracle for counting false
    recoveries; it never influences a decision.
    """

    def __init__(self, gen: GenerationConfig, rcfg: RecoveryConfig, recovery: bool,
                 originals: np.ndarray, measure_wall: bool = False):
        self.gen, self.rcfg, self.recovery = gen, rcfg, recovery
        self.fs, self.crc = gen.field, gen.crc
        self.decoder = Decoder(gen.g, gen.l, gen.field)
        self.originals = originals
        self.d = np.full(gen.g, -1, dtype=np.int64)
        self.corrupted = 0
        self.recovered = 0
        self.false_recoveries = 0
        self.measure_wall = measure_wall
        self.wall = 0.0

    @property
    def complete(self) -> bool:
        return self.decoder.is_complete

    def _absorb(self, packet: CodedPacket, clock: int) -> bool:
        if not self.decoder.add(packet):
            return False
        fresh = self.decoder.decoded_indices()
        for i in fresh:
            if self.d[i] < 0:
                self.d[i] = clock
        return True

    def _count_recovered(self, packet: CodedPacket):
        if _is_true(packet, self.originals, self.fs):
            self.recovered += 1
        else:
            self.false_recoveries += 1

    def receive(self, packet: CodedPacket, clock: int):
        t0 = time.perf_counter() if self.measure_wall else 0.0
        self._receive(packet, clock)
        if self.measure_wall:
            self.wall += time.perf_counter() - t0

    def _receive(self, packet, clock):
        raise NotImplementedError

    def decode_ok(self) -> bool:
        return self.complete and np.array_equal(self.decoder.originals(), self.originals)

    def pending(self) -> int:
        return 0


class GroupReceiver(_Receiver):
    """Collect each dependent group; once complete, repair its partial members.

    With recovery off (or no dependent groups) partial packets are dropped.
    """

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.group: list[CodedPacket] = []
        self.group_id: int | None = None

    def _receive(self, packet, clock):
        ok = packet.outer_ok(self.crc)
        if ok:
            self._absorb(packet, clock)
        else:
            self.corrupted += 1
        if not self.recovery or self.gen.R is None:
            return
        if self.group_id is not None and packet.group_id != self.group_id:
            self._close(clock)
        self.group_id = packet.group_id
        self.group.append(packet)
        if len(self.group) >= self.gen.group_size:
            self._close(clock)

    def pending(self) -> int:
        return sum(1 for p in self.group if not p.outer_ok(self.crc))

    def _close(self, clock):
        group, self.group, self.group_id = self.group, [], None
        if all(p.outer_ok(self.crc) for p in group):
            return
        for p in recover_group(group, None, self.rcfg, self.fs, self.crc):
            self._count_recovered(p)
            self._absorb(p, clock)


class DependencyReceiver(_Receiver):
    """Repair partial packets whenever arrivals close a linear dependency.

    Tracked members are the valid packets that were innovative for the decoder
    plus the partial packets still waiting for repair.  A partial packet whose
    coefficients already lie in the decoded span is rebuilt from the basis.
    """

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.members: dict[int, CodedPacket] = {}
        self.valid_keys: list[int] = []
        self.pending_keys: list[int] = []
        self.tracker = DependencyTracker(self.gen.g, self.fs)
        self.n = 0

    def _receive(self, packet, clock):
        key, self.n = self.n, self.n + 1
        if packet.outer_ok(self.crc):
            if not self._absorb(packet, clock):
                return
            self.members[key] = packet
            self.valid_keys.append(key)
        else:
            self.corrupted += 1
            if not self.recovery:
                return
            coef, sym = self.decoder.reduce(packet.coefficients, np.zeros(self.gen.l, np.uint8))
            if not coef.any():
                self._count_recovered(packet.refreshed(sym, self.crc))
                return
            self.members[key] = packet
            self.pending_keys.append(key)
        rel = self.tracker.add(key, packet.coefficients)
        if rel is not None and self.recovery:
            self._resolve(rel, clock)

    def _resolve(self, rel: dict, clock: int):
        while rel is not None:
            inv = [k for k in self.pending_keys if k in rel]
            if inv:
                sym = lambda k: self.members[k].symbols  # noqa: E731
                broken = (_relation_broken(rel, sym, self.fs) if len(inv) >= 2
                          else BrokenVector())
                out = repair_dependent(self.members, rel, inv, broken, self.rcfg, self.fs, self.crc)
                self.pending_keys = [k for k in self.pending_keys if k not in inv]
                for k in inv:
                    p = out.recovered.get(k)
                    if p is not None:
                        self._count_recovered(p)
                        if self._absorb(p, clock):
                            self.members[k] = p
                            self.valid_keys.append(k)
                            continue
                    del self.members[k]
            rel = self._rebuild()

    def pending(self) -> int:
        return len(self.pending_keys)

    def _rebuild(self) -> dict | None:
        self.tracker = DependencyTracker(self.gen.g, self.fs)
        for k in self.valid_keys:
            self.tracker.add(k, self.members[k].coefficients)
        for k in self.pending_keys:
            rel = self.tracker.add(k, self.members[k].coefficients)
            if rel is not None:
                return rel
        return None


# ------------------------------------------------------------------- trials

def _receiver_for(sc: ScenarioConfig, gen: GenerationConfig, originals, dependency: bool):
    cls = DependencyReceiver if dependency else GroupReceiver
    return cls(gen, sc.recovery_config(), sc.recovery == FPRAC, originals, sc.measure_wall)


def _finish(sc: ScenarioConfig, rx: _Receiver, sent: int, link: int) -> TrialResult:
    gen = sc.generation()
    d = rx.d.copy()
    d[d < 0] = link
    return TrialResult(
        total_transmissions=link, source_transmissions=sent,
        corrupted=rx.corrupted, pending=rx.pending(), recovered=rx.recovered,
        false_recoveries=rx.false_recoveries, decode_ok=rx.decode_ok(), d=d,
        model_time=link * gen.layout.total_bits / sc.data_rate, wall_time=rx.wall)


def trial_point_to_point(sc: ScenarioConfig, trial: int) -> TrialResult:
    gen = sc.generation()
    src = make_rng(sc.master_seed, trial, _SOURCE)
    originals = random_originals(gen, src)
    ch = BinarySymmetricChannel(sc.epsilon, make_rng(sc.master_seed, trial, _LINK1))
    rx = _receiver_for(sc, gen, originals, dependency=sc.mode == SNC)
    sent = 0
    for pkt in Encoder(originals, gen, src):
        sent += 1
        rx.receive(ch.send(pkt, gen.layout), sent)
        if rx.complete or sent >= sc.cap:
            break
    return _finish(sc, rx, sent, sent)


def trial_two_hop(sc: ScenarioConfig, trial: int) -> TrialResult:
    gen = sc.generation()
    src = make_rng(sc.master_seed, trial, _SOURCE)
    originals = random_originals(gen, src)
    ch1 = BinarySymmetricChannel(sc.epsilon, make_rng(sc.master_seed, trial, _LINK1))
    ch2 = BinarySymmetricChannel(sc.link2_epsilon, make_rng(sc.master_seed, trial, _LINK2))
    on = sc.relay_recovery and sc.recovery == FPRAC
    relay = Relay(gen, RelayConfig(recovery_enabled=on,
                                   forward_policy=RECODE if on else STORE_AND_FORWARD,
                                   recovery=sc.recovery_config()),
                  make_rng(sc.master_seed, trial, _RELAY))
    rx = _receiver_for(sc, gen, originals, dependency=True)
    relay_tally = [0, 0]  # correct, false

    def check(p):
        relay_tally[0 if _is_true(p, originals, gen.field) else 1] += 1

    relay.on_recovered = check
    sent = relayed = 0
    for pkt in Encoder(originals, gen, src):
        sent += 1
        for out in relay.on_receive(ch1.send(pkt, gen.layout)):
            relayed += 1
            rx.receive(ch2.send(out, gen.layout), sent + relayed)
            if rx.complete:
                break
        if rx.complete or sent >= sc.cap:
            break
    res = _finish(sc, rx, sent, sent + relayed)
    if on:
        res.corrupted += relay.stats.corrupted
        res.pending += len(relay.buffers.invalid)
        res.recovered += relay_tally[0]
        res.false_recoveries += relay_tally[1]
    return res


def run_trial(sc: ScenarioConfig, trial: int) -> TrialResult:
    if sc.topology == TWO_HOP:
        return trial_two_hop(sc, trial)
    return trial_point_to_point(sc, trial)


def _run_one(args):
    sc, trial = args
    return run_trial(sc, trial)


def run_trials(sc: ScenarioConfig, workers: int = 1) -> list[TrialResult]:
    """All trials of a scenario, in trial-index order."""
    jobs = [(sc, t) for t in range(sc.trials)]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def summarize(sc: ScenarioConfig, results: list[TrialResult]) -> MetricsRow:
    tot = np.array([r.total_transmissions for r in results], dtype=float)
    corrupted = sum(r.corrupted for r in results)
    attempted = corrupted - sum(r.pending for r in results)
    recovered = sum(r.recovered for r in results)
    model = np.mean([r.model_time for r in results])
    wall = np.mean([r.wall_time for r in results])
    payload_bits = sc.g * sc.l * sc.q
    return MetricsRow(
        trials=len(results),
        total_transmissions=float(tot.mean()),
        total_transmissions_std=float(tot.std(ddof=1)) if len(tot) > 1 else 0.0,
        source_transmissions=float(np.mean([r.source_transmissions for r in results])),
        corrupted=corrupted / len(results),
        pending=float(np.mean([r.pending for r in results])),
        recovered=recovered / len(results),
        false_recoveries=float(np.mean([r.false_recoveries for r in results])),
        recovery_ratio=recovered / attempted if attempted else 0.0,
        add=float(np.mean([r.add for r in results])),
        goodput=float(payload_bits / (model + wall)),
        completion_time_model=float(model),
        completion_time_wall=float(wall),
        decode_success=float(np.mean([r.decode_ok for r in results])),
        d_i=tuple(np.mean([r.d for r in results], axis=0).tolist()),
    )


def run_point_to_point(sc: ScenarioConfig, workers: int = 1) -> MetricsRow:
    if sc.topology != POINT_TO_POINT:
        raise ConfigError("run_point_to_point needs the point-to-point topology")
    return summarize(sc, run_trials(sc, workers))


def run_two_hop(sc: ScenarioConfig, workers: int = 1) -> MetricsRow:
    if sc.topology != TWO_HOP:
        raise ConfigError("run_two_hop needs the two-hop topology")
    return summarize(sc, run_trials(sc, workers))


def run_snc(sc: ScenarioConfig, workers: int = 1) -> MetricsRow:
    if sc.mode != SNC:
        raise ConfigError("run_snc needs mode='snc' with a sparsity w")
    return summarize(sc, run_trials(sc, workers))


def run(sc: ScenarioConfig, workers: int = 1) -> MetricsRow:
    return summarize(sc, run_trials(sc, workers))


# ------------------------------------------------------------------- sweeps

def cell_seed(master_seed: int, index: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint32)[0])


def grid_cells(base: ScenarioConfig, grid: dict[str, list]) -> list[ScenarioConfig]:
    """Cartesian product in key order (last key varies fastest), seeded per cell."""
    unknown = set(grid) - set(PARAM_COLUMNS)
    if unknown:
        raise ConfigError(f"unknown grid parameters {sorted(unknown)}")
    if not grid or any(len(v) == 0 for v in grid.values()):
        return []
    keys = list(grid)
    cells = []
    for i, combo in enumerate(itertools.product(*(grid[k] for k in keys))):
        cells.append(replace(base, **dict(zip(keys, combo)),
                             master_seed=cell_seed(base.master_seed, i)))
    return cells


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


def row_dict(sc: ScenarioConfig, m: MetricsRow) -> dict:
    out = {k: _fmt(v) for k, v in asdict(sc).items()}
    out.update({k: _fmt(getattr(m, k)) for k in METRIC_COLUMNS})
    return out


def write_rows(rows, stream) -> None:
    w = csv.DictWriter(stream, fieldnames=PARAM_COLUMNS + METRIC_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)


def sweep(base: ScenarioConfig, grid: dict[str, list], stream=None, workers: int = 1) -> str:
    """Run every grid cell and emit one CSV row per cell; returns the CSV text."""
    buf = io.StringIO()
    rows = [row_dict(sc, run(sc, workers)) for sc in grid_cells(base, grid)]
    write_rows(rows, buf)
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text
