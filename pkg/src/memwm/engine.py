"""Deterministic clocked simulation kernel, dt = 1 ms.

Networks hold LIF populations, Bernoulli-driven input populations, and edge
groups that are either static (fixed weight) or volatile (one two-state
device per edge; the delivered weight follows the device state). Spikes are
delivered with a one-step delay. Each run draws its randomness from named
streams (inputs, membrane noise, devices) spawned from the run seed, so a
(network, protocol, seed) triple reproduces the same raster bit for bit, and
independently seeded runs can execute concurrently without shared state.

Per step: (1) spikes emitted on the previous step are delivered, updating
volatile devices on the way (a pulse that switches a device transmits the new
weight); (2) network neurons integrate; (3) input neurons draw Bernoulli
spikes at min(rate * dt, 1); (4) all spikes are recorded and queued for the
next step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .device import DeviceArray, DeviceParams
from .neuron import LifParams, LifPopulation

__all__ = [
    "DT_MS",
    "PopulationSpec",
    "InputSpec",
    "ConnectionSpec",
    "NetworkSpec",
    "Phase",
    "Protocol",
    "SpikeRaster",
    "TraceLog",
    "NetworkBuilder",
    "Network",
    "instantiate",
    "run",
    "firing_rate",
]

DT_MS = 1.0


@dataclass(frozen=True)
class PopulationSpec:
    name: str
    size: int
    lif: LifParams

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError(f"population size must be >= 1, got {self.size}")


@dataclass(frozen=True)
class InputSpec:
    name: str
    size: int
    base_rate_hz: float

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError(f"input size must be >= 1, got {self.size}")
        if self.base_rate_hz < 0:
            raise ValueError(f"rate must be >= 0, got {self.base_rate_hz}")


@dataclass(frozen=True)
class ConnectionSpec:
    """Random connectivity from one (input or network) population to another.

    Every ordered source-target pair is realized independently with
    ``probability``; self-connections are excluded when source and target
    name the same population. ``device`` makes the edges volatile, with the
    conducting-state weight equal to ``weight``.
    """

    source: str
    target: str
    probability: float
    weight: float
    device: DeviceParams | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability must be in [0, 1], got {self.probability}")


@dataclass(frozen=True)
class NetworkSpec:
    populations: tuple[PopulationSpec, ...]
    inputs: tuple[InputSpec, ...] = ()
    connections: tuple[ConnectionSpec, ...] = ()

    def __post_init__(self) -> None:
        names = [p.name for p in self.populations] + [i.name for i in self.inputs]
        if len(set(names)) != len(names):
            raise ValueError("population/input names must be unique")
        pop_names = {p.name for p in self.populations}
        for c in self.connections:
            if c.source not in names:
                raise ValueError(f"unknown connection source {c.source!r}")
            if c.target not in pop_names:
                raise ValueError(f"connection target must be a population, got {c.target!r}")


@dataclass(frozen=True)
class Phase:
    """One protocol phase: a label plus per-input rate multipliers."""

    label: str
    duration_ms: int
    rate_multipliers: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.duration_ms <= 0:
            raise ValueError(f"phase duration must be > 0, got {self.duration_ms}")
        for name, m in self.rate_multipliers.items():
            if m < 0:
                raise ValueError(f"negative rate multiplier for {name!r}")


@dataclass(frozen=True)
class Protocol:
    phases: tuple[Phase, ...]

    @property
    def total_ms(self) -> int:
        return sum(p.duration_ms for p in self.phases)

    def windows(self) -> list[tuple[str, int, int]]:
        """(label, start_ms, end_ms) for each phase."""
        out, t = [], 0
        for p in self.phases:
            out.append((p.label, t, t + p.duration_ms))
            t += p.duration_ms
        return out


@dataclass(frozen=True)
class SpikeRaster:
    """Recorded spikes, ordered by time then neuron id."""

    times: np.ndarray
    ids: np.ndarray

    def __len__(self) -> int:
        return self.times.shape[0]

    def in_window(self, t0: float, t1: float) -> "SpikeRaster":
        m = (self.times >= t0) & (self.times < t1)
        return SpikeRaster(self.times[m], self.ids[m])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_ms", "neuron_id"])
            for t, i in zip(self.times, self.ids):
                w.writerow([int(t), int(i)])


class TraceLog:
    """Per-step analog channels recorded as (time, channel, value) rows."""

    def __init__(self) -> None:
        self.records: list[tuple[int, str, float]] = []

    def record(self, t: int, channel: str, value: float) -> None:
        self.records.append((t, channel, float(value)))

    def values(self, channel: str) -> list[tuple[int, float]]:
        return [(t, v) for t, c, v in self.records if c == channel]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_ms", "channel", "value"])
            for t, c, v in self.records:
                w.writerow([t, c, repr(v)])


class _EdgeGroup:
    """Edges of one connection, CSR-indexed by global source id."""

    def __init__(
        self,
        name: str,
        src: np.ndarray,
        tgt: np.ndarray,
        weight: float,
        device_params: DeviceParams | None,
        n_total: int,
    ):
        order = np.argsort(src, kind="stable")
        self.name = name
        self.src = src[order]
        self.tgt = tgt[order]
        self.weight = weight
        counts = np.bincount(self.src, minlength=n_total)
        self.indptr = np.concatenate(([0], np.cumsum(counts)))
        if device_params is not None:
            dev = DeviceParams(
                mu_ret=device_params.mu_ret,
                sigma_ret=device_params.sigma_ret,
                rho=device_params.rho,
                r_on=weight,
                r_off_ratio=device_params.r_off_ratio,
            )
            self.devices: DeviceArray | None = DeviceArray(len(self.src), dev)
        else:
            self.devices = None

    def __len__(self) -> int:
        return len(self.src)

    def out_edges(self, spikers: np.ndarray) -> np.ndarray:
        """Indices of all edges whose source is in ``spikers`` (sorted ids)."""
        starts = self.indptr[spikers]
        ends = self.indptr[spikers + 1]
        lens = ends - starts
        total = int(lens.sum())
        if total == 0:
            return np.empty(0, dtype=np.int64)
        # ragged gather: concatenate [starts[i], ends[i]) ranges
        rep_starts = np.repeat(starts, lens)
        offsets = np.arange(total) - np.repeat(np.cumsum(lens) - lens, lens)
        return rep_starts + offsets


class Network:
    """A built network: id layout, populations, inputs and edge groups.

    Network neurons occupy ids [0, n_network); input neurons follow. Each
    ``run`` resets membranes to rest and devices to OFF before stepping, so
    runs are independent and fully determined by (protocol, seed).
    """

    def __init__(self) -> None:
        self.pop_ranges: dict[str, tuple[int, int]] = {}
        self.pops: list[tuple[str, int, int, LifPopulation]] = []
        self.input_ranges: dict[str, tuple[int, int]] = {}
        self.inputs: list[tuple[str, int, int, float]] = []
        self.groups: list[_EdgeGroup] = []
        self.n_network = 0
        self.n_total = 0

    def members(self, name: str) -> np.ndarray:
        lo, hi = (
            self.pop_ranges[name] if name in self.pop_ranges else self.input_ranges[name]
        )
        return np.arange(lo, hi)

    def group(self, name: str) -> _EdgeGroup:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)

    def _reset(self) -> None:
        for _, _, _, pop in self.pops:
            pop.u[:] = pop.params.u_rest
            pop.refrac_until[:] = -np.inf
        for g in self.groups:
            if g.devices is not None:
                g.devices.on[:] = False
                g.devices.expires_at[:] = 0.0

    def run(
        self,
        protocol: Protocol,
        seed: int,
        trace_channels: tuple[str, ...] = (),
    ) -> tuple[SpikeRaster, TraceLog]:
        """Simulate the whole protocol; returns the spike raster and traces.

        Trace channels: ``device_on:<connection>`` records the live ON count
        of a volatile connection, ``spikes:<population>`` the per-step spike
        count of a population or input.
        """
        self._reset()
        ss = np.random.SeedSequence(seed)
        rng_inputs, rng_noise, rng_devices = map(np.random.default_rng, ss.spawn(3))

        total = protocol.total_ms
        phase_starts = np.array([w[1] for w in protocol.windows()])
        phases = list(protocol.phases)

        spiked_prev = np.zeros(self.n_total, dtype=bool)
        rast_t: list[np.ndarray] = []
        rast_i: list[np.ndarray] = []
        trace = TraceLog()

        for t in range(total):
            phase = phases[int(np.searchsorted(phase_starts, t, side="right")) - 1]

            # deliver last step's spikes
            i_acc = np.zeros(self.n_network)
            spikers = np.flatnonzero(spiked_prev)
            if spikers.size:
                for g in self.groups:
                    eidx = g.out_edges(spikers)
                    if eidx.size == 0:
                        continue
                    if g.devices is None:
                        i_acc += np.bincount(
                            g.tgt[eidx], minlength=self.n_network
                        ) * g.weight
                    else:
                        g.devices.stimulate(eidx, float(t), rng_devices)
                        w = g.devices.weights(eidx)
                        i_acc += np.bincount(
                            g.tgt[eidx], weights=w, minlength=self.n_network
                        )

            spiked = np.zeros(self.n_total, dtype=bool)
            for _, lo, hi, pop in self.pops:
                spiked[lo:hi] = pop.step(i_acc[lo:hi], float(t), DT_MS, rng_noise)
            for name, lo, hi, base_rate in self.inputs:
                rate = base_rate * phase.rate_multipliers.get(name, 1.0)
                p = min(rate * DT_MS * 1e-3, 1.0)
                spiked[lo:hi] = rng_inputs.random(hi - lo) < p

            ids = np.flatnonzero(spiked)
            if ids.size:
                rast_t.append(np.full(ids.size, t, dtype=np.int64))
                rast_i.append(ids)
            for ch in trace_channels:
                kind, _, target = ch.partition(":")
                if kind == "device_on":
                    dev = self.group(target).devices
                    if dev is not None:
                        trace.record(t, ch, int(dev.on_now(float(t)).sum()))
                elif kind == "spikes":
                    lo, hi = (
                        self.pop_ranges.get(target) or self.input_ranges[target]
                    )
                    trace.record(t, ch, int(spiked[lo:hi].sum()))
            spiked_prev = spiked

        if rast_t:
            raster = SpikeRaster(np.concatenate(rast_t), np.concatenate(rast_i))
        else:
            raster = SpikeRaster(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
        return raster, trace


class NetworkBuilder:
    """Assembles a Network: populations first, then inputs, then edges."""

    def __init__(self) -> None:
        self.net = Network()
        self._edges: list[tuple[str, np.ndarray, np.ndarray, float, DeviceParams | None]] = []

    def add_population(self, name: str, size: int, lif: LifParams) -> np.ndarray:
        if self.net.inputs:
            raise ValueError("add all populations before inputs")
        lo = self.net.n_network
        hi = lo + size
        self.net.pop_ranges[name] = (lo, hi)
        self.net.pops.append((name, lo, hi, LifPopulation(size, lif)))
        self.net.n_network = hi
        self.net.n_total = hi
        return np.arange(lo, hi)

    def add_input(self, name: str, size: int, base_rate_hz: float) -> np.ndarray:
        lo = self.net.n_total
        hi = lo + size
        self.net.input_ranges[name] = (lo, hi)
        self.net.inputs.append((name, lo, hi, base_rate_hz))
        self.net.n_total = hi
        return np.arange(lo, hi)

    def add_edges(
        self,
        name: str,
        src: np.ndarray,
        tgt: np.ndarray,
        weight: float,
        device_params: DeviceParams | None = None,
    ) -> None:
        src = np.asarray(src, dtype=np.int64)
        tgt = np.asarray(tgt, dtype=np.int64)
        if src.shape != tgt.shape:
            raise ValueError("src and tgt must have equal length")
        if src.size and (src.min() < 0 or src.max() >= self.net.n_total):
            raise ValueError("edge source id out of range")
        if tgt.size and (tgt.min() < 0 or tgt.max() >= self.net.n_network):
            raise ValueError("edge targets must be network neurons")
        self._edges.append((name, src, tgt, weight, device_params))

    def build(self) -> Network:
        for name, src, tgt, w, dev in self._edges:
            self.net.groups.append(_EdgeGroup(name, src, tgt, w, dev, self.net.n_total))
        return self.net


def _sample_edges(
    rng: np.random.Generator,
    src_ids: np.ndarray,
    tgt_ids: np.ndarray,
    probability: float,
    exclude_self: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Bernoulli realization of every ordered (src, tgt) pair."""
    ns, nt = src_ids.size, tgt_ids.size
    srcs: list[np.ndarray] = []
    tgts: list[np.ndarray] = []
    chunk = max(1, 2_000_000 // max(nt, 1))
    for i0 in range(0, ns, chunk):
        i1 = min(i0 + chunk, ns)
        mask = rng.random((i1 - i0, nt)) < probability
        if exclude_self:
            cols = np.searchsorted(tgt_ids, src_ids[i0:i1])
            rows = np.arange(i1 - i0)
            hit = (cols < nt) & (tgt_ids[np.minimum(cols, nt - 1)] == src_ids[i0:i1])
            mask[rows[hit], cols[hit]] = False
        rows, cols = np.nonzero(mask)
        srcs.append(src_ids[rows + i0])
        tgts.append(tgt_ids[cols])
    if srcs:
        return np.concatenate(srcs), np.concatenate(tgts)
    return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)


def instantiate(spec: NetworkSpec, seed: int) -> Network:
    """Realize a NetworkSpec: every potential edge drawn independently.

    Connectivity randomness comes from its own stream of ``seed``; runs then
    take a separate seed, so structure and dynamics reproduce independently.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    b = NetworkBuilder()
    for p in spec.populations:
        b.add_population(p.name, p.size, p.lif)
    for i in spec.inputs:
        b.add_input(i.name, i.size, i.base_rate_hz)
    for k, c in enumerate(spec.connections):
        src_ids = b.net.members(c.source)
        tgt_ids = b.net.members(c.target)
        if c.probability == 0.0:
            src = np.empty(0, dtype=np.int64)
            tgt = np.empty(0, dtype=np.int64)
        else:
            src, tgt = _sample_edges(
                rng, src_ids, tgt_ids, c.probability, exclude_self=c.source == c.target
            )
        b.add_edges(f"{c.source}->{c.target}#{k}", src, tgt, c.weight, c.device)
    return b.build()


def run(
    network: Network,
    protocol: Protocol,
    seed: int,
    trace_channels: tuple[str, ...] = (),
) -> tuple[SpikeRaster, TraceLog]:
    """Module-level alias for ``Network.run``."""
    return network.run(protocol, seed, trace_channels)


def firing_rate(
    raster: SpikeRaster,
    members: np.ndarray,
    window: tuple[float, float],
    size: int | None = None,
) -> float:
    """Population rate in Hz: spikes in the window / (size * window length)."""
    t0, t1 = window
    if not t1 > t0:
        raise ValueError(f"window must have positive length, got {window}")
    members = np.asarray(members)
    n = members.size if size is None else size
    m = (raster.times >= t0) & (raster.times < t1) & np.isin(raster.ids, members)
    return float(m.sum()) / (n * (t1 - t0) * 1e-3)
