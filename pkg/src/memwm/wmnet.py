"""Multi-stable spiking working-memory network with volatile item synapses.

Excitatory and inhibitory LIF pools with random connectivity; a set of memory
items, each represented by a population of excitatory neurons sampled from
the pool (items may overlap). Synapses between members of a common item are
volatile devices: when ON they transmit the strong item weight, when OFF the
item weight divided by the ON/OFF ratio. All other synapses are static.

Each item has a private input population. Storing an item raises its input
rate tenfold; recall raises every input moderately (an unspecific probe), and
the item whose devices were potentiated re-ignites far above the others.
Recall quality is the ratio of the stored population's firing rate to the
rate of the union of the other item populations.

Two presets ship. ``full_spec`` is the published operating point (8000/2000
neurons, 10% connectivity, per-step noise means 0.5775/0.5275 mV). That noise
setting drives the mean membrane to u_rest + mean * tau, which is above
threshold, so the baseline is not quiet; it is kept as the documented
reference configuration. ``desk_spec`` is a 10x-reduced network with the same
rate protocol whose noise and connectivity are retuned to a fluctuation-driven
operating point (quiet baseline, input-ignited attractors) so that the
store/timeout/recall behavior is reproducible in CI-scale runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .device import DeviceParams
from .engine import Network, NetworkBuilder, Phase, Protocol, SpikeRaster, TraceLog, firing_rate
from .neuron import LifParams

__all__ = [
    "WmSpec",
    "full_spec",
    "desk_spec",
    "WmNetwork",
    "build_wm",
    "run_protocol",
    "SnrResult",
    "snr",
    "store_recall_snr",
]


@dataclass(frozen=True)
class WmSpec:
    n_exc: int
    n_inh: int
    n_items: int
    item_size: int
    inputs_per_item: int
    # synaptic weights, mV
    w_item: float = 0.5
    w_base: float = 0.1
    w_inh: float = -0.2
    w_input: float = 0.1
    w_exc_inh: float = 0.1
    # connection probabilities
    p_item: float = 0.1
    p_ee: float = 0.1
    p_ei: float = 0.1
    p_ie: float = 0.1
    p_ii: float = 0.1
    p_input: float = 0.1
    # input drive
    base_rate_hz: float = 0.1
    store_multiplier: float = 10.0
    recall_multiplier: float = 5.0
    # item membership: independent uniform draws per item (overlapping) or a
    # disjoint partition of the excitatory pool
    disjoint_items: bool = False
    # neurons
    exc: LifParams = field(
        default_factory=lambda: LifParams(
            tau_m=15.0, u_rest=16.0, theta=20.0, u_reset=16.0, t_refrac=2.0,
            noise_mean=0.5775, noise_std=1.0,
        )
    )
    inh: LifParams = field(
        default_factory=lambda: LifParams(
            tau_m=10.0, u_rest=13.0, theta=20.0, u_reset=13.0, t_refrac=2.0,
            noise_mean=0.5275, noise_std=1.0,
        )
    )
    # volatile device (r_on is set to w_item when edges are built)
    mu_ret: float = 7.24
    sigma_ret: float = 0.82
    rho: float = 0.05
    r_off_ratio: float = 20.0

    def __post_init__(self) -> None:
        if self.item_size > self.n_exc:
            raise ValueError("item_size cannot exceed n_exc")
        for name in ("p_item", "p_ee", "p_ei", "p_ie", "p_ii", "p_input"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.base_rate_hz < 0:
            raise ValueError("base_rate_hz must be >= 0")

    @property
    def device_params(self) -> DeviceParams:
        return DeviceParams(
            mu_ret=self.mu_ret, sigma_ret=self.sigma_ret, rho=self.rho,
            r_on=self.w_item, r_off_ratio=self.r_off_ratio,
        )

    def with_retention(self, mu_ret: float, sigma_ret: float | None = None) -> "WmSpec":
        return replace(
            self, mu_ret=mu_ret,
            sigma_ret=self.sigma_ret if sigma_ret is None else sigma_ret,
        )

    def with_rho(self, rho: float) -> "WmSpec":
        return replace(self, rho=rho)


def full_spec() -> WmSpec:
    """Published full-scale configuration (reference, not CI-sized)."""
    return WmSpec(n_exc=8000, n_inh=2000, n_items=5, item_size=800, inputs_per_item=1000)


def desk_spec() -> WmSpec:
    """Tuned 10x-reduced preset for CI-scale runs.

    Same rate protocol as the full network (0.1 Hz baseline, 10x store drive,
    5x recall probe) and the same neuron constants except the background
    noise, which is retuned to hold the pool quiet at baseline and steeply
    responsive to input; connectivity is densified to preserve recurrent
    in-degree * weight products at the reduced scale.
    """
    return WmSpec(
        n_exc=800, n_inh=200, n_items=5, item_size=80, inputs_per_item=100,
        w_input=1.5, w_exc_inh=0.35,
        p_item=0.45, p_ee=0.01, p_ei=0.5, p_ie=0.2, p_ii=0.3, p_input=1.0,
        disjoint_items=True,
        exc=LifParams(
            tau_m=15.0, u_rest=16.0, theta=20.0, u_reset=16.0, t_refrac=2.0,
            noise_mean=0.0, noise_std=0.33,
        ),
        inh=LifParams(
            tau_m=10.0, u_rest=13.0, theta=20.0, u_reset=13.0, t_refrac=2.0,
            noise_mean=0.0, noise_std=0.33,
        ),
    )


@dataclass
class WmNetwork:
    network: Network
    spec: WmSpec
    items: list[np.ndarray]  # member ids per item (exc ids)

    def input_name(self, item: int) -> str:
        return f"input{item}"

    def non_specific_union(self, stored_item: int) -> np.ndarray:
        others = [m for k, m in enumerate(self.items) if k != stored_item]
        return np.unique(np.concatenate(others))


def build_wm(spec: WmSpec, seed: int) -> WmNetwork:
    """Realize the network: item membership, connectivity, devices.

    Item populations are drawn uniformly without replacement per item, so
    distinct items can overlap. Ordered neuron pairs that share at least one
    item are candidate volatile edges (realized with p_item, one device per
    edge); all remaining excitatory pairs are candidate static edges at p_ee.
    Inhibitory and input synapses are static.
    """
    ss = np.random.SeedSequence(seed)
    rng_members, rng_conn = map(np.random.default_rng, ss.spawn(2))

    if spec.disjoint_items:
        if spec.n_items * spec.item_size > spec.n_exc:
            raise ValueError("disjoint items do not fit in the excitatory pool")
        perm = rng_members.permutation(spec.n_exc)
        items = [
            np.sort(perm[k * spec.item_size : (k + 1) * spec.item_size])
            for k in range(spec.n_items)
        ]
    else:
        items = [
            np.sort(rng_members.choice(spec.n_exc, size=spec.item_size, replace=False))
            for _ in range(spec.n_items)
        ]

    b = NetworkBuilder()
    exc_ids = b.add_population("exc", spec.n_exc, spec.exc)
    inh_ids = b.add_population("inh", spec.n_inh, spec.inh)
    for k in range(spec.n_items):
        b.add_input(f"input{k}", spec.inputs_per_item, spec.base_rate_hz)

    # within-item ordered pairs, deduplicated across overlapping items
    pair_keys: list[np.ndarray] = []
    for members in items:
        src = np.repeat(members, spec.item_size)
        tgt = np.tile(members, spec.item_size)
        keep = src != tgt
        pair_keys.append(src[keep].astype(np.int64) * spec.n_exc + tgt[keep])
    item_pairs = np.unique(np.concatenate(pair_keys))
    chosen = item_pairs[rng_conn.random(item_pairs.size) < spec.p_item]
    item_src = chosen // spec.n_exc
    item_tgt = chosen % spec.n_exc
    b.add_edges("item_devices", item_src, item_tgt, spec.w_item, spec.device_params)

    # background excitatory pairs exclude the item candidates entirely
    is_item_pair = np.zeros(spec.n_exc * spec.n_exc, dtype=bool)
    is_item_pair[item_pairs] = True
    ee_src_l: list[np.ndarray] = []
    ee_tgt_l: list[np.ndarray] = []
    chunk = max(1, 2_000_000 // spec.n_exc)
    for i0 in range(0, spec.n_exc, chunk):
        i1 = min(i0 + chunk, spec.n_exc)
        mask = rng_conn.random((i1 - i0, spec.n_exc)) < spec.p_ee
        rows = np.arange(i0, i1)
        mask[rows - i0, rows] = False  # no self-edges
        keys = (rows[:, None] * spec.n_exc + np.arange(spec.n_exc)[None, :])
        mask &= ~is_item_pair[keys]
        r, c = np.nonzero(mask)
        ee_src_l.append(r + i0)
        ee_tgt_l.append(c)
    b.add_edges(
        "exc_exc",
        np.concatenate(ee_src_l) if ee_src_l else np.empty(0, np.int64),
        np.concatenate(ee_tgt_l) if ee_tgt_l else np.empty(0, np.int64),
        spec.w_base,
    )

    def sample(src_ids: np.ndarray, tgt_ids: np.ndarray, p: float):
        mask = rng_conn.random((src_ids.size, tgt_ids.size)) < p
        if src_ids is tgt_ids:
            np.fill_diagonal(mask, False)
        r, c = np.nonzero(mask)
        return src_ids[r], tgt_ids[c]

    s, t = sample(exc_ids, inh_ids, spec.p_ei)
    b.add_edges("exc_inh", s, t, spec.w_exc_inh)
    s, t = sample(inh_ids, exc_ids, spec.p_ie)
    b.add_edges("inh_exc", s, t, spec.w_inh)
    s, t = sample(inh_ids, inh_ids, spec.p_ii)
    b.add_edges("inh_inh", s, t, spec.w_inh)

    for k in range(spec.n_items):
        in_ids = b.net.members(f"input{k}")
        mask = rng_conn.random((in_ids.size, items[k].size)) < spec.p_input
        r, c = np.nonzero(mask)
        b.add_edges(f"input{k}_item", in_ids[r], items[k][c], spec.w_input)

    return WmNetwork(network=b.build(), spec=spec, items=items)


def _phases(wm: WmNetwork, schedule: list[tuple]) -> Protocol:
    spec = wm.spec
    phases = []
    for entry in schedule:
        label = entry[0]
        if label == "store":
            _, item, dur = entry
            phases.append(
                Phase("store", int(dur), {wm.input_name(item): spec.store_multiplier})
            )
        elif label in ("timeout", "free"):
            _, dur = entry
            phases.append(Phase(label, int(dur)))
        elif label == "recall":
            _, dur = entry
            mult = {
                wm.input_name(k): spec.recall_multiplier for k in range(spec.n_items)
            }
            phases.append(Phase("recall", int(dur), mult))
        else:
            raise ValueError(f"unknown phase label {label!r}")
    return Protocol(tuple(phases))


def run_protocol(
    wm: WmNetwork,
    schedule: list[tuple],
    seed: int,
    trace_channels: tuple[str, ...] = (),
) -> tuple[SpikeRaster, TraceLog, Protocol]:
    """Run a store/timeout/recall schedule.

    Schedule entries: ("store", item_index, duration_ms), ("timeout", ms),
    ("free", ms), ("recall", ms). During a store the item's input rate is
    multiplied tenfold; during a recall every input runs at the probe rate.
    Returns the raster, traces and the resolved protocol (for phase windows).
    """
    protocol = _phases(wm, schedule)
    raster, trace = wm.network.run(protocol, seed, trace_channels)
    return raster, trace, protocol


@dataclass(frozen=True)
class SnrResult:
    value: float
    degenerate: bool  # True when the non-specific pool was silent


def snr(
    raster: SpikeRaster,
    wm: WmNetwork,
    stored_item: int,
    window: tuple[float, float],
) -> SnrResult:
    """Stored-population rate over the rate of the other items' union.

    A silent non-specific pool yields an infinite ratio, flagged as
    degenerate rather than silently propagated.
    """
    if not window[1] > window[0]:
        raise ValueError(f"empty window {window}")
    r_spec = firing_rate(raster, wm.items[stored_item], window)
    others = wm.non_specific_union(stored_item)
    r_other = firing_rate(raster, others, window)
    if r_other == 0.0:
        return SnrResult(value=math.inf, degenerate=True)
    return SnrResult(value=r_spec / r_other, degenerate=False)


def store_recall_snr(
    spec: WmSpec,
    seed: int,
    *,
    item: int = 0,
    store_ms: int = 1200,
    timeout_ms: int = 1000,
    recall_ms: int = 800,
) -> SnrResult:
    """Build, run store -> timeout -> recall, and score the recall window."""
    wm = build_wm(spec, seed)
    schedule = [("store", item, store_ms), ("timeout", timeout_ms), ("recall", recall_ms)]
    raster, _, protocol = run_protocol(wm, schedule, seed + 1)
    label, t0, t1 = protocol.windows()[-1]
    assert label == "recall"
    return snr(raster, wm, item, (t0, t1))
