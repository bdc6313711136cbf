"""Associative symbolic working memory over gated volatile devices.

Eight memory neurons span three feature categories (shape, texture, color by
default). Every cross-category neuron pair owns one volatile device sitting
between two threshold gates: the input gate opens for a spike of either
specific neuron unless any other memory neuron fired in the same step, and
the output gate relays the device's transmission back to both specific
neurons. A conducting device relays a 1.0 V kick, a non-conducting one 1/20
of that, which cannot lift a partner to the 1.4 V firing threshold, so only
stored associations re-activate their partners.

Objects (one feature per category) are stored by a synchronized pulse train:
the three feature neurons are driven together through their one-to-one
inputs, and each pulse stimulates the three pairwise devices of the object
directly at the device switching probability. Storage therefore lives only
in the hidden device states, not in neural activity, and touches exactly the
object's own associations: with synchronized drive the input gates stay shut
(every gate sees a non-specific spike), so no other device is pulsed.

Recall drives a single cue neuron; its spikes open the cue's gates, refresh
and route through conducting devices, and re-ignite the associated neurons.
Each category is decoded as its most active neuron during the recall window,
or undecided when the whole category stayed silent. A per-category inhibitory
neuron fires only when two members of its category are active together and
then suppresses the whole category, enforcing one winner at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calib import DEFAULT_COMPLIANCE_TABLE
from .device import DeviceArray, DeviceParams
from .neuron import LifParams, LifPopulation

__all__ = [
    "AssocSpec",
    "assoc_spec_70ua",
    "assoc_spec_long",
    "AssocNetwork",
    "build_assoc",
    "store_object",
    "recall_query",
    "RecallOutcome",
    "decoding_error",
]

DT = 1.0

DEFAULT_CATEGORIES: dict[str, tuple[str, ...]] = {
    "shape": ("cylinder", "cone", "cube"),
    "texture": ("smooth", "rough"),
    "color": ("red", "blue", "green"),
}


@dataclass(frozen=True)
class AssocSpec:
    """Structure and operating point of the association network."""

    categories: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: dict(DEFAULT_CATEGORIES)
    )
    theta_v: float = 1.4
    tau_mem_ms: float = 15.0
    tau_inh_ms: float = 10.0
    t_refrac_ms: float = 2.0
    w_input_v: float = 1.5  # store/recall input -> memory neuron
    w_inh_v: float = -1.5  # category inhibitor -> its members
    w_mem_inh_v: float = 0.8  # memory neuron -> its category inhibitor
    kick_on_v: float = 1.0  # conducting device transmission
    gate_w_specific: float = 1.0
    gate_w_other: float = -3.0
    gate_threshold: float = 0.5
    gate_tau_ms: float = 15.0
    out_gate_threshold: float = 0.01
    # device
    mu_ret: float = 7.166
    sigma_ret: float = 0.60
    rho: float = 0.2
    r_off_ratio: float = 20.0
    # drive
    store_rate_hz: float = 50.0
    store_dur_ms: int = 500
    recall_rate_hz: float = 100.0
    recall_dur_ms: int = 300

    def __post_init__(self) -> None:
        names = [m for ms in self.categories.values() for m in ms]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique across categories")
        if len(self.categories) < 2:
            raise ValueError("need at least two categories")

    @property
    def device_params(self) -> DeviceParams:
        return DeviceParams(
            mu_ret=self.mu_ret, sigma_ret=self.sigma_ret, rho=self.rho,
            r_on=self.kick_on_v, r_off_ratio=self.r_off_ratio,
        )

    @property
    def mem_params(self) -> LifParams:
        return LifParams(
            tau_m=self.tau_mem_ms, u_rest=0.0, theta=self.theta_v, u_reset=0.0,
            t_refrac=self.t_refrac_ms,
        )

    @property
    def inh_params(self) -> LifParams:
        return LifParams(
            tau_m=self.tau_inh_ms, u_rest=0.0, theta=self.theta_v, u_reset=0.0,
            t_refrac=self.t_refrac_ms,
        )


def assoc_spec_70ua() -> AssocSpec:
    """Retention programmed at the 70 uA compliance point (600 ms window)."""
    entry = DEFAULT_COMPLIANCE_TABLE.lookup(70.0)
    return AssocSpec(mu_ret=entry.mu_ret, sigma_ret=entry.sigma_ret)


def assoc_spec_long() -> AssocSpec:
    """Retention at the 1.4 s-median calibration used by the WM network."""
    return AssocSpec(mu_ret=7.24, sigma_ret=0.82)


class AssocNetwork:
    """Built association network; one instance runs one trial sequence."""

    def __init__(self, spec: AssocSpec):
        self.spec = spec
        self.features: list[str] = []
        self.category_of: list[int] = []
        self.cat_names = list(spec.categories)
        for ci, cat in enumerate(self.cat_names):
            for m in spec.categories[cat]:
                self.features.append(m)
                self.category_of.append(ci)
        self.n = len(self.features)
        self.index = {m: i for i, m in enumerate(self.features)}
        self.cat_arr = np.array(self.category_of)

        # one device per cross-category pair
        self.pairs = [
            (a, b)
            for a in range(self.n)
            for b in range(a + 1, self.n)
            if self.category_of[a] != self.category_of[b]
        ]
        self.pair_index = {p: k for k, p in enumerate(self.pairs)}
        self.pair_a = np.array([p[0] for p in self.pairs])
        self.pair_b = np.array([p[1] for p in self.pairs])
        self.devices = DeviceArray(len(self.pairs), spec.device_params)

        self.mem = LifPopulation(self.n, spec.mem_params)
        self.inh = LifPopulation(len(self.cat_names), spec.inh_params)
        self._pending_mem = np.zeros(self.n)
        self._pending_inh = np.zeros(len(self.cat_names))
        self._gate_g = np.zeros(len(self.pairs))  # input-gate potentials
        self.gate_stimulations = 0  # device pulses routed through open gates, recall path

    def pair_device(self, m1: str, m2: str) -> int:
        a, b = sorted((self.index[m1], self.index[m2]))
        return self.pair_index[(a, b)]

    def object_devices(self, features: dict[str, str]) -> list[int]:
        members = [features[c] for c in self.cat_names]
        return [
            self.pair_device(x, y)
            for i, x in enumerate(members)
            for y in members[i + 1 :]
        ]

    def step(
        self,
        t: float,
        rng: np.random.Generator,
        input_kick: np.ndarray | None = None,
        direct_device_pulse: np.ndarray | None = None,
    ) -> np.ndarray:
        """One 1 ms step; returns the memory spike mask.

        ``input_kick`` is a boolean mask of memory neurons receiving their
        input pulse this step. ``direct_device_pulse`` lists device indices
        stimulated through their terminals (the store pathway), bypassing the
        gates.
        """
        if direct_device_pulse is not None and direct_device_pulse.size:
            self.devices.stimulate(direct_device_pulse, t, rng)

        i_mem = self._pending_mem.copy()
        if input_kick is not None:
            i_mem[input_kick] += self.spec.w_input_v
        i_inh = self._pending_inh

        spk = self.mem.step(i_mem, t, DT)
        spk_inh = self.inh.step(i_inh, t, DT)

        self._pending_mem = np.zeros(self.n)
        self._pending_inh = np.zeros(len(self.cat_names))

        # lateral feedback within categories
        for ci in np.flatnonzero(spk_inh):
            self._pending_mem[self.cat_arr == ci] += self.spec.w_inh_v
        cat_counts = np.bincount(self.cat_arr[spk], minlength=len(self.cat_names))
        self._pending_inh += self.spec.w_mem_inh_v * cat_counts

        # input gates: leaky integrators of +specific / -non-specific spikes.
        # A lone specific spike lifts a resting gate straight over threshold;
        # sustained non-specific firing holds the gate shut tonically, which a
        # per-step coincidence test cannot do once loop delays stagger the
        # spikes of co-active neurons across steps.
        self._gate_g *= 1.0 - DT / self.spec.gate_tau_ms
        if spk.any():
            s = spk.astype(float)
            pair_in = s[self.pair_a] + s[self.pair_b]
            others = s.sum() - pair_in
            self._gate_g += (
                self.spec.gate_w_specific * pair_in + self.spec.gate_w_other * others
            )
            open_idx = np.flatnonzero(
                (self._gate_g >= self.spec.gate_threshold) & (pair_in > 0)
            )
            if open_idx.size:
                # the routed pulse sees the device state it arrived at; a
                # pulse that switches the device transmits from the next one
                alive = self.devices.on[open_idx] & (t < self.devices.expires_at[open_idx])
                w = np.where(
                    alive,
                    self.devices.params.r_on,
                    self.devices.params.r_on / self.devices.params.r_off_ratio,
                )
                self.devices.stimulate(open_idx, t, rng)
                self.gate_stimulations += int(open_idx.size)
                relay = w >= self.spec.out_gate_threshold
                np.add.at(self._pending_mem, self.pair_a[open_idx[relay]], w[relay])
                np.add.at(self._pending_mem, self.pair_b[open_idx[relay]], w[relay])
        return spk

    def advance_silent(self, t_now: float, t_target: float, rng: np.random.Generator) -> float:
        """Jump over a stimulus-free interval.

        Two real steps flush pending kicks, then membranes decay analytically
        (exact for the noiseless Euler leak); devices relax lazily against
        their expiry times, so no stepping is needed for them.
        """
        t = t_now
        for _ in range(2):
            if t >= t_target:
                return t
            self.step(t, rng)
            t += DT
        steps = int(t_target - t)
        if steps > 0:
            self.mem.u *= (1.0 - DT / self.spec.tau_mem_ms) ** steps
            self.inh.u *= (1.0 - DT / self.spec.tau_inh_ms) ** steps
            self._gate_g *= (1.0 - DT / self.spec.gate_tau_ms) ** steps
        return float(t_target)


def build_assoc(spec: AssocSpec, seed: int = 0) -> AssocNetwork:
    """Construct the network; the structure is deterministic, devices start OFF."""
    del seed  # structure has no random part; kept for interface symmetry
    return AssocNetwork(spec)


def store_object(
    net: AssocNetwork,
    features: dict[str, str],
    rng: np.random.Generator,
    t_start: float = 0.0,
    dur_ms: int | None = None,
) -> float:
    """Present an object: synchronized drive plus direct device programming.

    ``features`` maps every category to one member. Returns the end time of
    the store phase. Each pulse drives the three feature neurons together and
    stimulates the object's pairwise devices once, so after k pulses a device
    is conducting with probability 1 - (1 - rho)^k and is refreshed until the
    final pulse.
    """
    spec = net.spec
    if set(features) != set(net.cat_names):
        raise ValueError(f"need exactly one feature per category {net.cat_names}")
    mask = np.zeros(net.n, dtype=bool)
    for cat, member in features.items():
        if member not in spec.categories[cat]:
            raise ValueError(f"{member!r} is not a member of category {cat!r}")
        mask[net.index[member]] = True
    dev_idx = np.array(net.object_devices(features))

    dur = spec.store_dur_ms if dur_ms is None else dur_ms
    period = 1000.0 / spec.store_rate_hz
    pulse_steps = {int(round(k * period)) for k in range(int(math.ceil(dur / period)))}
    t = t_start
    for step_i in range(int(dur)):
        pulse = step_i in pulse_steps
        net.step(
            t,
            rng,
            input_kick=mask if pulse else None,
            direct_device_pulse=dev_idx if pulse else None,
        )
        t += DT
    return t


@dataclass(frozen=True)
class RecallOutcome:
    decoded: dict[str, str | None]  # per category; None = undecided
    counts: dict[str, int]  # spikes per feature in the recall window
    correct: bool | None = None


def recall_query(
    net: AssocNetwork,
    cue: str,
    rng: np.random.Generator,
    t_start: float,
    dur_ms: int | None = None,
    expected: dict[str, str] | None = None,
) -> RecallOutcome:
    """Drive one cue feature and decode every category from spike counts.

    Undecided categories (no spikes at all) decode to None. When ``expected``
    is given, ``correct`` reports whether every category decoded to the
    stored feature; an undecided category counts as wrong.
    """
    spec = net.spec
    if cue not in net.index:
        raise ValueError(f"unknown feature {cue!r}")
    mask = np.zeros(net.n, dtype=bool)
    mask[net.index[cue]] = True
    dur = spec.recall_dur_ms if dur_ms is None else dur_ms
    period = 1000.0 / spec.recall_rate_hz
    pulse_steps = {int(round(k * period)) for k in range(int(math.ceil(dur / period)))}

    counts = np.zeros(net.n, dtype=int)
    t = t_start
    for step_i in range(int(dur)):
        spk = net.step(t, rng, input_kick=mask if step_i in pulse_steps else None)
        counts += spk
        t += DT

    decoded: dict[str, str | None] = {}
    for ci, cat in enumerate(net.cat_names):
        sel = np.flatnonzero(net.cat_arr == ci)
        c = counts[sel]
        decoded[cat] = net.features[sel[int(np.argmax(c))]] if c.max() > 0 else None

    correct = None
    if expected is not None:
        correct = all(decoded[cat] == expected[cat] for cat in net.cat_names)
    return RecallOutcome(
        decoded=decoded,
        counts={net.features[i]: int(counts[i]) for i in range(net.n)},
        correct=correct,
    )


def decoding_error(
    spec: AssocSpec,
    delays_ms: list[float],
    n_trials: int,
    seed: int,
) -> list[tuple[float, float]]:
    """Decode-error fraction as a function of the store-to-recall delay.

    Each trial stores a random object, waits one delay, then queries with a
    random single feature of the object; the trial errs when any category
    decodes wrongly or stays undecided. All trials of one delay reuse the
    same per-trial seeds, so the curve varies only through the delay.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    trial_seeds = np.random.SeedSequence(seed).spawn(n_trials)
    curve: list[tuple[float, float]] = []
    for delay in delays_ms:
        errors = 0
        for ts in trial_seeds:
            rng = np.random.default_rng(ts)
            net = build_assoc(spec)
            obj = {
                cat: members[int(rng.integers(len(members)))]
                for cat, members in spec.categories.items()
            }
            cue_cat = list(spec.categories)[int(rng.integers(len(spec.categories)))]
            t_end = store_object(net, obj, rng)
            t0 = net.advance_silent(t_end, t_end + float(delay), rng)
            out = recall_query(net, obj[cue_cat], rng, t0, expected=obj)
            errors += not out.correct
        curve.append((float(delay), errors / n_trials))
    return curve
