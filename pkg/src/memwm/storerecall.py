"""Five-device pattern store/recall experiment.

Five volatile devices feed one readout. A color is encoded as a 3-of-5
stimulation pattern; storing a color means pulsing its pattern at the
stimulation frequency until the three target devices are simultaneously ON
(or a time cap is hit). Recall then presents a stream of colors, one pattern
per stimulation period, and the readout recognizes a presentation when the
summed current of the stimulated conducting devices reaches a threshold.

The current of a presentation is measured during the pulse itself, so a
device that switches ON within the pulse contributes immediately; stimulated
OFF devices can switch spuriously during recall exactly as during store,
which is what produces recognition errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .calib import DEFAULT_COMPLIANCE_TABLE, ComplianceTable
from .device import DeviceParams, DeviceState, on_pre_spike, weight

__all__ = [
    "DEFAULT_PALETTE",
    "PatternCode",
    "default_coding",
    "encode",
    "SrConfig",
    "PresentationRecord",
    "SrResult",
    "run_store_recall",
    "failure_histogram",
    "random_stream",
]

N_DEVICES = 3 + 2  # 3-of-5 coding

DEFAULT_PALETTE = ("green", "red", "blue", "yellow", "purple")

# green is pinned to 01101; the other colors take the remaining weight-3
# codes in lexicographic order. Only injectivity and the 3-of-5 weight matter
# to the metrics; the assignment is configurable.
_GREEN_CODE = "01101"


@dataclass(frozen=True)
class PatternCode:
    """A 3-of-5 stimulation pattern."""

    bits: tuple[bool, bool, bool, bool, bool]

    def __post_init__(self) -> None:
        if len(self.bits) != N_DEVICES:
            raise ValueError(f"pattern must have {N_DEVICES} bits")
        if sum(self.bits) != 3:
            raise ValueError(f"pattern must have exactly 3 active bits, got {self.bits}")

    @classmethod
    def from_string(cls, s: str) -> "PatternCode":
        return cls(tuple(c == "1" for c in s))

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)


def _lexicographic_codes() -> list[str]:
    return [
        "".join("1" if i in comb else "0" for i in range(N_DEVICES))
        for comb in _weight3_combinations()
    ]


def _weight3_combinations() -> list[tuple[int, ...]]:
    from itertools import combinations

    combos = list(combinations(range(N_DEVICES), 3))
    return sorted(combos, key=lambda c: "".join("1" if i in c else "0" for i in range(5)))


def default_coding(palette: tuple[str, ...] = DEFAULT_PALETTE) -> dict[str, PatternCode]:
    """Injective color -> pattern table; 'green' always maps to 01101."""
    if len(set(palette)) != len(palette):
        raise ValueError("palette colors must be unique")
    codes = [c for c in _lexicographic_codes() if c != _GREEN_CODE]
    table: dict[str, PatternCode] = {}
    for color in palette:
        if color == "green":
            table[color] = PatternCode.from_string(_GREEN_CODE)
        else:
            table[color] = PatternCode.from_string(codes.pop(0))
    return table


def encode(color: str, coding: dict[str, PatternCode] | None = None) -> PatternCode:
    """Pattern for a palette color; unknown colors are rejected."""
    table = coding if coding is not None else default_coding()
    try:
        return table[color]
    except KeyError:
        raise ValueError(f"unknown color {color!r}; palette is {sorted(table)}") from None


@dataclass(frozen=True)
class SrConfig:
    """Store/recall operating point.

    Retention defaults to the 17 uA compliance calibration (28 ms median).
    ``p_on_recall`` lets the recall phase use a different switching
    probability than the store phase; by default they are equal.
    ``i_threshold_ua`` must lie between two and three device contributions.
    """

    p_on: float = 0.05
    f_stim_hz: float = 50.0
    i_cc_ua: float = 17.0
    i_threshold_ua: float = 42.0
    mu_ret: float = math.log(28.0)
    sigma_ret: float = 0.82
    p_on_recall: float | None = None
    store_cap_ms: float = 10_000.0
    palette: tuple[str, ...] = DEFAULT_PALETTE

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_on <= 1.0:
            raise ValueError(f"p_on must be in [0, 1], got {self.p_on}")
        if not self.f_stim_hz > 0:
            raise ValueError(f"f_stim_hz must be > 0, got {self.f_stim_hz}")
        if not 2 * self.i_cc_ua <= self.i_threshold_ua <= 3 * self.i_cc_ua:
            raise ValueError(
                f"threshold {self.i_threshold_ua} uA must lie between "
                f"{2 * self.i_cc_ua} and {3 * self.i_cc_ua} uA"
            )

    @classmethod
    def from_compliance(
        cls, i_cc_ua: float, table: ComplianceTable = DEFAULT_COMPLIANCE_TABLE, **kw
    ) -> "SrConfig":
        entry = table.lookup(i_cc_ua)
        return cls(i_cc_ua=i_cc_ua, mu_ret=entry.mu_ret, sigma_ret=entry.sigma_ret, **kw)

    @property
    def device_params(self) -> DeviceParams:
        return DeviceParams(mu_ret=self.mu_ret, sigma_ret=self.sigma_ret, rho=self.p_on)

    @property
    def period_ms(self) -> float:
        return 1000.0 / self.f_stim_hz

    def coding(self) -> dict[str, PatternCode]:
        return default_coding(self.palette)


def total_current(
    states: list[DeviceState], stimulated: PatternCode, i_cc_ua: float
) -> float:
    """Summed current (uA) of the stimulated conducting devices.

    The OFF-state contribution is measured in teraohms and is treated as
    zero at the microamp scale of the readout.
    """
    return i_cc_ua * sum(1 for s, b in zip(states, stimulated.bits) if b and s.on)


def classify(current_ua: float, threshold_ua: float) -> bool:
    """Recognition decision; the boundary counts as recognized (>=)."""
    if not threshold_ua > 0:
        raise ValueError(f"threshold must be > 0, got {threshold_ua}")
    return current_ua >= threshold_ua


@dataclass(frozen=True)
class PresentationRecord:
    time_ms: float
    color: str
    is_stored: bool
    expected_ua: float
    measured_ua: float
    recognized: bool

    @property
    def correct(self) -> bool:
        return self.recognized == self.is_stored

    @property
    def current_error_ua(self) -> float:
        return self.measured_ua - self.expected_ua


@dataclass(frozen=True)
class SrResult:
    accuracy: float
    avg_current_error_ua: float
    presentations: tuple[PresentationRecord, ...]
    store_ok: bool
    store_duration_ms: float
    first_on_ms: tuple[float, ...]  # per target device; inf if never switched

    @property
    def store_failed(self) -> bool:
        return not self.store_ok


def random_stream(
    n: int, rng: np.random.Generator, palette: tuple[str, ...] = DEFAULT_PALETTE
) -> list[str]:
    """Uniform random color stream of length n."""
    return [palette[int(i)] for i in rng.integers(0, len(palette), size=n)]


def run_store_recall(
    config: SrConfig,
    stored: str,
    stream: list[str],
    seed: int,
) -> SrResult:
    """Store one color, then classify every presentation of the test stream.

    Store phase: the stored pattern is pulsed once per stimulation period
    until its three devices are simultaneously ON or ``store_cap_ms`` is
    reached; a capped store is reported via ``store_ok=False`` and the recall
    phase proceeds from whatever state the devices are in. Recall phase: each
    stream color is presented for one pulse; accuracy is the fraction of
    presentations whose recognition decision matches stored/non-stored truth,
    and the current error is measured minus expected current, where the
    expected current assumes a perfectly held stored pattern.
    """
    coding = config.coding()
    stored_code = encode(stored, coding)
    params = config.device_params
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    states = [DeviceState() for _ in range(N_DEVICES)]
    first_on = [math.inf] * N_DEVICES

    def pulse(pattern: PatternCode, t: float, p: float) -> None:
        for k in range(N_DEVICES):
            if pattern.bits[k]:
                was_on = states[k].on
                states[k] = on_pre_spike(states[k], t, params, rng, p_on=p)
                if states[k].on and not was_on and first_on[k] == math.inf:
                    first_on[k] = t

    # store phase: time advances on the ms grid, pulses at the stimulation period
    store_ok = False
    store_end = config.store_cap_ms
    k = 0
    while True:
        t = round(k * config.period_ms)
        if t > config.store_cap_ms:
            break
        pulse(stored_code, float(t), config.p_on)
        if all(
            s.on and float(t) < s.expires_at
            for s, b in zip(states, stored_code.bits)
            if b
        ):
            store_ok = True
            store_end = float(t)
            break
        k += 1

    # recall phase: one presentation per period, measured during the pulse
    p_recall = config.p_on if config.p_on_recall is None else config.p_on_recall
    records: list[PresentationRecord] = []
    t0 = store_end + config.period_ms
    for j, color in enumerate(stream):
        t = float(round(t0 + j * config.period_ms))
        code = encode(color, coding)
        pulse(code, t, p_recall)
        measured = total_current(states, code, config.i_cc_ua)
        expected = config.i_cc_ua * sum(
            1 for a, b in zip(code.bits, stored_code.bits) if a and b
        )
        records.append(
            PresentationRecord(
                time_ms=t,
                color=color,
                is_stored=color == stored,
                expected_ua=expected,
                measured_ua=measured,
                recognized=classify(measured, config.i_threshold_ua),
            )
        )

    n = len(records)
    accuracy = sum(r.correct for r in records) / n if n else float("nan")
    avg_err = sum(r.current_error_ua for r in records) / n if n else float("nan")
    return SrResult(
        accuracy=accuracy,
        avg_current_error_ua=avg_err,
        presentations=tuple(records),
        store_ok=store_ok,
        store_duration_ms=store_end,
        first_on_ms=tuple(
            first_on[k] for k in range(N_DEVICES) if stored_code.bits[k]
        ),
    )


def failure_histogram(results: list[SrResult], i_cc_ua: float) -> np.ndarray:
    """Expected vs measured ON-count matrix over all presentations.

    Rows index the expected number of conducting stimulated devices (0..3),
    columns the measured number. Each row with any occurrences is normalized
    to sum to 1; unobserved rows stay zero.
    """
    if not results:
        raise ValueError("need at least one result")
    counts = np.zeros((4, 4))
    for res in results:
        for r in res.presentations:
            e = int(round(r.expected_ua / i_cc_ua))
            m = int(round(r.measured_ua / i_cc_ua))
            counts[e, m] += 1
    sums = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        probs = np.where(sums > 0, counts / np.where(sums == 0, 1, sums), 0.0)
    return probs
