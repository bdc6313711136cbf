"""Two-state volatile synaptic device with stochastic switching and relaxation.

A device is either conducting (ON) or non-conducting (OFF). A stimulation
pulse turns an OFF device ON with some probability; the probability is either
given directly or derived from the pulse voltage through an erf-shaped
switching curve. Once ON, the device spontaneously relaxes back to OFF after
a random retention time drawn from a lognormal distribution. A pulse arriving
at an ON device refreshes it: the remaining lifetime is redrawn from the same
distribution.

State changes happen only through two paths: ``on_pre_spike`` (OFF -> ON and
refresh) and ``expire`` (ON -> OFF). Relaxation is evaluated lazily against
the 1 ms simulation clock, so retention draws below one step round up to 1 ms.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

__all__ = [
    "MIN_RETENTION_MS",
    "DeviceParams",
    "DeviceState",
    "SwitchCdfParams",
    "SwitchCdfTable",
    "DEFAULT_SWITCH_TABLE",
    "DeviceArray",
    "p_on_voltage",
    "p_on_burst",
    "sample_retention",
    "on_pre_spike",
    "expire",
    "weight",
]

#: Shortest representable retention; the simulation clock ticks at 1 ms.
MIN_RETENTION_MS = 1.0


@dataclass(frozen=True)
class DeviceParams:
    """Parameters of one stochastic volatile device.

    ``mu_ret`` and ``sigma_ret`` are the location and scale of the lognormal
    retention-time distribution in log-milliseconds. ``rho`` is the default
    per-pulse switching probability used when a pulse is not described by a
    voltage. ``r_on`` is the conducting-state weight in model units and
    ``r_off_ratio`` the ON/OFF weight ratio, so an OFF device transmits
    ``r_on / r_off_ratio``.
    """

    mu_ret: float
    sigma_ret: float
    rho: float = 0.05
    r_on: float = 1.0
    r_off_ratio: float = 20.0

    def __post_init__(self) -> None:
        if not self.sigma_ret > 0:
            raise ValueError(f"sigma_ret must be > 0, got {self.sigma_ret}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [0, 1], got {self.rho}")
        if not self.r_off_ratio > 1.0:
            raise ValueError(f"r_off_ratio must be > 1, got {self.r_off_ratio}")

    @property
    def median_retention_ms(self) -> float:
        """Median of the retention distribution, exp(mu)."""
        return math.exp(self.mu_ret)

    @property
    def mean_retention_ms(self) -> float:
        """Mean of the retention distribution, exp(mu + sigma^2 / 2).

        For skewed fits the mean can sit well above the median; both are
        exposed so callers can pick the statistic they actually need.
        """
        return math.exp(self.mu_ret + 0.5 * self.sigma_ret**2)


@dataclass(frozen=True)
class DeviceState:
    """Runtime state of one device.

    ``expires_at`` is the simulation time (ms) at which the device relaxes;
    it is meaningful only while ``on`` is True.
    """

    on: bool = False
    expires_at: float = 0.0


@dataclass(frozen=True)
class SwitchCdfParams:
    """Erf-CDF switching curve for one pulse width.

    The probability that a single pulse of amplitude ``v`` switches an OFF
    device is the normal CDF with mean ``mu_v`` and standard deviation
    ``sigma_v`` (both in volts).
    """

    pulse_width: float  # ms
    mu_v: float
    sigma_v: float

    def __post_init__(self) -> None:
        if not self.sigma_v > 0:
            raise ValueError(f"sigma_v must be > 0, got {self.sigma_v}")
        if not self.pulse_width > 0:
            raise ValueError(f"pulse_width must be > 0, got {self.pulse_width}")


class SwitchCdfTable:
    """Switching curves keyed by pulse width.

    Widths not present in the table resolve to the nearest available entry
    with a warning; the calibration grid is sparse and strongly non-linear in
    width, so interpolating between entries would fabricate curves.
    """

    CSV_HEADER = ("pulse_width_ms", "mu_v", "sigma_v")

    def __init__(self, entries: list[SwitchCdfParams]):
        if not entries:
            raise ValueError("switch table must not be empty")
        widths = [e.pulse_width for e in entries]
        if len(set(widths)) != len(widths):
            raise ValueError("duplicate pulse widths in switch table")
        self.entries = sorted(entries, key=lambda e: e.pulse_width)

    def lookup(self, pulse_width: float) -> SwitchCdfParams:
        best = min(self.entries, key=lambda e: abs(e.pulse_width - pulse_width))
        if not math.isclose(best.pulse_width, pulse_width, rel_tol=1e-9):
            warnings.warn(
                f"no switching curve for pulse width {pulse_width} ms; "
                f"using nearest entry at {best.pulse_width} ms",
                stacklevel=2,
            )
        return best

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.CSV_HEADER)
            for e in self.entries:
                w.writerow([repr(e.pulse_width), repr(e.mu_v), repr(e.sigma_v)])

    @classmethod
    def from_csv(cls, path: str | Path) -> "SwitchCdfTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != cls.CSV_HEADER:
                raise ValueError(
                    f"bad switch table header {header!r}, expected {cls.CSV_HEADER!r}"
                )
            entries = [
                SwitchCdfParams(float(r[0]), float(r[1]), float(r[2])) for r in reader
            ]
        return cls(entries)


#: Measured switching curves (volts) for the supported pulse widths (ms).
DEFAULT_SWITCH_TABLE = SwitchCdfTable(
    [
        SwitchCdfParams(0.05, 2.31, 0.38),
        SwitchCdfParams(0.10, 2.11, 0.33),
        SwitchCdfParams(0.15, 1.86, 0.30),
        SwitchCdfParams(0.50, 1.73, 0.22),
        SwitchCdfParams(1.00, 1.21, 0.16),
        SwitchCdfParams(2.00, 0.61, 0.15),
        SwitchCdfParams(5.00, 0.59, 0.11),
    ]
)


def p_on_voltage(v: float, cdf: SwitchCdfParams) -> float:
    """Single-pulse switching probability at amplitude ``v`` volts.

    Normal CDF in the pulse amplitude: 0.5 * (1 + erf((v - mu) / (sigma * sqrt(2)))).
    Total and monotone non-decreasing in ``v``.
    """
    z = (v - cdf.mu_v) / (cdf.sigma_v * math.sqrt(2.0))
    return 0.5 * (1.0 + math.erf(z))


def p_on_burst(p1: float, n: int) -> float:
    """Probability that a burst of ``n`` identical pulses switches an OFF device.

    Pulses act independently, so the burst succeeds unless all n fail:
    1 - (1 - p1)^n.
    """
    if not 0.0 <= p1 <= 1.0:
        raise ValueError(f"p1 must be in [0, 1], got {p1}")
    if n < 1:
        raise ValueError(f"burst length must be >= 1, got {n}")
    return 1.0 - (1.0 - p1) ** n


def sample_retention(params: DeviceParams, rng: np.random.Generator) -> float:
    """Draw one retention time (ms) from Lognormal(mu_ret, sigma_ret).

    Sub-millisecond draws round up to the 1 ms clock resolution.
    """
    return float(max(rng.lognormal(params.mu_ret, params.sigma_ret), MIN_RETENTION_MS))


def expire(state: DeviceState, t: float) -> DeviceState:
    """Relax the device if its retention ran out by time ``t``."""
    if state.on and t >= state.expires_at:
        return DeviceState(on=False, expires_at=state.expires_at)
    return state


def on_pre_spike(
    state: DeviceState,
    t: float,
    params: DeviceParams,
    rng: np.random.Generator,
    *,
    p_on: float | None = None,
    v: float | None = None,
    cdf: SwitchCdfParams | None = None,
) -> DeviceState:
    """Apply one stimulation pulse at time ``t`` and return the new state.

    The drive is one of: an explicit probability ``p_on``, a voltage ``v``
    evaluated through the switching curve ``cdf``, or (default) the fixed
    ``params.rho``. Any pending relaxation is applied first, then an OFF
    device switches ON with the drive probability and an ON device is
    refreshed; in both cases the new expiry is ``t`` plus a fresh retention
    draw.
    """
    if v is not None:
        if cdf is None:
            raise ValueError("voltage drive requires a switching curve")
        p = p_on_voltage(v, cdf)
    elif p_on is not None:
        if not 0.0 <= p_on <= 1.0:
            raise ValueError(f"p_on must be in [0, 1], got {p_on}")
        p = p_on
    else:
        p = params.rho

    state = expire(state, t)
    if state.on:
        # refresh: redraw the remaining lifetime
        return DeviceState(on=True, expires_at=t + sample_retention(params, rng))
    if rng.random() < p:
        return DeviceState(on=True, expires_at=t + sample_retention(params, rng))
    return state


def weight(state: DeviceState, params: DeviceParams) -> float:
    """Transmitted weight: r_on when ON, r_on / r_off_ratio when OFF."""
    if state.on:
        return params.r_on
    return params.r_on / params.r_off_ratio


class DeviceArray:
    """A bank of devices sharing one parameter set, updated with numpy.

    Functionally equivalent to per-device ``on_pre_spike``/``expire`` but
    vectorized for use inside network simulations. Draw order is fixed
    (switching uniforms first, then retention lognormals), so a given
    generator state yields a reproducible update.
    """

    def __init__(self, n: int, params: DeviceParams):
        self.params = params
        self.on = np.zeros(n, dtype=bool)
        self.expires_at = np.zeros(n, dtype=float)

    def __len__(self) -> int:
        return self.on.shape[0]

    def on_now(self, t: float) -> np.ndarray:
        """Live ON mask at time ``t``, with pending relaxations applied."""
        return self.on & (t < self.expires_at)

    def expire_check(self, t: float) -> None:
        """Relax every device whose retention ran out by ``t``."""
        self.on &= t < self.expires_at

    def stimulate(
        self,
        idx: np.ndarray,
        t: float,
        rng: np.random.Generator,
        p_on: float | None = None,
    ) -> None:
        """Apply one pulse to the devices listed in ``idx`` at time ``t``."""
        if idx.size == 0:
            return
        p = self.params.rho if p_on is None else p_on
        alive = self.on[idx] & (t < self.expires_at[idx])
        switch = rng.random(idx.size) < p
        now_on = alive | switch
        n_draws = int(now_on.sum())
        if n_draws:
            draws = np.maximum(
                rng.lognormal(self.params.mu_ret, self.params.sigma_ret, n_draws),
                MIN_RETENTION_MS,
            )
            self.expires_at[idx[now_on]] = t + draws
        self.on[idx] = now_on

    def weights(self, idx: np.ndarray) -> np.ndarray:
        """Transmitted weight of each device in ``idx`` (no relaxation check)."""
        w_off = self.params.r_on / self.params.r_off_ratio
        return np.where(self.on[idx], self.params.r_on, w_off)

    def states(self) -> list[DeviceState]:
        return [
            DeviceState(on=bool(o), expires_at=float(e))
            for o, e in zip(self.on, self.expires_at)
        ]
