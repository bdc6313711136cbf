"""Current-based leaky integrate-and-fire neuron, Euler-stepped at 1 ms.

Synaptic input arrives as delta kicks in mV added to the membrane once per
step; an optional Gaussian term (mean, std in mV per step) models background
noise. After a threshold crossing the membrane is reset and held at the reset
potential for the refractory period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = ["LifParams", "LifState", "lif_step", "LifPopulation"]


@dataclass(frozen=True)
class LifParams:
    tau_m: float  # membrane time constant, ms
    u_rest: float  # resting potential, mV
    theta: float  # firing threshold, mV
    u_reset: float  # post-spike reset, mV
    t_refrac: float = 2.0  # ms
    noise_mean: float = 0.0  # mV per step
    noise_std: float = 0.0  # mV per step

    def __post_init__(self) -> None:
        if not self.tau_m > 0:
            raise ValueError(f"tau_m must be > 0, got {self.tau_m}")
        if not self.theta > self.u_reset:
            raise ValueError("theta must exceed u_reset")
        if self.t_refrac < 0:
            raise ValueError(f"t_refrac must be >= 0, got {self.t_refrac}")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")


@dataclass(frozen=True)
class LifState:
    u: float
    refrac_until: float = -math.inf


def lif_step(
    state: LifState,
    i_in: float,
    t: float,
    dt: float,
    params: LifParams,
    rng: np.random.Generator | None = None,
) -> tuple[LifState, bool]:
    """Advance one neuron by one step; returns (new state, spiked).

    While refractory (t <= refrac_until) the membrane is held at the reset
    potential and inputs are discarded. Otherwise the membrane leaks toward
    rest, receives the summed synaptic kick ``i_in`` plus one noise draw, and
    spikes when it reaches threshold; a spike at time t silences the neuron
    through t + t_refrac.
    """
    if t <= state.refrac_until:
        return replace(state, u=params.u_reset), False
    noise = 0.0
    if params.noise_std > 0 or params.noise_mean != 0.0:
        if rng is None:
            raise ValueError("noisy neuron needs a generator")
        noise = params.noise_mean + params.noise_std * rng.standard_normal()
    u = state.u + dt * (-(state.u - params.u_rest) / params.tau_m) + i_in + noise
    if u >= params.theta:
        return LifState(u=params.u_reset, refrac_until=t + params.t_refrac), True
    return replace(state, u=u), False


class LifPopulation:
    """Vectorized bank of identical LIF neurons.

    Matches ``lif_step`` semantics per neuron. One noise vector is drawn per
    step for the whole bank (refractory members discard theirs), so the
    generator stream advances by a fixed amount per step.
    """

    def __init__(self, n: int, params: LifParams):
        self.params = params
        self.u = np.full(n, params.u_rest, dtype=float)
        self.refrac_until = np.full(n, -math.inf)

    def __len__(self) -> int:
        return self.u.shape[0]

    def step(
        self,
        i_in: np.ndarray,
        t: float,
        dt: float,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        p = self.params
        active = t > self.refrac_until
        if p.noise_std > 0 or p.noise_mean != 0.0:
            if rng is None:
                raise ValueError("noisy population needs a generator")
            noise = p.noise_mean + p.noise_std * rng.standard_normal(len(self))
        else:
            noise = 0.0
        du = dt * (-(self.u - p.u_rest) / p.tau_m) + i_in + noise
        self.u = np.where(active, self.u + du, p.u_reset)
        spiked = active & (self.u >= p.theta)
        self.u[spiked] = p.u_reset
        self.refrac_until[spiked] = t + p.t_refrac
        return spiked
