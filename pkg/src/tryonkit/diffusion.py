"""Diffusion sampling numerics: schedule, forward perturbation, PLMS sampler.

The forward process follows the variance-preserving convention,
z_t = sqrt(abar_t) z_0 + sqrt(1 - abar_t) noise.  Sampling is fully
deterministic: each transfer between timesteps is the noise-prediction
update

    z_prev = sqrt(abar_prev / abar_t) (z_t - sqrt(1 - abar_t) eps')
             + sqrt(1 - abar_prev) eps'

with eps' a linear multistep combination of recent noise predictions
(Adams-Bashforth coefficients, 4th order once four predictions exist, with
1st/2nd/3rd-order warmup).  The final transfer targets abar = 1, i.e. the
predicted clean latent.  All randomness flows through explicit seeds.

Denoisers are plain callables (latent, timestep) -> noise prediction and may
carry extra leading batch axes on the latent; every update is an elementwise
scalar operation, so trajectories batch transparently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "NoiseSchedule",
    "SamplerState",
    "make_linear_schedule",
    "forward_diffuse",
    "sdedit_init",
    "plms_sample",
    "gaussian_unit_denoiser",
]

# Adams-Bashforth coefficients, most recent prediction first.
_MULTISTEP_COEFFS = (
    np.array([1.0]),
    np.array([3.0, -1.0]) / 2.0,
    np.array([23.0, -16.0, 5.0]) / 12.0,
    np.array([55.0, -59.0, 37.0, -9.0]) / 24.0,
)


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-timestep beta and cumulative alpha-bar table."""

    steps: int
    beta: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self) -> None:
        beta = np.array(self.beta, dtype=np.float64, copy=True)
        abar = np.array(self.alpha_bar, dtype=np.float64, copy=True)
        if self.steps < 1:
            raise ValueError(f"schedule needs at least one step, got {self.steps}")
        if beta.shape != (self.steps,) or abar.shape != (self.steps,):
            raise ValueError("beta and alpha_bar must be length-`steps` vectors")
        if np.any(beta <= 0) or np.any(beta >= 1):
            raise ValueError("every beta must lie strictly in (0, 1)")
        if np.any(np.diff(beta) < 0):
            raise ValueError("beta must be monotone non-decreasing")
        if np.any(np.diff(abar) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        if abar[0] > 1.0:
            raise ValueError("alpha_bar must not exceed 1")
        expected = np.cumprod(1.0 - beta.astype(np.longdouble)).astype(np.float64)
        if not np.allclose(abar, expected, rtol=1e-10, atol=0.0):
            raise ValueError("alpha_bar is inconsistent with the cumulative product of 1 - beta")
        beta.flags.writeable = False
        abar.flags.writeable = False
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_bar", abar)


@dataclass
class SamplerState:
    """Mutable per-trajectory sampler state: latent, timestep, recent predictions."""

    latent: np.ndarray
    timestep: int
    eps_history: list[np.ndarray] = field(default_factory=list)

    def push(self, eps: np.ndarray) -> None:
        self.eps_history.append(eps)
        if len(self.eps_history) > 4:
            self.eps_history.pop(0)


def make_linear_schedule(steps: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    """Linearly interpolated beta schedule; alpha_bar accumulated in extended precision."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ValueError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    beta = np.linspace(beta_start, beta_end, steps, dtype=np.float64)
    alpha_bar = np.cumprod(np.longdouble(1.0) - beta.astype(np.longdouble)).astype(np.float64)
    return NoiseSchedule(steps=steps, beta=beta, alpha_bar=alpha_bar)


def _check_timestep(t: int, sched: NoiseSchedule) -> int:
    t = int(t)
    if not 0 <= t < sched.steps:
        raise ValueError(f"timestep {t} out of range [0, {sched.steps})")
    return t


def forward_diffuse(
    z0: np.ndarray, t: int, noise: np.ndarray, sched: NoiseSchedule
) -> np.ndarray:
    """Perturb a clean latent to timestep t: sqrt(abar_t) z0 + sqrt(1 - abar_t) noise."""
    t = _check_timestep(t, sched)
    z0 = np.asarray(z0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != z0.shape:
        raise ValueError(f"noise shape {noise.shape} must match latent shape {z0.shape}")
    abar = sched.alpha_bar[t]
    return np.sqrt(abar) * z0 + np.sqrt(1.0 - abar) * noise


def sdedit_init(
    encoded_input: np.ndarray, strength: float, sched: NoiseSchedule, seed: int
) -> tuple[np.ndarray, int]:
    """Partial-noising start: perturb a guide latent instead of using pure noise.

    The start timestep is round(strength * (T - 1)); strength 0 returns the
    guide unperturbed at timestep 0.  Noise is drawn from a generator seeded
    with `seed`, so results are bit-reproducible.
    """
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"strength must lie in [0, 1], got {strength}")
    encoded_input = np.asarray(encoded_input, dtype=np.float64)
    t0 = int(round(strength * (sched.steps - 1)))
    if strength == 0.0:
        return encoded_input.copy(), 0
    noise = np.random.default_rng(seed).standard_normal(encoded_input.shape)
    return forward_diffuse(encoded_input, t0, noise, sched), t0


def gaussian_unit_denoiser(sched: NoiseSchedule) -> Callable[[np.ndarray, int], np.ndarray]:
    """Optimal noise predictor for unit-normal data, in closed form.

    For z_0 ~ N(0, I) the posterior mean of the injected noise given
    z_t = sqrt(abar_t) z_0 + sqrt(1 - abar_t) eps is

        E[eps | z_t] = sqrt(1 - abar_t) z_t / (abar_t + (1 - abar_t)),

    whose denominator is identically 1.  Sampling with this predictor must
    return unit-normal outputs, which makes it a self-checking oracle.
    """

    def denoiser(z: np.ndarray, t: int) -> np.ndarray:
        abar = sched.alpha_bar[_check_timestep(t, sched)]
        return np.sqrt(1.0 - abar) / (abar + (1.0 - abar)) * z

    return denoiser


def _timestep_sequence(t_start: int, num_steps: int) -> list[int]:
    """Evenly spaced integer timesteps from t_start down to 0, duplicates merged."""
    raw = np.linspace(t_start, 0, num=num_steps)
    seq: list[int] = []
    for v in np.rint(raw).astype(int):
        if not seq or v != seq[-1]:
            seq.append(int(v))
    return seq


def plms_sample(
    denoiser: Callable[[np.ndarray, int], np.ndarray],
    z_start: np.ndarray,
    t_start: int,
    sched: NoiseSchedule,
    num_steps: int,
    order: int = 4,
) -> np.ndarray:
    """Deterministic pseudo linear multistep sampling from t_start down to clean.

    `order` caps the multistep combination (1 gives the plain first-order
    sampler used as a dense-step reference); the effective order also ramps up
    over the first steps while the prediction history fills.
    """
    if num_steps < 1:
        raise ValueError(f"num_steps must be >= 1, got {num_steps}")
    if not 1 <= order <= 4:
        raise ValueError(f"order must lie in [1, 4], got {order}")
    t_start = _check_timestep(t_start, sched)

    seq = _timestep_sequence(t_start, num_steps)
    if not seq:
        raise ValueError("empty timestep sequence")

    state = SamplerState(latent=np.asarray(z_start, dtype=np.float64).copy(), timestep=seq[0])
    for i, t in enumerate(seq):
        state.timestep = t
        eps = np.asarray(denoiser(state.latent, t), dtype=np.float64)
        if eps.shape != state.latent.shape:
            raise ValueError(
                f"denoiser output shape {eps.shape} must match latent {state.latent.shape}"
            )
        if not np.all(np.isfinite(eps)):
            raise ValueError(f"non-finite denoiser output at step {i} (timestep {t})")
        state.push(eps)

        coeffs = _MULTISTEP_COEFFS[min(order, len(state.eps_history)) - 1]
        eps_prime = np.zeros_like(eps)
        for c, e in zip(coeffs, reversed(state.eps_history[-len(coeffs):])):
            eps_prime += c * e

        abar_cur = sched.alpha_bar[t]
        abar_prev = sched.alpha_bar[seq[i + 1]] if i + 1 < len(seq) else 1.0
        state.latent = np.sqrt(abar_prev / abar_cur) * (
            state.latent - np.sqrt(1.0 - abar_cur) * eps_prime
        ) + np.sqrt(1.0 - abar_prev) * eps_prime
        if not np.all(np.isfinite(state.latent)):
            raise ValueError(f"latent diverged (non-finite) at step {i} (timestep {t})")
    return state.latent
