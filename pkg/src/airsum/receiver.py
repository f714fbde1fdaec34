"""Equalization and decoding algebra for the fading MAC.

All effective-noise variances follow the convention

    sigma_e^2(a) = P * a^T (I + SNR * H^T H)^(-1) a,

which makes the direct form P ||b^T H - a^T||^2 + sigma_n^2 ||b||^2 evaluated
at the optimal equalizer agree exactly with the quadratic form, and keeps the
reliability comparison against sqrt(P) / (c_g * rho) dimensionally consistent.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .codec import EncoderConfig, decode_layer

DEFAULT_CG = 3.0


@dataclass(frozen=True)
class EffectiveNoiseContext:
    """Channel-dependent quadratic form Q = (I + SNR H^T H)^(-1) plus the
    solvers needed by the equalizers.  ``h`` is the real 2M x K matrix."""

    h: np.ndarray
    snr: float
    power: float = 1.0

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.ndim != 2:
            raise ValueError(f"h must be 2-D (2M x K), got shape {h.shape}")
        if not (self.snr > 0 and np.isfinite(self.snr)):
            raise ValueError(f"snr must be positive and finite, got {self.snr}")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @property
    def num_devices(self) -> int:
        return self.h.shape[1]

    @cached_property
    def q(self) -> np.ndarray:
        """(I + SNR H^T H)^(-1); symmetric positive definite, eigenvalues in
        (0, 1]."""
        k = self.num_devices
        q = np.linalg.inv(np.eye(k) + self.snr * (self.h.T @ self.h))
        return 0.5 * (q + q.T)

    @cached_property
    def _gram_rows(self) -> np.ndarray:
        # Cholesky-friendly system (1/SNR) I + H H^T used by the equalizers;
        # this is the smaller system whenever 2M < K.
        m2 = self.h.shape[0]
        return np.eye(m2) / self.snr + self.h @ self.h.T

    def sigma_e_sq(self, a: np.ndarray) -> float:
        """sigma_e^2(a) = P a^T Q a."""
        a = np.asarray(a, dtype=float)
        return float(self.power * a @ self.q @ a)


def b_opt(ctx: EffectiveNoiseContext, a: np.ndarray) -> np.ndarray:
    """Optimal equalizer for decoding the integer combination a^T U:
    b = ((1/SNR) I + H H^T)^(-1) H a."""
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        raise ValueError("coefficient vector must be nonzero")
    return np.linalg.solve(ctx._gram_rows, ctx.h @ a)


def effective_noise_var(ctx: EffectiveNoiseContext, a: np.ndarray, b: np.ndarray) -> float:
    """P ||b^T H - a^T||^2 + sigma_n^2 ||b||^2 for an arbitrary equalizer."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mismatch = ctx.h.T @ b - a
    sigma_n_sq = ctx.power / ctx.snr
    return float(ctx.power * mismatch @ mismatch + sigma_n_sq * b @ b)


def sigma_e_direct(ctx: EffectiveNoiseContext) -> float:
    """Effective noise variance of decoding the all-ones target directly."""
    return ctx.sigma_e_sq(np.ones(ctx.num_devices))


def successive_combiner(
    ctx: EffectiveNoiseContext, a0: np.ndarray
) -> tuple[float, np.ndarray, float]:
    """Optimal side-information combiner for the all-ones target given a
    previously decoded combination a0^T U.

    Returns ``(beta, b_s, sigma2_cond)`` where beta = (a0^T Q 1)/(a0^T Q a0),
    b_s equalizes the residual target (1 - beta a0), and sigma2_cond =
    P (beta a0 - 1)^T Q (beta a0 - 1) <= sigma_e^2(1) always.
    """
    a0 = np.asarray(a0, dtype=float)
    if not np.any(a0):
        raise ValueError("side-information coefficient vector must be nonzero")
    ones = np.ones(ctx.num_devices)
    qa0 = ctx.q @ a0
    beta = float(qa0 @ ones / (qa0 @ a0))
    target = ones - beta * a0
    b_s = np.linalg.solve(ctx._gram_rows, ctx.h @ target)
    mism = beta * a0 - ones
    sigma2_cond = float(ctx.power * mism @ ctx.q @ mism)
    return beta, b_s, sigma2_cond


def decode_integer_function(
    y: np.ndarray,
    b: np.ndarray,
    cfg: EncoderConfig,
    layer: int,
    side_signal: np.ndarray | None = None,
    beta: float = 0.0,
) -> np.ndarray:
    """Equalize the 2M x n received matrix and lattice-decode per 2-dim block.

    The successive path adds ``beta * side_signal`` (the previously decoded
    combination, already in transmit units) before quantization.  Returns the
    decoded integer-combination lattice points, shape (n/2, 2).
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(b, dtype=float) @ y
    if side_signal is not None:
        z = z + beta * np.asarray(side_signal, dtype=float)
    if z.size % 2:
        raise ValueError("signal length must be a multiple of 2")
    return decode_layer(z.reshape(-1, 2), cfg, layer)


def reliability_margin(sigma_e: float, power: float, rho: int, c_g: float = DEFAULT_CG) -> float:
    """Geometric reliability headroom sqrt(P) / (c_g * rho) - sigma_e.

    Positive margin predicts reliable lattice decoding; c_g is the Gaussian
    concentration multiplier (3 covers 99.73% of the noise mass), which puts
    the Gaussian-MAC threshold at SNR = (c_g * rho)^2, about 19.1 dB for
    rho = 3.
    """
    if not (sigma_e >= 0 and power > 0 and rho >= 1 and c_g > 0):
        raise ValueError("sigma_e must be >= 0 and power, rho, c_g positive")
    return float(np.sqrt(power) / (c_g * rho) - sigma_e)
