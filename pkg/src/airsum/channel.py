"""Gaussian and Rayleigh-fading multiple-access channel models.

The fading model follows the real-valued stacking convention: an M-antenna
complex channel becomes a 2M x K real matrix with the real parts of the
coefficients in the top block and the imaginary parts below, acting on
real-valued device signals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise, ``sigma_n`` per real dimension."""

    sigma_n: float
    power: float = 1.0

    def __post_init__(self):
        if not (self.sigma_n >= 0 and np.isfinite(self.sigma_n)):
            raise ValueError(f"sigma_n must be nonnegative, got {self.sigma_n}")
        if not (self.power > 0 and np.isfinite(self.power)):
            raise ValueError(f"power must be positive, got {self.power}")

    @classmethod
    def from_snr_db(cls, snr_db: float, power: float = 1.0) -> "NoiseSpec":
        snr = 10.0 ** (snr_db / 10.0)
        return cls(sigma_n=float(np.sqrt(power / snr)), power=power)

    @property
    def snr(self) -> float:
        """SNR = P / sigma_n^2."""
        return self.power / self.sigma_n**2


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the M x K complex fading matrix plus its real stacking."""

    h_complex: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h_complex, dtype=complex)
        if h.ndim != 2:
            raise ValueError(f"h_complex must be 2-D (M x K), got shape {h.shape}")
        h.setflags(write=False)
        object.__setattr__(self, "h_complex", h)

    @property
    def num_devices(self) -> int:
        return self.h_complex.shape[1]

    @property
    def num_antennas(self) -> int:
        return self.h_complex.shape[0]

    @property
    def h_real(self) -> np.ndarray:
        """Real 2M x K matrix: Re block stacked over Im block."""
        return np.vstack([self.h_complex.real, self.h_complex.imag])


def draw_fading(K: int, M: int, rng: np.random.Generator) -> ChannelRealization:
    """I.i.d. zero-mean unit-variance complex Gaussian coefficients
    (Re and Im each with variance 1/2)."""
    if K < 1 or M < 1:
        raise ValueError(f"K and M must be >= 1, got K={K}, M={M}")
    re = rng.standard_normal((M, K))
    im = rng.standard_normal((M, K))
    return ChannelRealization((re + 1j * im) / np.sqrt(2.0))


def gaussian_mac(tx: np.ndarray, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """Ideal superposition channel: sum of the K device signals plus AWGN.

    ``tx`` has shape (K, n); returns the length-n received vector.
    """
    tx = np.asarray(tx, dtype=float)
    if not np.all(np.isfinite(tx)):
        raise ValueError("transmit signals must be finite")
    y = tx.sum(axis=0)
    if noise.sigma_n > 0:
        y = y + noise.sigma_n * rng.standard_normal(y.shape)
    return y


def fading_mac(
    tx: np.ndarray,
    ch: ChannelRealization,
    noise: NoiseSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Y = H U + N on the real-valued stacked model.

    ``tx`` is the K x n matrix of device row signals; returns the 2M x n
    received matrix with i.i.d. Gaussian noise per real entry.
    """
    u = np.asarray(tx, dtype=float)
    if u.ndim != 2 or u.shape[0] != ch.num_devices:
        raise ValueError(
            f"tx must be (K, n) with K={ch.num_devices}, got shape {u.shape}"
        )
    y = ch.h_real @ u
    if noise.sigma_n > 0:
        y = y + noise.sigma_n * rng.standard_normal(y.shape)
    return y
