"""Device-side layered encoding and fusion-side reconstruction.

Encoding pipeline per device: normalize -> dither -> quantize to the finest
lattice -> decompose into per-layer coset components -> scale each layer onto
the common bounded transmit constellation.  Reconstruction: per-layer lattice
decode -> sum layers -> subtract dithers -> inverse map.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .lattice import (
    LatticeSpec,
    NestedLatticeChain,
    coset_constellation,
    inradius,
    max_radius,
    nearest_points,
    sample_dither,
)


class EncodingRangeError(RuntimeError):
    """Raised when a quantized point falls outside the Voronoi region of the
    outer lattice, i.e. the layer count / resolution is misconfigured."""


@dataclass(frozen=True)
class EncoderConfig:
    """Shared encoder/decoder parameters.

    ``power`` is the per-dimension transmit budget P; the constellation scale
    alpha = sqrt(n P) / R2 (n = 2) is always recomputed from the chain, never
    stored, so it cannot go stale.
    """

    chain: NestedLatticeChain
    power: float = 1.0
    map_kind: str = "identity"

    def __post_init__(self):
        if not (self.power > 0 and np.isfinite(self.power)):
            raise ValueError(f"power must be positive and finite, got {self.power}")
        if self.map_kind != "identity":
            raise ValueError(f"unsupported map_kind {self.map_kind!r}")

    @cached_property
    def r2(self) -> float:
        """Max norm over the layer-1 constellation (Lambda_1 within V_2)."""
        return max_radius(coset_constellation(self.chain, 1))

    @cached_property
    def alpha(self) -> float:
        return np.sqrt(2.0 * self.power) / self.r2

    def layer_gain(self, layer: int) -> float:
        """Transmit scaling alpha / rho^(layer-1) for the given 1-based layer."""
        return self.alpha / self.chain.rho ** (layer - 1)


@dataclass(frozen=True)
class LayeredCodeword:
    device_id: int
    x_quantized: np.ndarray          # point of Lambda_1
    layer_components: np.ndarray     # (L, 2), layer l component in Lambda_l
    tx_symbols: np.ndarray           # (L, 2), scaled onto the common constellation
    dither: np.ndarray               # (2,)


def normalize(u: np.ndarray, cfg: EncoderConfig) -> np.ndarray:
    """Input normalization map; only the identity map is shipped."""
    return np.asarray(u, dtype=float)


def denormalize(v: np.ndarray, cfg: EncoderConfig) -> np.ndarray:
    """Inverse of :func:`normalize`."""
    return np.asarray(v, dtype=float)


def min_layers_required(base: LatticeSpec, rho: int, source_bound: float) -> int:
    """Smallest L such that the ball of radius ``source_bound`` fits inside the
    inscribed ball of the outer Voronoi region: rho^L * inradius >= bound.
    Clamped to at least one layer."""
    if not (source_bound > 0 and np.isfinite(source_bound)):
        raise ValueError(f"source_bound must be positive, got {source_bound}")
    r_in = inradius(base)
    num = 0
    while rho**num * r_in < source_bound:
        num += 1
        if num > 64:
            raise ValueError("source bound unreachable; check delta and rho")
    return max(num, 1)


def decompose_layers(chain: NestedLatticeChain, x: np.ndarray) -> np.ndarray:
    """Split points of Lambda_1 (rows of ``x``, shape (N, 2)) into the L
    per-layer coset components whose sum telescopes back to x exactly.

    Successively peels the residue: the layer-l component is the (tie-broken)
    remainder of the running coarse residue modulo Lambda_{l+1}.  The final
    residue must be zero, which is exactly the x in V_{L+1} condition.

    Returns (L, N, 2); raises :class:`EncodingRangeError` naming the offending
    rows otherwise.
    """
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, 2)
    comps = np.empty((chain.num_layers, flat.shape[0], 2))
    residue = flat
    for layer in range(1, chain.num_layers + 1):
        coarse = nearest_points(chain.layer_lattice(layer + 1), residue)
        comps[layer - 1] = residue - coarse
        residue = coarse
    bad = np.linalg.norm(residue, axis=1) > 1e-9 * chain.base.basis_scale
    if np.any(bad):
        raise EncodingRangeError(
            f"quantized points outside the outer Voronoi region at rows "
            f"{np.flatnonzero(bad).tolist()}; increase num_layers or delta"
        )
    return comps


def encode_devices(
    inputs: np.ndarray,
    cfg: EncoderConfig,
    rng: np.random.Generator,
    dithers: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Encode a batch of device inputs (shape (K, 2)) in one shot.

    Returns ``(x, comps, tx, dithers)`` with x (K, 2) the quantized finest
    lattice points, comps (L, K, 2) the layer components and tx (L, K, 2) the
    transmitted symbols.
    """
    inputs = np.asarray(inputs, dtype=float)
    k = inputs.shape[0]
    base = cfg.chain.base
    if dithers is None:
        dithers = sample_dither(base, rng, size=k)
    else:
        dithers = np.asarray(dithers, dtype=float).reshape(k, 2)
    v = normalize(inputs, cfg)
    x = nearest_points(base, v + dithers)
    comps = decompose_layers(cfg.chain, x)
    gains = np.array([cfg.layer_gain(l) for l in range(1, cfg.chain.num_layers + 1)])
    tx = gains[:, None, None] * comps
    return x, comps, tx, dithers


def encode_device(
    u: np.ndarray,
    cfg: EncoderConfig,
    rng: np.random.Generator,
    dither: np.ndarray | None = None,
    device_id: int = 0,
) -> LayeredCodeword:
    """Single-device convenience wrapper around :func:`encode_devices`."""
    d = None if dither is None else np.asarray(dither, dtype=float).reshape(1, 2)
    try:
        x, comps, tx, dithers = encode_devices(
            np.asarray(u, dtype=float).reshape(1, 2), cfg, rng, dithers=d
        )
    except EncodingRangeError as exc:
        raise EncodingRangeError(f"device {device_id}: {exc}") from None
    return LayeredCodeword(
        device_id=device_id,
        x_quantized=x[0],
        layer_components=comps[:, 0, :],
        tx_symbols=tx[:, 0, :],
        dither=dithers[0],
    )


def decode_layer(equalized: np.ndarray, cfg: EncoderConfig, layer: int) -> np.ndarray:
    """Map the (noisy) layer observation back to the integer-combination
    lattice point: (rho^(l-1) / alpha) * Q_{alpha Lambda_1}(equalized).

    Accepts a single 2-vector or a batch (..., 2); never fails structurally,
    noise beyond the Voronoi cell shows up as a wrong (nearby) lattice point.
    """
    eq = np.asarray(equalized, dtype=float)
    scale = cfg.chain.rho ** (layer - 1)
    return scale * nearest_points(cfg.chain.base, eq / cfg.alpha)


def aggregate_and_finalize(
    per_layer: list[np.ndarray] | np.ndarray,
    dithers: np.ndarray,
    cfg: EncoderConfig,
) -> np.ndarray:
    """Sum the decoded per-layer functions, strip the dithers and invert the
    normalization map."""
    per_layer = np.asarray(per_layer, dtype=float)
    if per_layer.shape[0] != cfg.chain.num_layers:
        raise ValueError(
            f"expected {cfg.chain.num_layers} layer entries, got {per_layer.shape[0]}"
        )
    dithers = np.asarray(dithers, dtype=float)
    s = per_layer.sum(axis=0) - dithers.sum(axis=0)
    return denormalize(s, cfg)
