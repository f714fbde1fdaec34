"""Two-dimensional lattice geometry: quantization, dithering, nested chains.

All lattices are described by a 2x2 generator matrix whose columns are the
basis vectors.  The canonical construction is the hexagonal lattice
``delta * [[1, 1/2], [0, sqrt(3)/2]]``, but every routine works for any
full-rank generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Relative tolerance for distance ties and lattice-membership checks.
# Coordinates are exact integer combinations scaled by delta, so this leaves
# several orders of magnitude of headroom even at delta = 1e-3.
REL_TOL = 1e-9

# Analytic per-dimension second moment of the unit hexagonal cell (delta = 1).
HEX_SECOND_MOMENT = 5.0 / 72.0


@dataclass(frozen=True)
class LatticeSpec:
    """A full-rank 2-D lattice given by its generator matrix (basis columns)."""

    generator: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.generator, dtype=float)
        if g.shape != (2, 2):
            raise ValueError(f"generator must be 2x2, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("generator must be finite")
        if abs(np.linalg.det(g)) <= 0.0:
            raise ValueError("generator must be full rank")
        g.setflags(write=False)
        object.__setattr__(self, "generator", g)

    @classmethod
    def hexagonal(cls, delta: float) -> "LatticeSpec":
        """Hexagonal lattice with minimum distance ``delta``."""
        if not (delta > 0 and np.isfinite(delta)):
            raise ValueError(f"delta must be a positive finite real, got {delta}")
        g = delta * np.array([[1.0, 0.5], [0.0, np.sqrt(3.0) / 2.0]])
        return cls(g)

    def scaled(self, c: float) -> "LatticeSpec":
        """The lattice c * Lambda."""
        return LatticeSpec(c * self.generator)

    @property
    def basis_scale(self) -> float:
        """Largest basis-vector norm; the natural length unit of the lattice."""
        return float(np.max(np.linalg.norm(self.generator, axis=0)))

    @property
    def cell_volume(self) -> float:
        return float(abs(np.linalg.det(self.generator)))


def _lex_select(points: np.ndarray, d2: np.ndarray, tol: float) -> np.ndarray:
    """Pick, per row, the candidate minimizing distance with lexicographic
    (x, then y) tie-breaking among candidates within ``tol`` of the minimum.

    points: (N, C, 2) candidate lattice points, d2: (N, C) squared distances.
    Returns (N, 2).
    """
    dmin = d2.min(axis=1, keepdims=True)
    tied = d2 <= dmin + tol
    big = np.inf
    xs = np.where(tied, points[..., 0], big)
    xmin = xs.min(axis=1, keepdims=True)
    # Among distance ties, restrict to minimal x (again within tol), then min y.
    xtied = tied & (points[..., 0] <= xmin + tol)
    ys = np.where(xtied, points[..., 1], big)
    idx = ys.argmin(axis=1)
    return points[np.arange(points.shape[0]), idx]


_OFFSETS = np.array([(i, j) for i in range(-2, 3) for j in range(-2, 3)], dtype=float)
_CHUNK = 1 << 16


def nearest_points(lat: LatticeSpec, x: np.ndarray) -> np.ndarray:
    """Vectorized closest-point map: rows of ``x`` (shape (..., 2)) to rows of
    lattice points.

    Solves coordinates in the lattice basis, rounds, then searches the 5x5
    integer-offset neighborhood of the rounded point; for near-orthogonal bases
    such as the hexagonal one this neighborhood contains the nearest point.
    Ties are broken deterministically by lexicographic (x, y) order.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("input to nearest_points must be finite")
    shape = x.shape
    flat = x.reshape(-1, 2)
    g = lat.generator
    tol = REL_TOL * lat.basis_scale**2
    out = np.empty_like(flat)
    # Chunked to keep the (N, 25, 2) candidate tensor cache-resident.
    for lo in range(0, flat.shape[0], _CHUNK):
        sl = flat[lo : lo + _CHUNK]
        z0 = np.rint(np.linalg.solve(g, sl.T).T)  # (n, 2)
        zc = z0[:, None, :] + _OFFSETS[None, :, :]  # (n, 25, 2)
        pc = zc @ g.T
        d2 = np.sum((pc - sl[:, None, :]) ** 2, axis=2)
        out[lo : lo + _CHUNK] = _lex_select(pc, d2, tol)
    return out.reshape(shape)


def nearest_point(lat: LatticeSpec, x) -> np.ndarray:
    """Closest lattice point to a single 2-vector (deterministic tie-break)."""
    return nearest_points(lat, np.asarray(x, dtype=float).reshape(1, 2))[0]


def sample_dither(lat: LatticeSpec, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw uniform samples from the fundamental Voronoi region.

    Samples uniformly in the fundamental parallelepiped of the generator and
    folds via ``d = x - Q(x)``; the fold of any fundamental-region-uniform
    sample is Voronoi-uniform.
    """
    n = 1 if size is None else int(size)
    u = rng.random((n, 2))
    x = u @ lat.generator.T
    d = x - nearest_points(lat, x)
    return d[0] if size is None else d


def second_moment(lat: LatticeSpec, num_samples: int = 10**6,
                  rng: np.random.Generator | None = None) -> float:
    """Monte Carlo estimate of the per-dimension second moment of the Voronoi
    region, i.e. (1 / (n vol)) * integral of ||v||^2 over the cell with n = 2.

    For the hexagonal lattice the analytic value is 5 delta^2 / 72
    (``HEX_SECOND_MOMENT`` at delta = 1).
    """
    if num_samples < 10**4:
        raise ValueError("num_samples must be at least 1e4")
    if rng is None:
        rng = np.random.default_rng(0x5ECD)
    d = sample_dither(lat, rng, size=num_samples)
    return float(np.mean(np.sum(d * d, axis=1)) / 2.0)


def inradius(lat: LatticeSpec) -> float:
    """Half the minimum nonzero lattice vector norm.

    For the hexagonal family this equals the Voronoi inradius.  The minimum is
    found by enumerating integer coordinates in [-2, 2]^2.
    """
    zs = np.array([(i, j) for i in range(-2, 3) for j in range(-2, 3) if (i, j) != (0, 0)])
    pts = zs @ lat.generator.T
    return float(np.min(np.linalg.norm(pts, axis=1)) / 2.0)


def covering_radius_estimate(lat: LatticeSpec, grid: int = 200) -> float:
    """Numeric estimate of the covering radius (max distance to the lattice),
    via folding a dense grid over the fundamental parallelepiped."""
    t = (np.arange(grid) + 0.5) / grid
    uu, vv = np.meshgrid(t, t)
    x = np.stack([uu.ravel(), vv.ravel()], axis=1) @ lat.generator.T
    d = x - nearest_points(lat, x)
    return float(np.max(np.linalg.norm(d, axis=1)))


@dataclass(frozen=True)
class NestedLatticeChain:
    """Chain of lattices Lambda_{l} = rho^(l-1) * Lambda_1, l = 1..L+1.

    Lambda_1 is the finest lattice; each coarser layer is an integer scaling of
    the previous one, so Lambda_{L+1} subset ... subset Lambda_1.
    """

    base: LatticeSpec
    rho: int
    num_layers: int

    def __post_init__(self):
        if int(self.rho) != self.rho or self.rho < 2:
            raise ValueError(f"rho must be an integer >= 2, got {self.rho}")
        if int(self.num_layers) != self.num_layers or self.num_layers < 1:
            raise ValueError(f"num_layers must be an integer >= 1, got {self.num_layers}")
        object.__setattr__(self, "rho", int(self.rho))
        object.__setattr__(self, "num_layers", int(self.num_layers))

    def layer_lattice(self, layer: int) -> LatticeSpec:
        """Lattice at 1-based ``layer``; valid up to num_layers + 1."""
        if not 1 <= layer <= self.num_layers + 1:
            raise ValueError(f"layer must be in [1, {self.num_layers + 1}], got {layer}")
        return self.base.scaled(float(self.rho ** (layer - 1)))

    def is_member(self, lat_layer: int, x: np.ndarray) -> bool:
        """Exact membership test: basis solve, then integer check at REL_TOL."""
        g = self.layer_lattice(lat_layer).generator
        z = np.linalg.solve(g, np.asarray(x, dtype=float))
        return bool(np.all(np.abs(z - np.rint(z)) < REL_TOL))


@dataclass(frozen=True)
class ConstellationSet:
    """The bounded per-layer constellation Lambda_l intersected with the
    (tie-broken) Voronoi region of Lambda_{l+1}."""

    layer_index: int
    points: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.points.shape[0]


def coset_constellation(chain: NestedLatticeChain, layer: int) -> ConstellationSet:
    """Enumerate the rho^2 coset representatives of Lambda_{l+1} in Lambda_l
    that quantize to the origin under the deterministic tie rule."""
    if not 1 <= layer <= chain.num_layers:
        raise ValueError(f"layer must be in [1, {chain.num_layers}], got {layer}")
    rho = chain.rho
    fine = chain.layer_lattice(layer)
    coarse = chain.layer_lattice(layer + 1)
    rng_z = range(-rho, rho + 1)
    zs = np.array([(i, j) for i in rng_z for j in rng_z], dtype=float)
    pts = zs @ fine.generator.T
    q = nearest_points(coarse, pts)
    keep = np.linalg.norm(q, axis=1) < REL_TOL * coarse.basis_scale
    reps = pts[keep]
    if reps.shape[0] != rho * rho:
        raise RuntimeError(
            f"expected {rho * rho} coset representatives, found {reps.shape[0]}"
        )
    order = np.lexsort((reps[:, 1], reps[:, 0]))
    pts_out = reps[order].copy()
    pts_out.setflags(write=False)
    return ConstellationSet(layer_index=layer, points=pts_out)


def max_radius(constellation: ConstellationSet) -> float:
    """Largest Euclidean norm over the constellation points (the paper's
    power-normalization radius when applied to layer 1)."""
    if len(constellation) == 0:
        raise ValueError("constellation must be non-empty")
    return float(np.max(np.linalg.norm(constellation.points, axis=1)))
