"""Monte Carlo orchestration: scenario configs, trial execution, SNR sweeps,
CSV persistence and deterministic seeding.

Every trial derives its own RNG from (master_seed, snr point, trial index), so
sweeps are reproducible bit-for-bit regardless of worker count, and any single
trial can be replayed in isolation.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from functools import lru_cache, partial

import numpy as np

from .channel import NoiseSpec, draw_fading, fading_mac, gaussian_mac
from .codec import (
    EncoderConfig,
    decode_layer,
    encode_devices,
    min_layers_required,
)
from .coeff_select import (
    CoefficientPlan,
    collective_two_group_search,
    direct_plan,
    group_devices,
    successive_two_group_search,
)
from .lattice import LatticeSpec, NestedLatticeChain, covering_radius_estimate
from .receiver import (
    EffectiveNoiseContext,
    b_opt,
    decode_integer_function,
    successive_combiner,
)

SCHEMES = ("direct", "collective", "successive", "analog_baseline")

_U64 = (1 << 64) - 1
_SNR_OFFSET = 1 << 31  # keeps milli-dB seed entropy nonnegative


class ConfigError(ValueError):
    """Invalid or unknown scenario configuration fields."""


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation scenario.  ``M = 0`` selects the Gaussian MAC;
    ``num_layers = 0`` sizes the layer count automatically from the source
    domain ([-1, 1] per dimension plus dither headroom)."""

    K: int
    delta: float
    rho: int
    M: int = 0
    num_layers: int = 0
    power: float = 1.0
    c_g: float = 3.0
    snr_db_list: tuple[float, ...] = tuple(float(s) for s in range(0, 41, 2))
    trials: int = 2000
    master_seed: int = 0
    scheme: str = "direct"
    a_max: int = 3
    tau_quantile: float = 0.5
    blocks_per_input: int = 1

    def __post_init__(self):
        object.__setattr__(self, "snr_db_list", tuple(float(s) for s in self.snr_db_list))
        if self.K < 1:
            raise ConfigError(f"K: must be >= 1, got {self.K}")
        if not (self.delta > 0):
            raise ConfigError(f"delta: must be positive, got {self.delta}")
        if self.rho < 2:
            raise ConfigError(f"rho: must be >= 2, got {self.rho}")
        if self.M < 0:
            raise ConfigError(f"M: must be >= 0 (0 = Gaussian MAC), got {self.M}")
        if self.num_layers < 0:
            raise ConfigError(f"num_layers: must be >= 0 (0 = auto), got {self.num_layers}")
        if not (self.power > 0):
            raise ConfigError(f"power: must be positive, got {self.power}")
        if not (self.c_g > 0):
            raise ConfigError(f"c_g: must be positive, got {self.c_g}")
        if len(self.snr_db_list) == 0:
            raise ConfigError("snr_db_list: must be non-empty")
        if self.trials < 1:
            raise ConfigError(f"trials: must be >= 1, got {self.trials}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme: must be one of {SCHEMES}, got {self.scheme!r}")
        if self.a_max < 1:
            raise ConfigError(f"a_max: must be >= 1, got {self.a_max}")
        if not (0.0 < self.tau_quantile < 1.0):
            raise ConfigError(f"tau_quantile: must be in (0, 1), got {self.tau_quantile}")
        if self.blocks_per_input < 1:
            raise ConfigError(f"blocks_per_input: must be >= 1, got {self.blocks_per_input}")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def replace(self, **kwargs) -> "ScenarioConfig":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(kwargs)
        return ScenarioConfig(**vals)


@lru_cache(maxsize=32)
def resolve_num_layers(delta: float, rho: int, num_layers: int) -> int:
    """Explicit layer count, or the smallest count that keeps the source ball
    (radius sqrt(2) per 2-dim block, padded by dither and quantization
    displacement) inside the outer Voronoi region."""
    if num_layers > 0:
        return num_layers
    base = LatticeSpec.hexagonal(delta)
    bound = np.sqrt(2.0) + 2.0 * covering_radius_estimate(base)
    return min_layers_required(base, rho, bound)


@lru_cache(maxsize=32)
def encoder_for(delta: float, rho: int, num_layers: int, power: float) -> EncoderConfig:
    layers = resolve_num_layers(delta, rho, num_layers)
    chain = NestedLatticeChain(base=LatticeSpec.hexagonal(delta), rho=rho, num_layers=layers)
    return EncoderConfig(chain=chain, power=power)


def trial_rng(cfg: ScenarioConfig, snr_db: float, trial_index: int) -> np.random.Generator:
    """Deterministic per-trial generator from (master seed, SNR point, trial)."""
    snr_key = (int(round(snr_db * 1000.0)) + _SNR_OFFSET) & _U64
    seq = np.random.SeedSequence([cfg.master_seed & _U64, snr_key, int(trial_index)])
    return np.random.default_rng(seq)


@dataclass(frozen=True)
class TrialRecord:
    sq_err_per_dim: float
    decode_errors: int = 0
    decode_total: int = 0
    sigma_sum: float = 0.0   # sum of per-layer predicted effective sigmas
    sigma_count: int = 0


@dataclass(frozen=True)
class SweepPoint:
    snr_db: float
    scheme: str
    mse_per_dim: float
    decode_error_rate: float
    mean_effective_sigma: float
    trials: int
    seed: int


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...] = ()

    def rows(self) -> list[SweepPoint]:
        return sorted(self.points, key=lambda p: (p.scheme, p.snr_db))


def _count_mismatch(decoded: np.ndarray, truth: np.ndarray, tol: float) -> int:
    """Number of 2-dim blocks whose decoded lattice point differs from the
    noiseless integer combination."""
    return int(np.sum(np.any(np.abs(decoded - truth) > tol, axis=-1)))


def _plan_for_layer(cfg: ScenarioConfig, ctx: EffectiveNoiseContext) -> CoefficientPlan:
    if cfg.scheme == "direct" or cfg.K < 2:
        return direct_plan(ctx)
    groups = group_devices(ctx, cfg.tau_quantile)
    if cfg.scheme == "collective":
        plan = collective_two_group_search(ctx, groups, cfg.a_max)
        # The two-group min-max is not guaranteed to beat decoding the target
        # directly; never let the heuristic hurt the simulator.
        if plan.objective > plan.sigma_direct:
            return direct_plan(ctx, groups)
        return plan
    if cfg.scheme == "successive":
        return successive_two_group_search(ctx, groups, cfg.a_max)
    raise ConfigError(f"scheme {cfg.scheme!r} has no coefficient plan")


def run_trial(cfg: ScenarioConfig, snr_db: float, trial_index: int) -> TrialRecord:
    """One end-to-end Monte Carlo trial of the layered digital pipeline."""
    if cfg.scheme == "analog_baseline":
        return analog_baseline_trial(cfg, snr_db, trial_index)
    rng = trial_rng(cfg, snr_db, trial_index)
    enc = encoder_for(cfg.delta, cfg.rho, cfg.num_layers, cfg.power)
    noise = NoiseSpec.from_snr_db(snr_db, cfg.power)
    k, nblocks = cfg.K, cfg.blocks_per_input
    num_layers = enc.chain.num_layers

    inputs = rng.uniform(-1.0, 1.0, size=(k, 2 * nblocks))
    # Each 2-dim block is encoded independently; blocks of one device share a
    # channel use within a layer.
    _, comps, tx, dithers = encode_devices(inputs.reshape(k * nblocks, 2), enc, rng)
    comps = comps.reshape(num_layers, k, nblocks, 2)
    tx_rows = tx.reshape(num_layers, k, 2 * nblocks)
    dither_sum = dithers.reshape(k, nblocks, 2).sum(axis=0)  # (B, 2)

    err_tol = 1e-6 * cfg.delta
    decode_errors = 0
    decode_total = 0
    sigma_sum = 0.0
    layer_sums = np.zeros((nblocks, 2))

    for layer in range(1, num_layers + 1):
        truth_target = comps[layer - 1].sum(axis=0)  # (B, 2)
        tol = err_tol * cfg.rho ** (layer - 1)
        if cfg.M == 0:
            y = gaussian_mac(tx_rows[layer - 1], noise, rng)
            s = decode_layer(y.reshape(nblocks, 2), enc, layer)
            decode_errors += _count_mismatch(s, truth_target, tol)
            decode_total += nblocks
            sigma_sum += noise.sigma_n
        else:
            ch = draw_fading(cfg.K, cfg.M, rng)
            y = fading_mac(tx_rows[layer - 1], ch, noise, rng)
            ctx = EffectiveNoiseContext(h=ch.h_real, snr=noise.snr, power=cfg.power)
            plan = _plan_for_layer(cfg, ctx)
            sigma_sum += float(np.sqrt(plan.objective))
            if plan.scheme == "collective":
                s = np.zeros((nblocks, 2))
                for i in range(plan.a_matrix.shape[1]):
                    a_i = plan.a_matrix[:, i]
                    s_i = decode_integer_function(y, b_opt(ctx, a_i), enc, layer)
                    truth_i = np.einsum("k,kbd->bd", a_i, comps[layer - 1])
                    decode_errors += _count_mismatch(s_i, truth_i, tol)
                    decode_total += nblocks
                    s = s + plan.c[i] * s_i
            elif plan.scheme == "successive":
                s0 = decode_integer_function(y, b_opt(ctx, plan.a0), enc, layer)
                truth_side = np.einsum("k,kbd->bd", plan.a0, comps[layer - 1])
                decode_errors += _count_mismatch(s0, truth_side, tol)
                decode_total += nblocks
                beta, b_s, _ = successive_combiner(ctx, plan.a0)
                side_signal = (enc.layer_gain(layer) * s0).reshape(-1)
                s = decode_integer_function(
                    y, b_s, enc, layer, side_signal=side_signal, beta=beta
                )
                decode_errors += _count_mismatch(s, truth_target, tol)
                decode_total += nblocks
            else:  # direct
                b = b_opt(ctx, np.ones(cfg.K))
                s = decode_integer_function(y, b, enc, layer)
                decode_errors += _count_mismatch(s, truth_target, tol)
                decode_total += nblocks
        layer_sums += s

    estimate = layer_sums - dither_sum
    target = inputs.reshape(k, nblocks, 2).sum(axis=0)
    sq_err = float(np.sum((estimate - target) ** 2)) / (2 * nblocks)
    return TrialRecord(
        sq_err_per_dim=sq_err,
        decode_errors=decode_errors,
        decode_total=decode_total,
        sigma_sum=sigma_sum,
        sigma_count=num_layers,
    )


def analog_baseline_trial(cfg: ScenarioConfig, snr_db: float, trial_index: int) -> TrialRecord:
    """Uncoded analog transmission with the same linear receiver.

    Devices send gamma * v_k with gamma = sqrt(3 P) (uniform [-1, 1] sources
    have per-dimension power 1/3, so the budget is met with equality); the
    fusion center divides the equalized superposition by gamma.  One channel
    use, no layers, no quantization floor.
    """
    rng = trial_rng(cfg, snr_db, trial_index)
    noise = NoiseSpec.from_snr_db(snr_db, cfg.power)
    k, nblocks = cfg.K, cfg.blocks_per_input
    gamma = np.sqrt(3.0 * cfg.power)
    inputs = rng.uniform(-1.0, 1.0, size=(k, 2 * nblocks))
    tx = gamma * inputs
    if cfg.M == 0:
        y = gaussian_mac(tx, noise, rng)
        estimate = y / gamma
        sigma = noise.sigma_n
    else:
        ch = draw_fading(cfg.K, cfg.M, rng)
        y = fading_mac(tx, ch, noise, rng)
        ctx = EffectiveNoiseContext(h=ch.h_real, snr=noise.snr, power=cfg.power)
        b = b_opt(ctx, np.ones(k))
        estimate = (b @ y) / gamma
        sigma = float(np.sqrt(ctx.sigma_e_sq(np.ones(k))))
    target = inputs.sum(axis=0)
    sq_err = float(np.sum((estimate - target) ** 2)) / (2 * nblocks)
    return TrialRecord(sq_err_per_dim=sq_err, sigma_sum=sigma, sigma_count=1)


def _run_point(cfg: ScenarioConfig, snr_db: float, trial_index: int) -> TrialRecord:
    return run_trial(cfg, snr_db, trial_index)


def run_sweep(cfg: ScenarioConfig, workers: int = 1) -> SweepResult:
    """Average ``cfg.trials`` independent trials at every SNR point.

    Trials are independent given their derived seeds, so they may be farmed
    out to worker processes; aggregation iterates in trial order either way,
    keeping the output identical for any worker count.
    """
    points = []
    for snr_db in cfg.snr_db_list:
        fn = partial(_run_point, cfg, snr_db)
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                records = list(
                    pool.map(fn, range(cfg.trials), chunksize=max(1, cfg.trials // (workers * 8)))
                )
        else:
            records = [fn(i) for i in range(cfg.trials)]
        mse = sum(r.sq_err_per_dim for r in records) / cfg.trials
        total = sum(r.decode_total for r in records)
        errors = sum(r.decode_errors for r in records)
        sig_count = sum(r.sigma_count for r in records)
        points.append(
            SweepPoint(
                snr_db=snr_db,
                scheme=cfg.scheme,
                mse_per_dim=mse,
                decode_error_rate=(errors / total) if total else 0.0,
                mean_effective_sigma=(
                    sum(r.sigma_sum for r in records) / sig_count if sig_count else 0.0
                ),
                trials=cfg.trials,
                seed=cfg.master_seed,
            )
        )
    return SweepResult(points=tuple(points))


def merge_results(*results: SweepResult) -> SweepResult:
    pts = tuple(p for r in results for p in r.points)
    return SweepResult(points=pts)


CSV_HEADER = "snr_db,scheme,mse_per_dim,decode_error_rate,mean_effective_sigma,trials,seed"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_csv(result: SweepResult, path) -> None:
    """Persist sweep rows sorted by (scheme, snr_db); floats carry full
    round-trip precision, newline is LF."""
    lines = [CSV_HEADER]
    for p in result.rows():
        lines.append(
            ",".join(
                [
                    _fmt(p.snr_db),
                    p.scheme,
                    _fmt(p.mse_per_dim),
                    _fmt(p.decode_error_rate),
                    _fmt(p.mean_effective_sigma),
                    str(p.trials),
                    str(p.seed),
                ]
            )
        )
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"failed to write CSV to {path}: {exc}") from exc


def read_csv(path) -> SweepResult:
    """Inverse of :func:`write_csv`."""
    points = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {header!r}")
        for line in fh:
            if not line.strip():
                continue
            snr, scheme, mse, der, sig, trials, seed = line.strip().split(",")
            points.append(
                SweepPoint(
                    snr_db=float(snr),
                    scheme=scheme,
                    mse_per_dim=float(mse),
                    decode_error_rate=float(der),
                    mean_effective_sigma=float(sig),
                    trials=int(trials),
                    seed=int(seed),
                )
            )
    return SweepResult(points=tuple(points))
