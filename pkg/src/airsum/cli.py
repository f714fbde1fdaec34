"""Command-line entry point.

Subcommands:
  run           execute an SNR sweep from a JSON config, write CSV (and
                optionally an MSE-vs-SNR figure next to it)
  lattice-info  print the geometric analytics of a hexagonal chain
  search        print the coefficient plan for one channel realization

Exit codes: 0 success, 2 usage/config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .codec import min_layers_required
from .coeff_select import (
    ORACLE_MAX_AMAX,
    ORACLE_MAX_K,
    collective_two_group_search,
    direct_plan,
    exhaustive_oracle,
    group_devices,
    successive_two_group_search,
)
from .experiment import ConfigError, ScenarioConfig, run_sweep, write_csv
from .lattice import (
    HEX_SECOND_MOMENT,
    LatticeSpec,
    NestedLatticeChain,
    coset_constellation,
    inradius,
    max_radius,
    second_moment,
)
from .receiver import EffectiveNoiseContext, sigma_e_direct

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airsum",
        description="Nested-lattice over-the-air summation simulator",
    )
    parser.add_argument("--version", action="version", version=f"airsum {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an SNR sweep from a JSON config")
    p_run.add_argument("--config", required=True, help="path to the scenario JSON")
    p_run.add_argument("--seed", type=int, help="override master_seed")
    p_run.add_argument("--out", default="results.csv", help="output CSV path")
    p_run.add_argument("--scheme", help="override the configured scheme")
    p_run.add_argument("--workers", type=int, default=1, help="worker processes")
    p_run.add_argument(
        "--plot",
        action="store_true",
        help="also render an MSE-vs-SNR figure next to the CSV",
    )

    p_info = sub.add_parser("lattice-info", help="print lattice chain analytics")
    p_info.add_argument("--delta", type=float, required=True)
    p_info.add_argument("--rho", type=int, required=True)
    p_info.add_argument("--layers", type=int, default=0, help="0 = report minimum for bound sqrt(2)")

    p_search = sub.add_parser("search", help="coefficient plan for one channel draw")
    p_search.add_argument("--channel", help="JSON file holding the complex M x K matrix "
                          "as [[re, im] pairs] rows")
    p_search.add_argument("--seed", type=int, default=0, help="draw the channel from this seed")
    p_search.add_argument("--k", type=int, default=4, help="devices (seeded draw)")
    p_search.add_argument("--m", type=int, default=2, help="antennas (seeded draw)")
    p_search.add_argument("--scheme", default="collective",
                          choices=["direct", "collective", "successive"])
    p_search.add_argument("--a-max", type=int, default=3)
    p_search.add_argument("--snr-db", type=float, default=20.0)
    p_search.add_argument("--tau-quantile", type=float, default=0.5)
    return parser


def _cmd_run(args) -> int:
    cfg_path = Path(args.config)
    if not cfg_path.is_file():
        print(f"error: config file not found: {cfg_path}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = ScenarioConfig.from_json(cfg_path)
        overrides = {}
        if args.seed is not None:
            overrides["master_seed"] = args.seed
        if args.scheme is not None:
            overrides["scheme"] = args.scheme
        if overrides:
            cfg = cfg.replace(**overrides)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run_sweep(cfg, workers=max(1, args.workers))
    try:
        write_csv(result, args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"# scheme={cfg.scheme} K={cfg.K} M={cfg.M} delta={cfg.delta} "
          f"rho={cfg.rho} trials={cfg.trials}")
    print(f"{'snr_db':>8} {'mse_per_dim':>14} {'decode_err':>11} {'eff_sigma':>11}")
    for p in result.rows():
        print(f"{p.snr_db:>8.1f} {p.mse_per_dim:>14.6e} {p.decode_error_rate:>11.4e} "
              f"{p.mean_effective_sigma:>11.4e}")
    if args.plot:
        from .report import plot_sweep

        fig_path = Path(args.out).with_suffix(".png")
        floor = cfg.K * HEX_SECOND_MOMENT * cfg.delta**2
        try:
            plot_sweep(result, fig_path, floor=floor,
                       title=f"{cfg.scheme}, K={cfg.K}, M={cfg.M or 'Gaussian'}")
        except OSError as exc:
            print(f"error: failed to write figure: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"figure written to {fig_path}")
    print(f"results written to {args.out}")
    return EXIT_OK


def _cmd_lattice_info(args) -> int:
    try:
        base = LatticeSpec.hexagonal(args.delta)
        if args.rho < 2:
            raise ValueError(f"rho must be >= 2, got {args.rho}")
        l_min = min_layers_required(base, args.rho, np.sqrt(2.0))
        layers = args.layers if args.layers > 0 else l_min
        chain = NestedLatticeChain(base=base, rho=args.rho, num_layers=layers)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    const = coset_constellation(chain, 1)
    r2 = max_radius(const)
    sigma_mc = second_moment(base, 10**6)
    sigma_analytic = HEX_SECOND_MOMENT * args.delta**2
    alpha = np.sqrt(2.0) / r2  # P = 1
    print(f"delta                 : {args.delta:g}")
    print(f"rho                   : {args.rho}")
    print(f"second moment (MC)    : {sigma_mc:.6e}")
    print(f"second moment (hex)   : {sigma_analytic:.6e}")
    print(f"inradius              : {inradius(base):.6e}")
    print(f"R2 (constellation)    : {r2:.6e}")
    print(f"alpha (P=1)           : {alpha:.6e}")
    print(f"constellation size    : {len(const)}")
    print(f"min layers (bound √2) : {l_min}")
    return EXIT_OK


def _load_channel(path: str) -> np.ndarray:
    with open(path) as fh:
        data = json.load(fh)
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError("channel JSON must be an M x K array of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _plan_summary(label, plan):
    print(f"[{label}] scheme={plan.scheme}")
    if plan.a_matrix is not None:
        for i in range(plan.a_matrix.shape[1]):
            print(f"  a({i + 1}) = {plan.a_matrix[:, i].astype(int).tolist()}")
        print(f"  c    = {np.round(plan.c, 6).tolist()}")
    if plan.a0 is not None:
        print(f"  a0   = {plan.a0.astype(int).tolist()}")
        print(f"  beta = {plan.beta:.6f}")
    print(f"  predicted sigma_e^2 = {[float(f'{s:.6e}') for s in plan.predicted_sigmas]}")
    print(f"  sigma_e^2(1) direct = {plan.sigma_direct:.6e}")


def _cmd_search(args) -> int:
    try:
        if args.channel:
            h_c = _load_channel(args.channel)
        else:
            rng = np.random.default_rng(args.seed)
            from .channel import draw_fading

            h_c = draw_fading(args.k, args.m, rng).h_complex
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: cannot load channel: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    h = np.vstack([h_c.real, h_c.imag])
    snr = 10.0 ** (args.snr_db / 10.0)
    ctx = EffectiveNoiseContext(h=h, snr=snr)
    k = ctx.num_devices
    if args.scheme == "direct" or k < 2:
        _plan_summary("direct", direct_plan(ctx))
        return EXIT_OK
    groups = group_devices(ctx, args.tau_quantile)
    if args.scheme == "collective":
        plan = collective_two_group_search(ctx, groups, args.a_max)
    else:
        plan = successive_two_group_search(ctx, groups, args.a_max)
    _plan_summary("two-group", plan)
    if k <= ORACLE_MAX_K and args.a_max <= ORACLE_MAX_AMAX:
        oracle = exhaustive_oracle(ctx, args.a_max, args.scheme)
        _plan_summary("oracle", oracle)
    else:
        print(f"(oracle skipped: needs K <= {ORACLE_MAX_K} and a_max <= {ORACLE_MAX_AMAX})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "lattice-info":
        return _cmd_lattice_info(args)
    if args.command == "search":
        return _cmd_search(args)
    parser.error(f"unknown command {args.command!r}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
