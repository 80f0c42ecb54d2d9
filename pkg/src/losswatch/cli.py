"""Command-line interface.

Subcommands: cre, latency, arl, rth, capacity, figure. Common flags:
--seed, --out, --config, --paper-scale, --workers. Each flag can also come
from an environment variable (prefix LOSSWATCH_, e.g. LOSSWATCH_SEED) or a
config file of `key = value` lines with `#` comments; precedence is
CLI flag > environment > config file > built-in default.

Exit codes: 0 success, 2 usage/domain error, 3 numerical error, 4 resource
limit.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from .calibration import estimate_arl
from .errors import DomainError, NumericalError, ResourceError, UsageError
from .experiments import (
    DEFAULT_SEED,
    FIGURE_IDS,
    ScenarioConfig,
    Scale,
    build_figure,
    cmd_root_rth,
    cre_sweep_rows,
    custom_latency_rows,
    fig3_rows,
    fig8_rows,
    make_scheme,
    write_csv,
)
from .samplers import SeededStream
from .schemes import ChannelPair, bpsk_awgn_capacity, cre_dv_homodyne

ENV_PREFIX = "LOSSWATCH_"


def _parse_config_file(path: str) -> dict[str, str]:
    """Flat `key = value` lines; `#` starts a comment; blank lines ignored."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected `key = value`, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _external_defaults(argv: list[str]) -> dict[str, str]:
    """Merge config-file and environment overrides (env wins)."""
    merged: dict[str, str] = {}
    config_path = os.environ.get(ENV_PREFIX + "CONFIG")
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif tok.startswith("--config="):
            config_path = tok.split("=", 1)[1]
    if config_path:
        merged.update(_parse_config_file(config_path))
    for key, value in os.environ.items():
        if key.startswith(ENV_PREFIX) and key != ENV_PREFIX + "CONFIG":
            merged[key[len(ENV_PREFIX):].lower()] = value
    return merged


def _channel_from_args(args) -> ChannelPair:
    if args.eta2 is not None and args.eta_tap is not None:
        raise UsageError("give --eta2 or --eta-tap, not both")
    if args.eta2 is not None:
        return ChannelPair(args.eta1, args.eta2)
    if args.eta_tap is not None:
        return ChannelPair.from_tap(args.eta1, args.eta_tap)
    raise UsageError("channel needs --eta2 or --eta-tap")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="master seed")
    p.add_argument("--out", type=str, default=None, help="output CSV path")
    p.add_argument("--config", type=str, default=None, help="config file path")
    p.add_argument("--paper-scale", action="store_true", dest="paper_scale",
                   help="full-fidelity Monte-Carlo sizes (minutes, not seconds)")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")


def _add_channel(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eta1", type=float, required=True, help="pre-change transmissivity")
    p.add_argument("--eta2", type=float, default=None, help="post-change transmissivity")
    p.add_argument("--eta-tap", type=float, default=None, dest="eta_tap",
                   help="post/pre transmissivity ratio")


def _add_scheme(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scheme", type=str, required=True,
                   help="coherent | squeezed | entangled | kennedy | sp-homodyne | sp-spd")
    p.add_argument("--N", type=float, default=0.0, help="classical photons per pulse")
    p.add_argument("--Na", type=float, default=0.0, help="quantum photons per pulse")
    p.add_argument("--n", type=int, default=1, help="entangled block length")
    p.add_argument("--neps", type=float, default=0.0, help="nulling residual photons")
    p.add_argument("--modulation", type=str, default="unmodulated",
                   choices=["unmodulated", "bpsk"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="losswatch",
        description="Quickest change detection of channel loss: per-pulse "
        "relative entropies, CUSUM detection latency, and Monte-Carlo "
        "run-length calibration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_cre = sub.add_parser("cre", help="sweep one parameter and tabulate CRE")
    _add_scheme(p_cre)
    _add_channel(p_cre)
    p_cre.add_argument("--sweep", type=str, required=True,
                       choices=["na", "n", "s", "neps", "eta1"])
    p_cre.add_argument("--start", type=float, required=True)
    p_cre.add_argument("--stop", type=float, required=True)
    p_cre.add_argument("--points", type=int, default=25)
    p_cre.add_argument("--log", action="store_true", help="log-spaced sweep grid")
    _add_common(p_cre)

    p_lat = sub.add_parser("latency", help="simulated detection latency scenarios")
    p_lat.add_argument("--scenario", type=str, required=True,
                       choices=["fig3", "fig8", "custom"])
    _add_scheme_optional(p_lat)
    p_lat.add_argument("--eta1", type=float, default=None)
    p_lat.add_argument("--eta2", type=float, default=None)
    p_lat.add_argument("--eta-tap", type=float, default=None, dest="eta_tap")
    p_lat.add_argument("--nc", type=int, default=1000, help="true change pulse")
    p_lat.add_argument("--horizon", type=int, default=5000)
    p_lat.add_argument("--runs", type=int, default=None)
    p_lat.add_argument("--arl-target", type=float, default=None, dest="arl_target")
    p_lat.add_argument("--threshold", type=float, default=None,
                       help="fixed threshold (skips calibration)")
    _add_common(p_lat)

    p_arl = sub.add_parser("arl", help="Monte-Carlo average-run-length table")
    _add_scheme(p_arl)
    _add_channel(p_arl)
    p_arl.add_argument("--h-min", type=float, required=True, dest="h_min")
    p_arl.add_argument("--h-max", type=float, required=True, dest="h_max")
    p_arl.add_argument("--grid", type=int, default=200, help="number of thresholds L")
    p_arl.add_argument("--runs", type=int, default=100, help="averaging runs M")
    p_arl.add_argument("--samples", type=int, required=True,
                       help="run length in pulses")
    _add_common(p_arl)

    p_rth = sub.add_parser("rth", help="squeezing where the squeezed CRE meets a target")
    p_rth.add_argument("--N", type=float, required=True)
    _add_channel(p_rth)
    p_rth.add_argument("--target-cre", type=str, required=True, dest="target_cre",
                       help="target CRE in nats, or `dv` for the displaced-"
                            "single-photon value at alpha = sqrt(N)")
    _add_common(p_rth)

    p_cap = sub.add_parser("capacity", help="binary-phase AWGN capacity (bits/pulse)")
    p_cap.add_argument("--eta", type=float, required=True)
    p_cap.add_argument("--N", type=float, required=True)
    _add_common(p_cap)

    p_fig = sub.add_parser("figure", help="emit one figure scenario as CSV")
    p_fig.add_argument("figure_id", type=str, choices=list(FIGURE_IDS))
    _add_common(p_fig)

    return parser


def _add_scheme_optional(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scheme", type=str, default=None)
    p.add_argument("--N", type=float, default=0.0)
    p.add_argument("--Na", type=float, default=0.0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--neps", type=float, default=0.0)
    p.add_argument("--modulation", type=str, default="unmodulated",
                   choices=["unmodulated", "bpsk"])


def _emit(args, header, rows, default_name: str) -> str:
    out = args.out or default_name
    write_csv(out, header, rows)
    print(f"wrote {len(rows)} rows to {out}")
    return out


def _dispatch(args) -> None:
    if args.command == "cre":
        ch = _channel_from_args(args)
        header, rows = cre_sweep_rows(
            args.scheme, ch, args.N, args.Na, args.n, args.neps, args.modulation,
            args.sweep, args.start, args.stop, args.points, args.log, args.seed,
        )
        _emit(args, header, rows, f"cre_{args.scheme}_{args.sweep}.csv")
        return

    if args.command == "latency":
        if args.scenario == "fig3":
            scale = Scale.paper() if args.paper_scale else Scale.desk()
            if args.arl_target:
                scale = Scale(args.arl_target, args.runs or scale.latency_runs,
                              scale.arl_runs)
            elif args.runs:
                scale = Scale(scale.gamma_target, args.runs, scale.arl_runs)
            header, rows = fig3_rows(args.seed, scale, args.workers)
            _emit(args, header, rows, "fig3.csv")
            return
        if args.scenario == "fig8":
            scale = Scale.paper() if args.paper_scale else Scale.desk()
            if args.arl_target:
                scale = Scale(args.arl_target, args.runs or scale.latency_runs,
                              scale.arl_runs)
            elif args.runs:
                scale = Scale(scale.gamma_target, args.runs, scale.arl_runs)
            header, rows = fig8_rows(args.seed, scale, args.workers)
            _emit(args, header, rows, "fig8.csv")
            return
        if args.scheme is None:
            raise UsageError("custom latency needs --scheme")
        ch = _channel_from_args(args)
        cfg = ScenarioConfig(
            scenario="custom",
            seed=args.seed,
            paper_scale=args.paper_scale,
            workers=args.workers,
            scheme=make_scheme(args.scheme, args.N, args.Na, args.n, args.neps,
                               args.modulation),
            channel=ch,
            n_c=args.nc,
            horizon=args.horizon,
            runs=args.runs,
            gamma_target=args.arl_target,
            threshold=args.threshold,
        )
        header, rows = custom_latency_rows(cfg)
        _emit(args, header, rows, "latency_custom.csv")
        return

    if args.command == "arl":
        ch = _channel_from_args(args)
        scheme = make_scheme(args.scheme, args.N, args.Na, args.n, args.neps,
                             args.modulation)
        from .experiments import _NS

        table = estimate_arl(
            scheme, ch, args.h_min, args.h_max, args.grid, args.runs,
            args.samples, SeededStream(args.seed, (_NS["arl"],)),
        )
        out = args.out or f"arl_{scheme.label()}.csv"
        table.to_csv(out)
        note = " (censored-run warning)" if table.censored_warning else ""
        print(f"wrote {len(table.h_grid)} rows to {out}{note}")
        return

    if args.command == "rth":
        ch = _channel_from_args(args)
        if args.target_cre.strip().lower() == "dv":
            target = cre_dv_homodyne(ch, math.sqrt(args.N))
        else:
            target = float(args.target_cre)
        r = cmd_root_rth(ch, args.N, target)
        db = 10.0 * math.log10(math.exp(2.0 * r))
        print(f"r = {r:.6f} ({db:.4f} dB) for target CRE {target:.17g}")
        if args.out:
            write_csv(args.out, ["target_cre", "r", "db"], [(target, r, db)])
        return

    if args.command == "capacity":
        c = bpsk_awgn_capacity(args.eta, args.N)
        print(f"capacity = {c:.17g} bits/pulse at eta={args.eta:g}, N={args.N:g}")
        if args.out:
            write_csv(args.out, ["eta", "N", "capacity_bits"], [(args.eta, args.N, c)])
        return

    if args.command == "figure":
        header, rows = build_figure(args.figure_id, args.seed, args.paper_scale,
                                    args.workers)
        _emit(args, header, rows, f"{args.figure_id}.csv")
        return

    raise UsageError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        defaults = _external_defaults(argv)
    except (OSError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if defaults:
        known = {
            action.dest
            for p in [parser] + list(parser._subparsers._group_actions[0].choices.values())
            for action in p._actions
        }
        coerced = {}
        for key, value in defaults.items():
            if key not in known:
                continue
            if key in ("paper_scale", "log"):
                coerced[key] = value.strip().lower() in ("1", "true", "yes", "on")
            else:
                coerced[key] = value
        parser.set_defaults(**coerced)
        for p in parser._subparsers._group_actions[0].choices.values():
            p.set_defaults(**{k: v for k, v in coerced.items()
                              if k in {a.dest for a in p._actions}})
    try:
        args = parser.parse_args(argv)
        # argparse keeps string defaults injected via set_defaults; coerce.
        for attr in ("seed", "workers", "runs", "points", "n", "nc", "horizon",
                     "grid", "samples"):
            if hasattr(args, attr) and isinstance(getattr(args, attr), str):
                setattr(args, attr, int(getattr(args, attr)))
        for attr in ("N", "Na", "neps", "eta1", "eta2", "eta_tap", "start", "stop",
                     "h_min", "h_max", "arl_target", "threshold", "eta"):
            if hasattr(args, attr) and isinstance(getattr(args, attr), str):
                setattr(args, attr, float(getattr(args, attr)))
        _dispatch(args)
    except (UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
