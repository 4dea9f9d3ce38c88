"""``fracdirc run --experiment N ...``: run a convergence study and print or
write its table."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .experiments import DEFAULTS, ExperimentConfig, OptimizerSettings, run_experiment
from .sparse_solve import NonConvergenceError
from .tables import emit_tables

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 2, 3

_OPTIMIZER_KEYS = {
    "nu": float, "u_lower": float, "u_upper": float, "y_d": float,
    "fp_tol": float, "max_iters": int, "relaxation": float,
}


class ConfigError(ValueError):
    pass


def _float_list(text: str) -> tuple:
    return tuple(float(v) for v in str(text).replace(",", " ").split())


def _int_list(text: str) -> tuple:
    return tuple(int(v) for v in str(text).replace(",", " ").split())


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes in keys
    are read as underscores."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_").lower()] = value
    return out


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    values = read_config_file(args.config) if args.config else {}
    flags = {
        "experiment": args.experiment, "alpha": args.alpha, "level": args.level,
        "m": args.M, "m_ref": args.M_ref, "out": args.out, "format": args.format,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    known = {"experiment", "alpha", "level", "m", "m_ref", "out", "format", *_OPTIMIZER_KEYS}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        experiment = int(values.get("experiment", 0))
        if experiment not in DEFAULTS:
            raise ConfigError(f"experiment must be 1, 2 or 3, got {values.get('experiment')!r}")
        base = ExperimentConfig.default(experiment)
        alpha = values.get("alpha")
        if isinstance(alpha, list):
            alphas = tuple(a for item in alpha for a in _float_list(item))
        elif alpha is not None:
            alphas = _float_list(alpha)
        else:
            alphas = base.alphas
        opt = OptimizerSettings(**{k: t(values[k]) for k, t in _OPTIMIZER_KEYS.items() if k in values})
        return replace(
            base,
            alphas=alphas,
            L=int(values.get("level", base.L)),
            Ms=_int_list(values["m"]) if "m" in values else base.Ms,
            M_ref=int(values.get("m_ref", base.M_ref)),
            out=values.get("out"),
            fmt=values.get("format", "csv"),
            optimizer=opt,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracdirc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one convergence study")
    run.add_argument("--experiment", type=int, choices=(1, 2, 3))
    run.add_argument("--alpha", nargs="+", action="extend", help="fractional orders, e.g. 0.5 1")
    run.add_argument("--level", type=int, help="spatial level L (h = 2**-L)")
    run.add_argument("--M", help="comma-separated time levels (tau = T/2**M)")
    run.add_argument("--M-ref", dest="M_ref", type=int, help="reference time level")
    run.add_argument("--out", help="output file (default: stdout)")
    run.add_argument("--format", choices=("csv", "md"))
    run.add_argument("--config", help="key=value file; flags take precedence")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(name)s %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"fracdirc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        outcome = run_experiment(cfg)
    except NonConvergenceError as exc:
        print(f"fracdirc: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    try:
        text = emit_tables(outcome.records, cfg.fmt, cfg.out)
    except OSError as exc:
        print(f"fracdirc: {exc}", file=sys.stderr)
        return 1
    if cfg.out is None:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
