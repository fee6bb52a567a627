"""Command-line harness: ``besovreg <subcommand> [options]``.

Exit status is 0 when every verdict passes, 1 on a failed verdict and 2 on
a configuration error. Thread count for replicates is read from the
``BESOVREG_THREADS`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .checks import CHECK_DEFAULTS, run_check
from .errors import ConfigurationError, ParameterError
from .output import emit_outputs, to_jsonable
from .studies import RateStudySpec, fit_slope, run_rate_study

__all__ = ["main", "build_parser", "RATE_DEFAULTS", "selftest"]

RATE_SUBCOMMANDS = {"rate": "deterministic", "exact": "exact", "stat": "statistical", "tv": "tv"}
CHECK_SUBCOMMANDS = ("sparsity", "converse", "vsc", "lower-bound")

RATE_DEFAULTS = {
    "deterministic": {"grid": np.logspace(-4, -1, 10).tolist()},
    "exact": {"grid": np.logspace(-6, -1, 10).tolist()},
    "statistical": {"grid": np.logspace(-3, -1, 8).tolist(), "replicates": 20},
    "tv": {"grid": np.logspace(-3, -1, 8).tolist(), "p": 1.0, "s": 1.0},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="besovreg", description="Wavelet-Besov Tikhonov regularization experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*RATE_SUBCOMMANDS, *CHECK_SUBCOMMANDS):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with parameter overrides")
        p.add_argument("--seed", type=int, help="seed for the truth and the noise")
        p.add_argument("--out-dir", default="results", help="directory for the CSV table and JSON manifest")
        p.add_argument("--levels", type=int, help="number of wavelet levels J (signal length 2^J)")
        p.add_argument("--wavelet", help="dbN or meyer")
        if name in RATE_SUBCOMMANDS:
            p.add_argument("--trim", type=float, help="decades of the smallest noise levels left out of the fit")
    sub.add_parser("selftest")
    return parser


def _read_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"config {path} must hold a JSON object")
    return cfg


def _rate_spec(kind, args) -> RateStudySpec:
    params = {"kind": kind, **RATE_DEFAULTS[kind], **_read_config(args.config)}
    if params.get("kind", kind) != kind:
        raise ConfigurationError(f"config kind {params['kind']!r} does not match subcommand")
    if args.seed is not None:
        params["signal_seed"] = params["noise_seed"] = args.seed
    for key in ("levels", "wavelet", "trim"):
        if getattr(args, key) is not None:
            params[key] = getattr(args, key)
    try:
        return RateStudySpec.from_dict(params)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def _check_params(kind, args) -> dict:
    params = _read_config(args.config)
    defaults = CHECK_DEFAULTS[kind]
    if args.seed is not None:
        for key in ("signal_seed", "noise_seed"):
            if key in defaults:
                params[key] = args.seed
    for key in ("levels", "wavelet"):
        if getattr(args, key) is not None:
            params[key] = getattr(args, key)
    return params


def selftest() -> list:
    """Fast internal consistency checks; returns ``(name, passed, detail)`` triples."""
    from .operators import conv_model, hammerstein_model
    from .prox import prox_block_lp
    from .wavelet import WaveletSystem, analyze, synthesize

    out = []
    rng = np.random.default_rng(0)
    for fam in ("db2", "db4", "db8", "meyer"):
        sys_ = WaveletSystem(fam, 10)
        x = rng.standard_normal(sys_.signal_length)
        z = analyze(x, sys_)
        err = np.linalg.norm(synthesize(z).samples - x) / np.linalg.norm(x)
        pars = abs(np.linalg.norm(z.data) - np.linalg.norm(x)) / np.linalg.norm(x)
        out.append((f"round trip {fam}", max(err, pars) < 1e-10, f"{max(err, pars):.2e}"))

    worst = 0.0
    for _ in range(200):
        x = rng.standard_normal(8)
        tau = float(rng.uniform(0.1, 2.0))
        y = prox_block_lp(x, tau, 1.5)
        ny = np.sum(np.abs(y) ** 1.5) ** (1 / 1.5)
        if ny > 0:
            grad = np.sign(y) * np.abs(y) ** 0.5 / ny**0.5
            worst = max(worst, float(np.max(np.abs(x - y - tau * grad))))
        else:
            worst = max(worst, float(np.sum(np.abs(x) ** 3) ** (1 / 3) - tau))
    out.append(("prox p=1.5 optimality", worst < 1e-8, f"{worst:.2e}"))

    sys_ = WaveletSystem("db4", 8)
    n = sys_.signal_length
    for name, model in (("convolution", conv_model(1.0, sys_)), ("hammerstein", hammerstein_model(system=sys_))):
        x, h, r = (rng.standard_normal(n) * 0.1 for _ in range(3))
        lhs = float(np.mean(model._dapply(x, h) * r))
        rhs = float(np.dot(h, model._dadjoint(x, r)))
        gap = abs(lhs - rhs) / max(abs(lhs), 1e-300)
        out.append((f"adjoint {name}", gap < 1e-10, f"{gap:.2e}"))

    xs = np.logspace(-3, 0, 6)
    slope, _ = fit_slope(xs, 2.0 * xs**0.5)
    out.append(("slope fit", abs(slope - 0.5) < 1e-12, f"{slope:.12f}"))
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "selftest":
            rows = selftest()
            for name, ok, detail in rows:
                print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
            return 0 if all(ok for _, ok, _ in rows) else 1
        if args.command in RATE_SUBCOMMANDS:
            result = run_rate_study(_rate_spec(RATE_SUBCOMMANDS[args.command], args))
        else:
            result = run_check(args.command, _check_params(args.command, args))
    except (ConfigurationError, ParameterError) as exc:
        print(f"besovreg: configuration error: {exc}", file=sys.stderr)
        return 2
    csv_path, json_path = emit_outputs(result, args.out_dir)
    verdict = to_jsonable(result.verdict())
    print(json.dumps(verdict, sort_keys=True))
    print(f"{'PASS' if result.passed else 'FAIL'}  {args.command}  -> {csv_path}, {json_path}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
