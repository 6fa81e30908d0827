"""Command-line runner: ``sample``, ``verify``, ``experiment-deblur`` and ``tune``.

Exit codes: 0 success, 1 failed verification, 2 invalid configuration or
usage, 3 numerical failure (a chain-state dump is written).
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .diagnostics import DiagnosticsReport, ess_summary, ks_distance, psnr, report_csv_row
from .models import make_deblur_model, make_illposed_dense, make_toy, motion_blur_kernel, phantom
from .pdfp import NumericalError
from .pgm_io import PgmError, atomic_write_bytes, read_pgm, write_pgm
from .samplers import ChainError, init_state, make_kernel, run_chain
from .tuning import tune_step_size, warm_start
from .verify import SUITES, format_table, run_suite

__all__ = ["main", "build_model", "BuiltModel", "run_sampler", "EXPERIMENT_COLUMNS"]

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


@dataclass(frozen=True)
class BuiltModel:
    target: object
    theta0: np.ndarray
    truth: Optional[np.ndarray] = None
    observation: Optional[np.ndarray] = None
    toy: Optional[object] = None


def _parse_kernel(spec: str) -> np.ndarray:
    parts = spec.split(":")
    if parts[0] != "motion" or len(parts) not in (2, 3):
        raise ConfigError(f"[model] kernel: expected motion:<length>[:horizontal|vertical], got {spec!r}")
    try:
        length = int(parts[1])
        return motion_blur_kernel(length, parts[2] if len(parts) == 3 else "horizontal")
    except ValueError as exc:
        raise ConfigError(f"[model] kernel: {exc}") from None


def build_model(cfg: ExperimentConfig, config_dir: str = ".") -> BuiltModel:
    m = cfg.model
    try:
        if m.kind == "toy1d":
            toy = make_toy(m.toy, 1)
            return BuiltModel(toy.target, np.zeros(1), toy=toy)
        if m.kind == "deblur":
            if m.image:
                path = m.image if os.path.isabs(m.image) else os.path.join(config_dir, m.image)
                truth = read_pgm(path)
            else:
                truth = phantom(m.size)
            model, target = make_deblur_model(truth, _parse_kernel(m.kernel), m.sigma, m.lambda_reg,
                                              m.ridge_eps, seed=m.noise_seed)
            return BuiltModel(target, model.initial_point(), truth, model.observation)
        side = math.isqrt(m.dim_param)
        if side * side != m.dim_param:
            raise ConfigError("[model] dim_param must be a perfect square (the parameter is a square image)")
        model, target, _ = make_illposed_dense(m.dim_obs, m.dim_param, m.condition, m.sigma, m.lambda_reg,
                                               seed=m.noise_seed, param_shape=(side, side),
                                               ridge_eps=m.ridge_eps)
        return BuiltModel(target, model.initial_point(), model.truth, None)
    except (PgmError, OSError) as exc:
        raise ConfigError(f"[model] image: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[model] {exc}") from None


def _validate(kind, sampler_cfg, target):
    try:
        sampler_cfg.validate(kind, target)
    except ValueError as exc:
        raise ConfigError(f"[sampler] {exc}") from None


def _warm(built: BuiltModel, sampler_cfg, steps: int) -> BuiltModel:
    if steps <= 0:
        return built
    if sampler_cfg.rho is None:
        raise ConfigError("[sampler] rho is required for warmup")
    _validate("ula_pdfp", replace(sampler_cfg, delta=sampler_cfg.rho), built.target)
    return replace(built, theta0=warm_start(built.target, built.theta0, sampler_cfg, steps))


def _ess_coords(built: BuiltModel, n: int, seed: int) -> np.ndarray:
    size = built.theta0.size
    if size <= n:
        return np.arange(size)
    return np.sort(np.random.default_rng(seed).choice(size, size=n, replace=False))


def run_sampler(built: BuiltModel, kind: str, sampler_cfg, ess_coords: int, traces: bool = False):
    """Run one chain; return ``(ChainOutput, DiagnosticsReport)``."""
    kernel = make_kernel(kind, built.target, sampler_cfg)
    track = _ess_coords(built, ess_coords, sampler_cfg.seed)
    state = init_state(built.theta0, sampler_cfg, kind=kind, target=built.target)
    out = run_chain(state, kernel, sampler_cfg, track=track,
                    energy=built.target.energy if traces else None)
    rep = DiagnosticsReport(
        sampler=kind,
        K=sampler_cfg.K if kind in ("ula_pdfp", "mala_pdfp") else None,
        delta=sampler_cfg.delta,
        rho=sampler_cfg.rho,
        n_samples=out.n_samples,
        acceptance_rate=out.acceptance_rate,
    )
    if out.n_samples >= 2:
        rep.esjd = out.esjd
    if out.n_samples >= 10:
        rep.ess_min, rep.ess_mean, rep.ess_median = ess_summary(out.samples).values()
    if built.truth is not None and out.n_samples:
        rep.psnr = psnr(built.truth, out.mean)
    if built.toy is not None and out.n_samples:
        rep.ks = ks_distance(out.samples, built.toy.cdf)
    return out, rep


def _write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def _write_mean(path_base: str, mean: np.ndarray, notes: list):
    if mean.ndim == 2:
        res = write_pgm(path_base + ".pgm", mean)
        if res.clamped:
            notes.append(f"warning: {os.path.basename(res.path)} values outside [0, 1] were clamped")
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "mean"])
        for i, v in enumerate(mean.ravel()):
            w.writerow([i, repr(float(v))])
        _write_text(path_base + ".csv", buf.getvalue())


def _dump_state(out_dir: str, err: ChainError) -> str:
    path = os.path.join(out_dir, "chain_state_dump.npz")
    st = err.state
    payload = {"message": np.array(str(err))}
    if st is not None:
        payload.update(theta=st.theta, n=np.array(st.n), accept_count=np.array(st.accept_count))
        if st.prox_cache is not None:
            payload["prox_cache"] = st.prox_cache
    cause = err.cause
    if isinstance(cause, NumericalError) and cause.dump:
        payload.update({f"pdfp_{k}": v for k, v in cause.dump.items()})
    buf = io.BytesIO()
    np.savez(buf, **payload)
    atomic_write_bytes(path, buf.getvalue())
    return path


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out_dir = args.out_dir or cfg.output.directory
    if not os.path.isabs(out_dir) and args.out_dir is None:
        out_dir = os.path.join(os.path.dirname(os.path.abspath(args.config)), out_dir)
    return cfg, out_dir


def cmd_sample(args) -> int:
    cfg, out_dir = _load(args)
    built = build_model(cfg, os.path.dirname(os.path.abspath(args.config)))
    _validate(cfg.sampler_kind, cfg.sampler, built.target)
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    try:
        out, rep = run_sampler(built, cfg.sampler_kind, cfg.sampler, cfg.output.ess_coords, cfg.output.traces)
    except ChainError as err:
        path = _dump_state(out_dir, err)
        print(f"numerical failure: {err}\nchain state written to {path}", file=sys.stderr)
        return EXIT_NUMERICAL
    wall = time.perf_counter() - t0
    notes: list = []
    _write_text(os.path.join(out_dir, "diagnostics.csv"), report_csv_row(rep, header=True))
    if out.n_samples:
        _write_mean(os.path.join(out_dir, "posterior_mean"), out.mean, notes)
    if out.energy_trace is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "energy", "accepted"])
        for i, (e, a) in enumerate(zip(out.energy_trace, out.accepted), start=1):
            w.writerow([i, repr(float(e)), int(a)])
        _write_text(os.path.join(out_dir, "energy_trace.csv"), buf.getvalue())
    _write_text(os.path.join(out_dir, "timing.csv"), f"command,wall_seconds\nsample,{wall:.3f}\n")
    for n in notes:
        print(n, file=sys.stderr)
    print(report_csv_row(rep, header=True), end="")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        print(f"unknown suite {args.suite!r}; choose from {', '.join(sorted(SUITES))}", file=sys.stderr)
        return EXIT_CONFIG
    results = run_suite(args.suite)
    print(format_table(results))
    failed = [r for r in results if not r.passed]
    print(f"{args.suite}: {len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


EXPERIMENT_COLUMNS = (
    "sampler", "K", "delta", "rho", "gamma", "lam", "n_samples", "acceptance_rate",
    "psnr", "esjd", "ess_min", "ess_mean", "ess_median", "tuned",
)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _run_cell(built, cfg: ExperimentConfig, kind: str, K: int):
    exp = cfg.experiment
    sc = replace(cfg.sampler, K=K)
    tuned = ""
    if exp.tune and kind in ("mala", "prox_mala", "mala_pdfp"):
        res = tune_step_size(built.target, built.theta0, kind, sc, steps=exp.tune_steps,
                             max_probes=exp.tune_probes)
        sc = replace(sc, delta=res.delta, rho=res.delta if kind != "mala" else sc.rho, gamma=None)
        tuned = "yes" if res.success else "no"
    _validate(kind, sc, built.target)
    t0 = time.perf_counter()
    out, rep = run_sampler(built, kind, sc, cfg.output.ess_coords)
    wall = time.perf_counter() - t0
    params = sc.pdfp_params(built.target) if sc.rho is not None else None
    row = {
        "sampler": kind, "K": K, "delta": sc.delta, "rho": sc.rho,
        "gamma": params.gamma if params else None, "lam": params.lam if params else None,
        "n_samples": rep.n_samples, "acceptance_rate": rep.acceptance_rate, "psnr": rep.psnr,
        "esjd": rep.esjd, "ess_min": rep.ess_min, "ess_mean": rep.ess_mean,
        "ess_median": rep.ess_median, "tuned": tuned,
    }
    return row, out.mean, wall


def cmd_experiment_deblur(args) -> int:
    cfg, out_dir = _load(args)
    if cfg.experiment is None:
        raise ConfigError("[experiment] section is required (samplers, K)")
    if cfg.model.kind == "toy1d":
        raise ConfigError("[model] kind must be deblur or illposed for experiment-deblur")
    built = build_model(cfg, os.path.dirname(os.path.abspath(args.config)))
    cells = [(s, K if s in ("ula_pdfp", "mala_pdfp") else 1)
             for s in cfg.experiment.samplers for K in cfg.experiment.K]
    cells = list(dict.fromkeys(cells))
    for kind, K in cells:
        sc = replace(cfg.sampler, K=K)
        _validate(kind, sc, built.target)
    os.makedirs(out_dir, exist_ok=True)

    try:
        built = _warm(built, cfg.sampler, cfg.experiment.warmup)

        def job(cell):
            return _run_cell(built, cfg, *cell)

        if args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                results = list(pool.map(job, cells))
        else:
            results = [job(c) for c in cells]
    except ChainError as err:
        path = _dump_state(out_dir, err)
        print(f"numerical failure: {err}\nchain state written to {path}", file=sys.stderr)
        return EXIT_NUMERICAL

    notes: list = []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EXPERIMENT_COLUMNS)
    w.writerow(["observation", "", "", "", "", "", "", "", _fmt(psnr(built.truth, built.observation))
                if built.observation is not None else "", "", "", "", "", ""])
    timing = ["sampler,K,wall_seconds"]
    for (kind, K), (row, mean, wall) in zip(cells, results):
        w.writerow([_fmt(row[c]) for c in EXPERIMENT_COLUMNS])
        _write_mean(os.path.join(out_dir, f"mean_{kind}_K{K}"), mean, notes)
        timing.append(f"{kind},{K},{wall:.3f}")
    _write_text(os.path.join(out_dir, "experiment.csv"), buf.getvalue())
    _write_text(os.path.join(out_dir, "timing.csv"), "\n".join(timing) + "\n")
    if built.observation is not None and built.observation.ndim == 2:
        write_pgm(os.path.join(out_dir, "observation.pgm"), built.observation)
        write_pgm(os.path.join(out_dir, "truth.pgm"), built.truth)
    for n in notes:
        print(n, file=sys.stderr)
    print(buf.getvalue(), end="")
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg, _ = _load(args)
    built = build_model(cfg, os.path.dirname(os.path.abspath(args.config)))
    kind = cfg.sampler_kind
    if kind not in ("prox_mala", "mala_pdfp"):
        raise ConfigError("[sampler] kind must be prox_mala or mala_pdfp for tuning (delta = rho)")
    _validate(kind, cfg.sampler, built.target)
    built = _warm(built, cfg.sampler, args.warmup)
    res = tune_step_size(built.target, built.theta0, kind, cfg.sampler, steps=args.steps,
                         max_probes=args.probes)
    print("probe,delta,acceptance")
    for i, p in enumerate(res.probes, start=1):
        print(f"{i},{p.delta!r},{p.acceptance!r}")
    print(f"selected delta=rho={res.delta!r} acceptance={res.acceptance!r} in_band={res.success}")
    return EXIT_OK if res.success else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdfp-langevin", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=None, help="override [sampler] seed")
    parser.add_argument("--out-dir", default=None, help="override [output] directory")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for experiment cells (default 1)")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("sample", help="run one chain from a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_sample)
    p = sub.add_parser("verify", help="run an invariant suite")
    p.add_argument("suite", help="one of: " + ", ".join(sorted(SUITES)))
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("experiment-deblur", help="sampler x K table on a deblurring model")
    p.add_argument("config")
    p.set_defaults(func=cmd_experiment_deblur)
    p = sub.add_parser("tune", help="bisect delta=rho to a 40-60%% acceptance rate")
    p.add_argument("config")
    p.add_argument("--steps", type=int, default=2000, help="chain length per probe (default 2000)")
    p.add_argument("--probes", type=int, default=8, help="probe budget (default 8)")
    p.add_argument("--warmup", type=int, default=0, help="ULA-PDFP steps from the start point before probing")
    p.set_defaults(func=cmd_tune)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
