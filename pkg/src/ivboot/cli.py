"""Command-line surface: dataset simulation, power studies, single-sample
testing, reference-table reproduction, and diagnostics, all deterministic
under a fixed seed."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import benchmark, diagnostics, harness, quasilik
from .basis import GeneralDesign, IvSample, RngStream
from .bootstrap import TestOutcome, empirical_upper_quantile
from .simgen import ERROR_KINDS, ErrorSpec, SimConfig, gen_sample


def benchmark_design(sample: IvSample) -> GeneralDesign:
    """Two-equation sample mapped to the linear quasi-likelihood layout at
    its recorded truth (outcome equation scaled by beta_star)."""
    if sample.truth is None:
        raise ValueError("sample must carry its generating truth")
    beta = sample.truth.beta_star
    eta = np.stack([beta * sample.z.T, sample.z.T])
    zk = np.stack([sample.y1, sample.y2])
    return GeneralDesign(eta=eta, zk=zk, penalty=0.0)

_ERROR_FLAG = {k.replace("_", "-"): k for k in ERROR_KINDS}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ivboot",
                                description="bootstrap likelihood-ratio testing harness")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def add_model_flags(sp, with_grid=True):
        sp.add_argument("--config", default=None, help="JSON config file; flags override")
        sp.add_argument("--n", type=int, default=None, help="sample size (default 200)")
        sp.add_argument("--q", type=int, default=None, help="instrument count (default 5)")
        sp.add_argument("--concentration", type=float, default=None,
                        help="c with pi'ZZ'pi = c/n (default: table-1 calibration)")
        sp.add_argument("--beta-star", type=float, default=None,
                        help="true structural coefficient (default: table-1 calibration)")
        sp.add_argument("--error", choices=sorted(_ERROR_FLAG), default=None,
                        help="error law (default gauss)")
        sp.add_argument("--alpha", type=float, default=None, help="test level (default 0.05)")
        sp.add_argument("--reps", type=int, default=None, help="Monte Carlo replications")
        sp.add_argument("--boot-reps", type=int, default=None, help="bootstrap draws per test")
        sp.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
        if with_grid:
            sp.add_argument("--grid", default=None,
                            help="hypothesized beta0 grid as start:step:end")

    for name, help_text in (("simulate", "generate one dataset"),
                            ("power", "full power curve over the beta0 grid"),
                            ("test", "all five tests of H0: beta = beta0 on one dataset"),
                            ("reproduce-table", "rerun a reference table and compare"),
                            ("diagnose", "finite-sample condition diagnostics")):
        sp = sub.add_parser(name, help=help_text)
        add_model_flags(sp, with_grid=(name == "power"))
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="output format (default csv)")
        if name == "test":
            sp.add_argument("--beta0", type=float, default=1.0, help="hypothesized beta")
        if name == "reproduce-table":
            sp.add_argument("--table", type=int, choices=(1, 2, 3, 4), required=True)
    return p


def _parse_grid(text: str) -> tuple:
    try:
        start, step, end = (float(v) for v in text.split(":"))
    except Exception:
        raise ValueError(f"--grid must be start:step:end, got {text!r}") from None
    if step <= 0 or end < start:
        raise ValueError(f"empty grid {text!r}")
    values = np.arange(start, end + 0.5 * step, step)
    return tuple(np.round(values, 10))


def _load_config(args) -> SimConfig:
    base = {}
    if args.config is not None:
        with open(args.config) as fh:
            base = json.load(fh)
    table1 = harness.TABLE_SPECS[1]
    err_kind = base.get("error", {}).get("kind", "gauss")
    err_omega = base.get("error", {}).get("omega", np.eye(2).tolist())
    if getattr(args, "error", None) is not None:
        err_kind = _ERROR_FLAG[args.error]
    n = args.n if args.n is not None else base.get("n", 200)
    merged = dict(
        n=n,
        q=args.q if args.q is not None else base.get("q", 5),
        concentration=(args.concentration if args.concentration is not None
                       else base.get("concentration", n * table1["lam"])),
        beta_star=(args.beta_star if args.beta_star is not None
                   else base.get("beta_star", table1["beta_star"])),
        error=ErrorSpec(kind=err_kind, omega=np.asarray(err_omega, dtype=float)),
        reps=args.reps if args.reps is not None else base.get("reps", 1000),
        boot_reps=args.boot_reps if args.boot_reps is not None else base.get("boot_reps", 1000),
        alpha=args.alpha if args.alpha is not None else base.get("alpha", 0.05),
        master_seed=args.seed if args.seed is not None else base.get("master_seed", 0),
    )
    grid = base.get("beta_grid", tuple(harness.TABLE_SPECS[1]["grid"]))
    if getattr(args, "grid", None):
        grid = _parse_grid(args.grid)
    merged["beta_grid"] = tuple(grid)
    return SimConfig(**merged)


def _emit(text: str, out_path) -> None:
    if out_path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out_path, "w") as fh:
            fh.write(text)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    sample = gen_sample(cfg, rng=cfg.rng())
    if args.format == "json":
        payload = {
            "y1": sample.y1.tolist(), "y2": sample.y2.tolist(),
            "z": sample.z.tolist(),
            "truth": {"beta_star": sample.truth.beta_star,
                      "pi_star": sample.truth.pi_star.tolist()},
            "config": harness._config_dict(cfg),
        }
        _emit(_json_text(payload), args.out)
        return 0
    lines = ["y1,y2," + ",".join(f"z{j + 1}" for j in range(cfg.q))]
    for i in range(cfg.n):
        zrow = ",".join(f"{sample.z[j, i]:.12g}" for j in range(cfg.q))
        lines.append(f"{sample.y1[i]:.12g},{sample.y2[i]:.12g},{zrow}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_power(args) -> int:
    cfg = _load_config(args)
    table = harness.power_curve(cfg)
    if args.format == "json":
        _emit(_json_text(table.to_dict()), args.out)
    else:
        _emit(table.to_csv_text(), args.out)
    return 0


def run_all_tests_once(config: SimConfig, beta0: float) -> list:
    """All five tests of H0: beta = beta0 on a single generated sample,
    via the public statistic operations."""
    from scipy.stats import chi2

    sample = gen_sample(config, rng=config.rng())
    pair = benchmark.st_vectors(sample, beta0)
    stat = benchmark.t_clr(pair)
    outcomes = []

    lr_crit = harness.oracle_lr_critical(config, beta0)
    outcomes.append(TestOutcome("LR", stat, lr_crit, stat > lr_crit,
                                {"n_null_sims": harness.N_NULL_SIMS}))

    gen = RngStream(config.master_seed, 1).generator()
    beta_tilde, _ = benchmark.profile_sup(sample)
    tblr = np.empty(config.boot_reps)
    for b in range(config.boot_reps):
        u = gen.normal(1.0, 1.0, config.n)
        tblr[b] = benchmark.ams_blr_statistic(sample, u, center=beta_tilde)
    q = empirical_upper_quantile(tblr, config.alpha)
    z_star = (q - config.q) / np.sqrt(config.q)
    thr = config.q + z_star * np.sqrt(config.q)
    outcomes.append(TestOutcome("BLR", stat, thr, stat > thr,
                                {"n_boot": config.boot_reps, "z_star_alpha": float(z_star)}))

    tau = float(pair.t @ pair.t)
    clr_crit = benchmark.clr_critical(tau, config.q, config.alpha,
                                      n_sims=harness.N_CLR_SIMS,
                                      rng=RngStream(config.master_seed, 2))
    outcomes.append(TestOutcome("CLR", stat, clr_crit, stat > clr_crit,
                                {"t_norm2": tau}))

    ar = benchmark.t_ar(pair)
    ar_crit = chi2.ppf(1 - config.alpha, config.q) / config.q
    outcomes.append(TestOutcome("AR", ar, float(ar_crit), ar > ar_crit, {}))

    lm = benchmark.t_lm(pair)
    lm_crit = chi2.ppf(1 - config.alpha, 1)
    outcomes.append(TestOutcome("LM", lm, float(lm_crit), lm > lm_crit, {}))
    return outcomes


def _cmd_test(args) -> int:
    cfg = _load_config(args)
    outcomes = run_all_tests_once(cfg, args.beta0)
    payload = {
        "beta0": args.beta0,
        "config": harness._config_dict(cfg),
        "tests": [
            {"name": o.name, "statistic": o.statistic, "critical_value": o.critical_value,
             "reject": o.reject, "info": o.info}
            for o in outcomes
        ],
    }
    _emit(_json_text(payload), args.out)
    return 0


def _cmd_reproduce_table(args) -> int:
    reps = args.reps if args.reps is not None else 1000
    boot = args.boot_reps if args.boot_reps is not None else 1000
    alpha = args.alpha if args.alpha is not None else 0.05
    table, report = harness.reproduce_table(args.table, reps=reps, boot_reps=boot,
                                            master_seed=args.seed, alpha=alpha)
    if args.format == "json":
        _emit(_json_text({"table": table.to_dict(), "report": report.to_dict()}), args.out)
    else:
        _emit(table.to_csv_text(), args.out)
        sys.stdout.write(_json_text(report.to_dict()) + "\n")
    return 0 if report.passed else 2


def _cmd_diagnose(args) -> int:
    cfg = _load_config(args)
    sample = gen_sample(cfg, rng=cfg.rng())
    design = benchmark_design(sample)
    fsc = diagnostics.fsc_design_check(design)

    theta = quasilik.mle(design)
    contrib = quasilik.grad_contributions(design, theta)
    D2 = quasilik.normal_matrix(design)
    vals, vecs = np.linalg.eigh(D2)
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.T
    B0 = inv_sqrt @ (contrib.T @ contrib) @ inv_sqrt
    g = 2.0 * np.sqrt(2.0 * np.trace(B0))
    junctions = diagnostics.z_branch_continuity(B0, g)

    t_grid = np.linspace(5.0, 40.0, 8)
    sampler = diagnostics.rademacher_spike_sampler(100, 2)
    tails = diagnostics.empirical_opnorm_tail(sampler, t_grid, 20000,
                                              RngStream(cfg.master_seed, 3))
    bounds = [min(1.0, diagnostics.bernstein_bound(t, 100.0, 1.0, 2)) for t in t_grid]
    payload = {
        "fsc": fsc.to_dict(),
        "deviation_function_junctions": junctions,
        "bernstein_domination": {
            "t_grid": t_grid.tolist(),
            "empirical_tail": tails.tolist(),
            "bound": bounds,
            "dominated": bool(np.all(tails <= np.asarray(bounds) + 3e-2)),
        },
        "config": harness._config_dict(cfg),
    }
    _emit(_json_text(payload), args.out)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "power": _cmd_power,
    "test": _cmd_test,
    "reproduce-table": _cmd_reproduce_table,
    "diagnose": _cmd_diagnose,
}


def run(argv=None) -> int:
    """Entry point; returns the process exit code (0 ok, 1 usage/validation
    error, 2 failed table comparison)."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return 0 if exc.code == 0 else 1
    try:
        return _COMMANDS[args.subcommand](args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
