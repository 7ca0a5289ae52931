"""Experiment runner.

Subcommands: validate | simulate | analyze | report.
Exit codes: 0 pass, 1 test failure, 2 usage/configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np
import yaml

from . import __version__
from .analysis import (EstimatorReport, TestResult, batch_mean_estimate,
                       fit_power_law, run_ensemble, static_field_samples,
                       test_limit_prediction)
from .config import RunConfig, parse_config
from .errors import ConfigurationError, ParameterError
from .fields import FieldContext, cumulative_trapezoid, normal_mode_constants
from .io import (manifest_dict, read_manifest, read_series, write_battery,
                 write_csv, write_manifest, write_series)
from .kernel import build_tables
from .operators import discrete_l2_norm, ou_reference_covariance
from .validation import operator_convergence_table, run_validation_suite


def _load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def _config_from_manifest(manifest: dict) -> RunConfig:
    payload = dict(manifest["config"])
    payload.setdefault("output", {"directory": "out"})
    return parse_config(yaml.safe_dump(payload))


def cmd_validate(args) -> int:
    checks = run_validation_suite(broken_rates=args.broken_rates,
                                  full_operators=args.full_operators)
    width = max(len(c.name) for c in checks)
    all_ok = True
    for c in checks:
        status = "pass" if c.passed else "FAIL"
        print(f"{c.name:<{width}}  {c.value:.3e}  (< {c.threshold:.1e})  {status}")
        all_ok = all_ok and c.passed
    if args.opconv_csv:
        rows = operator_convergence_table()
        write_csv(args.opconv_csv, ["family", "gamma", "n", "err_sym", "err_asym"],
                  rows, "validate")
        print(f"operator-convergence table written to {args.opconv_csv}")
    print("validate:", "all checks passed" if all_ok else "CHECKS FAILED")
    return 0 if all_ok else 1


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    os.makedirs(cfg.out_dir, exist_ok=True)
    from .analysis import ExperimentPlan
    plan = ExperimentPlan(
        params=cfg.params, test_function=cfg.test_function,
        trajectories=cfg.trajectories, horizon=cfg.horizon, master_seed=cfg.seed,
        dt=cfg.dt, pair_terms=cfg.pair_terms, block_eps=cfg.block_eps,
        quad_eps=cfg.quad_eps, energy_eps=cfg.energy_eps, r_cut=cfg.r_cut)
    result = run_ensemble(plan, threads=max(1, args.threads))
    # the manifest identifies the experiment: parameters + seed + code version;
    # execution details (output directory, thread count) stay out of the hash
    identity = cfg.to_dict()
    identity.pop("output", None)
    identity.pop("threads", None)
    manifest = manifest_dict(identity, __version__)
    digest = write_manifest(os.path.join(cfg.out_dir, "manifest.json"), manifest)
    write_series(cfg.out_dir, result, digest)
    if cfg.static_samples > 0:
        samples = static_field_samples(cfg.params, cfg.test_function,
                                       cfg.static_samples, cfg.seed + 1)
        write_csv(os.path.join(cfg.out_dir, "static.csv"),
                  ["sample_id", "z_plus", "z_minus"],
                  ((i, s[0], s[1]) for i, s in enumerate(samples)), digest)
    print(f"simulate: wrote {cfg.trajectories} trajectories to {cfg.out_dir} "
          f"(manifest {digest})")
    return 0


def _battery(cfg: RunConfig, series) -> list[TestResult]:
    tables = build_tables(cfg.params)
    constants = normal_mode_constants(cfg.params, tables)
    ctx = FieldContext(cfg.params, tables, constants, cfg.test_function,
                       r_cut=cfg.r_cut)
    h_norm = discrete_l2_norm(cfg.test_function, cfg.params.n)
    times = series[0].sample_times
    reports: list[EstimatorReport] = []
    results: list[TestResult] = []
    for sign, key in ((1, "plus"), (-1, "minus")):
        z0 = np.array([s.z(sign)[0] for s in series])
        reports.append(batch_mean_estimate(z0 ** 2, name=f"static_variance_{key}")
                       .with_reference(constants.d3(sign) * h_norm))
        m_end = np.array([s.m(sign)[-1] for s in series])
        reports.append(batch_mean_estimate(m_end, name=f"martingale_mean_{key}")
                       .with_reference(0.0))
        qv_end = np.array([s.qv(sign)[-1] for s in series])
        ref_int = np.array([ctx.qv_expectation_integrand(sign, t) for t in times])
        qv_ref = float(cumulative_trapezoid(times, ref_int)[-1])
        reports.append(batch_mean_estimate(qv_end, name=f"qv_mean_{key}")
                       .with_reference(qv_ref))
        second = m_end ** 2 - qv_end
        reports.append(batch_mean_estimate(second,
                                           name=f"martingale_second_moment_{key}")
                       .with_reference(0.0))
        for t in cfg.autocov_times:
            if t > times[-1]:
                continue
            idx = int(np.argmin(np.abs(times - t)))
            prod = np.array([s.z(sign)[idx] * s.z(sign)[0] for s in series])
            ref = ou_reference_covariance(
                cfg.test_function, cfg.test_function, float(times[idx]),
                cfg.params.n, tables, constants.lam(sign), cfg.params.k_n,
                constants.d3(sign))
            reports.append(batch_mean_estimate(
                prod, name=f"ou_autocov_{key}_t{times[idx]:g}").with_reference(ref))
    cross = np.array([s.z_plus[0] * s.z_minus[0] for s in series])
    reports.append(batch_mean_estimate(cross, name="cross_covariance")
                   .with_reference(0.0))
    results.extend(test_limit_prediction(reports, cfg.tolerance_sigma))
    # energy-estimate exponent when the eps ladder with halves was recorded
    eps_pairs = [(e, e / 2) for e in cfg.energy_eps if e / 2 in cfg.energy_eps]
    if len(eps_pairs) >= 3:
        diffs = []
        for eps, half in eps_pairs:
            d = np.array([s.extras[f"energy:+:{eps:.4f}"][-1]
                          - s.extras[f"energy:+:{half:.4f}"][-1] for s in series])
            diffs.append(float(np.mean(d ** 2)))
        exponent, _, r_sq = fit_power_law([e for e, _ in eps_pairs], diffs)
        results.append(TestResult(name="energy_exponent", estimate=exponent,
                                  reference=0.0, se=float("nan"), z=float("nan"),
                                  passed=exponent > 0))
    return results


def cmd_analyze(args) -> int:
    out_dir = args.out
    manifest_path = os.path.join(out_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise ConfigurationError(f"no manifest found in {out_dir!r}; run simulate first")
    manifest, digest = read_manifest(manifest_path)
    series, series_digest = read_series(out_dir)
    if series_digest != digest:
        raise ConfigurationError(
            "series were produced under a different manifest; refusing mixed inputs")
    if not series:
        raise ConfigurationError("series.csv holds no trajectories")
    cfg = _config_from_manifest(manifest)
    results = _battery(cfg, series)
    write_battery(os.path.join(out_dir, "battery.csv"), results, digest)
    width = max(len(r.name) for r in results)
    ok = True
    for r in results:
        status = "pass" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  est={r.estimate:+.4e}  ref={r.reference:+.4e}  "
              f"z={r.z:+.2f}  {status}")
        ok = ok and r.passed
    print("analyze:", "all tests passed" if ok else "TESTS FAILED")
    return 0 if ok else 1


def cmd_report(args) -> int:
    from .report import render_report
    written = render_report(args.out, args.fig_dir or os.path.join(args.out, "figures"))
    for path in written:
        print(f"report: wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abcflux",
        description="Long-range three-species exclusion process: simulation and "
                    "scaling-limit verification")
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="run the deterministic check suite")
    p_val.add_argument("--broken-rates", action="store_true",
                       help="inject an unbalanced rate table (negative control)")
    p_val.add_argument("--full-operators", action="store_true",
                       help="scan all test-function families up to n=256")
    p_val.add_argument("--opconv-csv", metavar="PATH",
                       help="also write the operator-convergence table")
    p_val.set_defaults(func=cmd_validate)

    p_sim = sub.add_parser("simulate", help="run trajectories and write CSVs")
    p_sim.add_argument("--config", required=True, metavar="PATH")
    p_sim.add_argument("--seed", type=int, metavar="U64")
    p_sim.add_argument("--out", metavar="DIR")
    p_sim.add_argument("--threads", type=int, default=1, metavar="N")
    p_sim.set_defaults(func=cmd_simulate)

    p_ana = sub.add_parser("analyze", help="run the statistical test battery")
    p_ana.add_argument("--out", required=True, metavar="DIR",
                       help="directory with manifest.json and series CSVs")
    p_ana.set_defaults(func=cmd_analyze)

    p_rep = sub.add_parser("report", help="render figures and a summary table")
    p_rep.add_argument("--out", required=True, metavar="DIR")
    p_rep.add_argument("--fig-dir", metavar="DIR")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, ParameterError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
