"""rcarpanel command-line interface.

Subcommands: analyze (stationarity, covariance, and spectral report from a
model config), simulate (panel CSV generation), estimate (moment recovery
from a panel file), mc (Monte Carlo experiments), oracle (reference value
derivations).

Exit codes: 0 success, 2 configuration or usage error, 3 data error,
4 numerical error, 5 acceptance-screen failure (mc only).  Environment:
RCARPANEL_SEED overrides the config seed when --seed is absent;
RCARPANEL_THREADS sets the harness worker count.
"""

import argparse
import os
import sys

import numpy as np

from .companion import char_poly_roots, companion_matrix, spectral_radius
from .config import (
    effective_config,
    init_from,
    load_config,
    model_spec_from,
    plan_from,
)
from .distributions import is_second_order_stationary
from .estimators import estimate_cross_sectional, estimate_per_individual
from .exceptions import (
    ConfigError,
    DataFormatError,
    EstimationError,
    NonstationaryError,
    NumericalError,
    RankDeficiencyError,
    RcarError,
    SimulationError,
    TruncationError,
)
from .montecarlo import (
    run_ahat_convergence,
    run_clt,
    run_consistency,
    run_stationarity_diagnostic,
)
from .moments import gamma0_direct, gamma_u, spectral_density, upsilon_series
from .oracles import list_oracles, run_oracle
from .panelio import read_panel, to_plain, write_panel, write_report, write_truth
from .simulate import InitMode, simulate_panel

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_ACCEPTANCE = 5

_NUMERICAL_ERRORS = (
    NonstationaryError,
    TruncationError,
    RankDeficiencyError,
    NumericalError,
    SimulationError,
    EstimationError,
)


def _resolve_seed(arg_seed, cfg):
    if arg_seed is not None:
        return int(arg_seed)
    env = os.environ.get("RCARPANEL_SEED")
    if env is not None and env != "":
        try:
            return int(env)
        except ValueError:
            raise ConfigError(
                f"RCARPANEL_SEED must be an integer, got {env!r}"
            ) from None
    return int(cfg.get("seed", 0))


def _parse_init_flag(text):
    """Parse an --init override: kind or kind:args.

    Examples: exact_stationary, burn_in:500, ma_truncation:200,
    fixed_start:1.0,0.5
    """
    kind, _, rest = text.partition(":")
    try:
        if kind == "exact_stationary":
            return InitMode.exact_stationary()
        if kind == "burn_in":
            return InitMode.with_burn_in(int(rest)) if rest else InitMode.with_burn_in()
        if kind == "ma_truncation":
            return InitMode.ma_truncation(int(rest))
        if kind == "fixed_start":
            return InitMode.fixed_start([float(x) for x in rest.split(",") if x])
    except (ValueError, RcarError) as exc:
        raise ConfigError(f"bad --init value {text!r}: {exc}") from None
    raise ConfigError(
        f"unknown init kind {kind!r}; expected exact_stationary, burn_in, "
        "ma_truncation, or fixed_start"
    )


def _emit(report, out_path, summary_line):
    if out_path:
        write_report(report, out_path)
        print(f"{summary_line}; wrote {out_path}")
    else:
        import json

        print(json.dumps(to_plain(report), indent=2, sort_keys=True))


def _hermitian_to_plain(M):
    M = np.asarray(M)
    if np.iscomplexobj(M):
        return {"re": M.real.tolist(), "im": M.imag.tolist()}
    return M.tolist()


def cmd_analyze(args):
    cfg = load_config(args.config)
    eff = effective_config(cfg)
    analysis = eff["analysis"]
    if args.tol is not None:
        analysis["tol"] = float(args.tol)
    if args.max_terms is not None:
        analysis["max_terms"] = int(args.max_terms)
    if args.boundary_tol is not None:
        analysis["boundary_tol"] = float(args.boundary_tol)
    seed = _resolve_seed(args.seed, cfg)
    eff["seed"] = seed
    spec = model_spec_from(cfg)
    dist = spec.coeff_dist
    p = spec.order
    tol = float(analysis["tol"])
    max_terms = int(analysis["max_terms"])
    btol = float(analysis["boundary_tol"])
    samples = int(analysis["samples"])
    check = is_second_order_stationary(dist, tol=btol, samples=samples, seed=seed)
    atoms_report = []
    if dist.is_exact:
        for coeffs, weight in dist.atoms():
            radius = spectral_radius(companion_matrix(coeffs))
            atoms_report.append({
                "coefficients": list(coeffs),
                "weight": weight,
                "spectral_radius": radius,
                "roots": [{"re": r.real, "im": r.imag}
                          for r in char_poly_roots(coeffs)],
                "stationary": bool(radius < 1.0 - btol),
            })
    report = {
        "command": "analyze",
        "effective_config": eff,
        "stationarity": {
            "atoms": atoms_report,
            "second_order": {
                "stationary": bool(check),
                "radius": check.radius,
                "tol": check.tol,
                "approximate": check.approximate,
                "sample_size": check.sample_size,
            },
            "verdict": "stationary" if check else "nonstationary",
        },
    }
    if check:
        ob = spec.noise.omega_bar(p)
        lags = [int(u) for u in analysis["lags"]]
        ups = {}
        meta = {}
        for u in lags:
            res = upsilon_series(dist, ob, u, tol=tol, max_terms=max_terms,
                                 samples=samples, seed=seed)
            ups[str(u)] = res.value.tolist()
            meta[str(u)] = {"terms": res.terms, "tail_bound": res.tail_bound}
        report["covariances"] = {
            "unconditional": ups,
            "series": meta,
            "note": "noise entry uses the mean variance over individuals",
        }
        if dist.is_exact:
            cond = {}
            for idx, (coeffs, _) in enumerate(dist.atoms()):
                A = companion_matrix(coeffs)
                g0 = gamma0_direct(A, ob, tol=btol)
                cond[str(idx)] = {
                    str(u): gamma_u(A, g0, u).tolist() for u in lags
                }
            report["covariances"]["conditional_by_atom"] = cond
        spectral = []
        for lam in analysis["frequencies"]:
            val = spectral_density(dist, ob, float(lam), tol=tol,
                                   max_terms=max_terms, samples=samples,
                                   seed=seed)
            entry = {
                "frequency": val.frequency,
                "value": _hermitian_to_plain(val.value),
                "truncation_order": val.truncation_order,
                "tail_bound": val.tail_bound,
            }
            if val.moment_route_value is not None:
                entry["moment_route_value"] = _hermitian_to_plain(
                    val.moment_route_value)
                entry["moment_route_gap"] = val.moment_route_gap
                entry["moment_route_tail"] = val.moment_route_tail
            spectral.append(entry)
        report["spectral"] = spectral
    _emit(report, args.out,
          f"verdict: {report['stationarity']['verdict']}")
    return EXIT_OK


def cmd_simulate(args):
    cfg = load_config(args.config)
    eff = effective_config(cfg)
    sim = eff["simulate"]
    spec = model_spec_from(cfg)
    init = _parse_init_flag(args.init) if args.init else init_from(cfg)
    seed = _resolve_seed(args.seed, cfg)
    policy = sim["policy"]
    keep_truth = bool(sim["keep_truth"] or args.keep_truth or args.truth)
    panel = simulate_panel(spec, seed, init=init, keep_truth=keep_truth,
                           policy=policy)
    write_panel(panel, args.out)
    lines = [f"seed={seed} individuals={spec.n_individuals} "
             f"horizon={spec.horizon} init={init.kind} policy={policy}"]
    lines.append(f"wrote {args.out}")
    if keep_truth:
        truth_path = args.truth or f"{args.out}.truth.csv"
        write_truth(panel, truth_path)
        lines.append(f"wrote {truth_path}")
    print("\n".join(lines))
    return EXIT_OK


def _estimation_to_dict(rep):
    out = {
        "pathway": rep.pathway,
        "order": rep.order,
        "n_individuals": rep.n_individuals,
        "horizon": rep.horizon,
        "upsilon": {str(u): M.tolist() for u, M in rep.upsilon.lags.items()},
        "counts": {str(u): c for u, c in rep.upsilon.meta["counts"].items()},
        "omega": None if rep.omega is None else rep.omega.tolist(),
        "omega_method": rep.omega_method,
        "diagnostics": to_plain(rep.diagnostics),
    }
    if rep.rho is not None:
        out["rho"] = {str(u): v for u, v in rep.rho.items()}
    if rep.a_hat is not None:
        out["a_hat_mean"] = rep.a_hat.mean(axis=0).tolist()
        out["a_hat"] = rep.a_hat.tolist()
        out["sigma2_hat"] = rep.sigma2_hat.tolist()
    if rep.mu_hat is not None:
        out["mu_hat"] = {f"{v},{u}": M.tolist()
                         for (v, u), M in rep.mu_hat.entries.items()}
    return out


def _truth_errors(panel, reports):
    truth_A = np.stack([companion_matrix(c) for c in panel.truth_coeffs])
    mean_sigma2 = float(panel.truth_sigma2.mean())
    p = panel.order
    omega_emp = np.zeros((p, p))
    omega_emp[p - 1, p - 1] = mean_sigma2
    out = {"mean_truth_sigma2": mean_sigma2}
    for rep in reports:
        if rep.pathway == "per_individual":
            errs = np.linalg.norm(rep.a_hat - truth_A, axis=(1, 2))
            s2_err = np.abs(rep.sigma2_hat - panel.truth_sigma2)
            out["per_individual"] = {
                "coef_error": errs.tolist(),
                "coef_error_mean": float(errs.mean()),
                "coef_error_max": float(errs.max()),
                "sigma2_error_mean": float(s2_err.mean()),
            }
        elif rep.omega is not None:
            out["cross_sectional"] = {
                "omega_error_max": float(np.max(np.abs(rep.omega - omega_emp))),
            }
    return out


def cmd_estimate(args):
    truth = args.truth if args.truth else None
    panel = read_panel(args.panel, order=args.order, truth_path=truth)
    reports = []
    if args.pathway in ("cross_sectional", "both"):
        reports.append(estimate_cross_sectional(panel, max_lag=args.max_lag))
    if args.pathway in ("per_individual", "both"):
        reports.append(estimate_per_individual(panel, max_power=args.max_power,
                                               max_lag=args.max_lag))
    report = {
        "command": "estimate",
        "panel": str(args.panel),
        "order": panel.order,
        "options": {
            "pathway": args.pathway,
            "max_lag": args.max_lag,
            "max_power": args.max_power,
        },
        "pathways": {r.pathway: _estimation_to_dict(r) for r in reports},
    }
    if panel.truth_coeffs is not None:
        report["truth_errors"] = _truth_errors(panel, reports)
    _emit(report, args.out, f"estimated {args.pathway} on {args.panel}")
    return EXIT_OK


def cmd_mc(args):
    cfg = load_config(args.config)
    eff = effective_config(cfg)
    experiment, plan = plan_from(cfg)
    from dataclasses import replace

    seed = _resolve_seed(args.seed, cfg)
    overrides = {"seed": seed}
    if args.workers is not None:
        overrides["workers"] = int(args.workers)
    plan = replace(plan, **overrides)
    eff["seed"] = seed
    if experiment == "consistency":
        result = run_consistency(plan)
        body = result.to_dict()
        passed = result.passed
    elif experiment == "clt":
        result = run_clt(plan)
        body = result.to_dict()
        passed = result.passed
    elif experiment == "ahat":
        result = run_ahat_convergence(plan)
        body = result.to_dict()
        passed = result.passed
    else:
        panel = simulate_panel(plan.spec, plan.seed, init=plan.init,
                               policy=plan.policy)
        diag = run_stationarity_diagnostic(panel)
        body = diag.to_dict()
        passed = not diag.flagged
    report = {
        "command": "mc",
        "experiment": experiment,
        "effective_config": eff,
        "result": body,
        "passed": passed,
    }
    verdict = {True: "pass", False: "fail", None: "n/a"}[passed]
    _emit(report, args.out, f"experiment {experiment}: {verdict}")
    return EXIT_ACCEPTANCE if passed is False else EXIT_OK


def cmd_oracle(args):
    if args.subcase == "list":
        for name, usage in list_oracles().items():
            print(f"{name}: {usage}")
        return EXIT_OK
    print(run_oracle(args.subcase, args.args).render())
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rcarpanel",
        description="Random-coefficient autoregressive panels: exact moments, "
                    "simulation, estimation, and Monte Carlo verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="stationarity / covariance / spectral report")
    pa.add_argument("config", help="YAML config with a model section")
    pa.add_argument("--out", help="report path (JSON); prints to stdout if omitted")
    pa.add_argument("--tol", type=float, help="series truncation tolerance")
    pa.add_argument("--max-terms", type=int, help="series term budget")
    pa.add_argument("--boundary-tol", type=float,
                    help="stationarity boundary tolerance")
    pa.add_argument("--seed", type=int, help="seed (sampling for gaussian laws)")
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("simulate", help="generate a panel CSV")
    ps.add_argument("config", help="YAML config with a model section")
    ps.add_argument("--out", required=True, help="panel CSV path")
    ps.add_argument("--truth", help="truth sidecar path (implies keeping truth)")
    ps.add_argument("--keep-truth", action="store_true",
                    help="write the truth sidecar next to the panel")
    ps.add_argument("--seed", type=int, help="panel seed")
    ps.add_argument("--init", help="override init: kind[:args], e.g. burn_in:500")
    ps.set_defaults(func=cmd_simulate)

    pe = sub.add_parser("estimate", help="estimate moments from a panel CSV")
    pe.add_argument("panel", help="panel CSV path")
    pe.add_argument("--truth", help="truth sidecar path (adds error columns)")
    pe.add_argument("--order", type=int, default=1, help="model order p")
    pe.add_argument("--pathway", default="cross_sectional",
                    choices=["cross_sectional", "per_individual", "both"])
    pe.add_argument("--max-lag", type=int, default=2)
    pe.add_argument("--max-power", type=int, default=1,
                    help="moment power budget for the per-individual pathway")
    pe.add_argument("--out", help="report path (JSON); stdout if omitted")
    pe.set_defaults(func=cmd_estimate)

    pm = sub.add_parser("mc", help="run a Monte Carlo experiment")
    pm.add_argument("config", help="YAML config with model and mc sections")
    pm.add_argument("--out", help="result path (JSON); stdout if omitted")
    pm.add_argument("--seed", type=int, help="plan seed")
    pm.add_argument("--workers", type=int, help="thread count for replications")
    pm.set_defaults(func=cmd_mc)

    po = sub.add_parser("oracle", help="print reference-value derivations")
    po.add_argument("subcase", help="oracle name, or 'list'")
    po.add_argument("args", nargs="*", help="positional or key=value arguments")
    po.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"rcarpanel: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"rcarpanel: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _NUMERICAL_ERRORS as exc:
        print(f"rcarpanel: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RcarError as exc:
        print(f"rcarpanel: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"rcarpanel: io error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
