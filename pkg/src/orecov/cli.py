"""Command-line entry point ``orecov``.

Every subcommand exits 0 only when all checks of its run pass.  ``--config``
takes a JSON object whose keys (flag names with ``-`` or ``_``) override the
values given on the command line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .classes import (
    ClassMember,
    WorstCaseProblem,
    fejer_member,
    random_w2r_member,
    worst_case_report,
)
from .discretization import SampleSet, build_sample_set, certify
from .errors import OrecovError
from .harness import (
    ExperimentConfig,
    emit,
    fit_rate,
    run_experiment,
    sweep_checks,
    use_log_term,
)
from .recovery import l2_error, lsw_solve, recovery_matrix, verify_at1
from .trig import FrequencySet, TrigPolynomial, basis_matrix, evaluate, hyperbolic_cross

log = logging.getLogger("orecov")


def _write_json(path, payload):
    text = json.dumps(payload, indent=2)
    if path in (None, "-"):
        print(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _read_json(path):
    return json.loads(Path(path).read_text())


def load_frequencies(path) -> FrequencySet:
    data = _read_json(path)
    return FrequencySet.from_json(data.get("frequency_set", data))


def load_samples(path) -> SampleSet:
    data = _read_json(path)
    return SampleSet.from_json(data.get("sample_set", data))


def load_function(path):
    """A ClassMember, a TrigPolynomial, or a generator spec such as
    {"class": "w2r", "r": 2, "K": 64, "d": 1, "seed": 0}."""
    data = _read_json(path)
    if "class_id" in data:
        return ClassMember.from_json(data)
    if "coefficients" in data:
        return TrigPolynomial.from_json(data)
    kind = data.get("class")
    d, r, K = int(data.get("d", 1)), float(data["r"]), data["K"]
    if kind == "w2r":
        return random_w2r_member(hyperbolic_cross(d, K), r, int(data.get("seed", 0)))
    if kind == "w1r":
        return fejer_member(d, int(K), r, data.get("shift"))
    raise ValueError(f"unrecognized function spec in {path}")


def _report_checks(checks: dict) -> int:
    for name, ok in checks.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    return 0 if all(checks.values()) else 1


def cmd_discretize(args) -> int:
    freqs = hyperbolic_cross(args.d, args.Q)
    S, cert = build_sample_set(
        freqs, args.method, seed=args.seed, kappa=args.kappa, c=args.c,
        c1_floor=args.c1_floor, grid_s=args.grid_s,
    )
    _write_json(args.output, {
        "frequency_set": freqs.to_json(),
        "sample_set": S.to_json(),
        "certificate": cert.to_json(),
    })
    print(f"N={cert.N} m={cert.m} lambda_min={cert.lambda_min!r} lambda_max={cert.lambda_max!r} "
          f"C1={cert.C1!r} C2={cert.C2!r}", file=sys.stderr)
    checks = {"c1_floor": cert.C1 >= args.c1_floor}
    if cert.constant_sandwich is not None:
        checks["constant_sandwich"] = cert.constant_sandwich
    return _report_checks(checks)


def cmd_recover(args) -> int:
    freqs = load_frequencies(args.frequencies)
    S = load_samples(args.samples)
    f = load_function(args.function)
    spectrum = f.f if isinstance(f, ClassMember) else f
    values = evaluate(spectrum, S.points)
    result = lsw_solve(freqs, S, values)
    resid = values - evaluate(result.approximant, S.points)
    ortho = np.abs(basis_matrix(freqs, S.points).conj().T @ (S.weights * resid))
    union = FrequencySet(np.concatenate([spectrum.basis.frequencies, freqs.frequencies]))
    report = result.to_json()
    report["l2_error"] = l2_error(spectrum.embed(union), result.approximant)
    report["max_normal_equation_residual"] = float(ortho.max())
    _write_json(args.report, report)
    return _report_checks({"residual_orthogonality": float(ortho.max()) <= 1e-9})


def cmd_worstcase(args) -> int:
    freqs = hyperbolic_cross(args.d, args.Q)
    box = hyperbolic_cross(args.d, args.box_factor * args.Q)
    S, cert = build_sample_set(
        freqs, args.method, seed=args.seed, kappa=args.kappa, c=args.c,
        c1_floor=args.c1_floor, grid_s=2 * box.radius() + 1,
    )
    A = recovery_matrix(freqs, S, certificate=cert)
    report = worst_case_report(WorstCaseProblem(box, freqs, A, args.r), S)
    payload = report.to_json()
    payload["certificate"] = cert.to_json()
    _write_json(args.output, payload)
    print(f"worst-case error {report.value!r} (truncation {report.truncation!r})", file=sys.stderr)
    return _report_checks({"at_least_truncation": report.value >= report.truncation * (1 - 1e-9)})


def cmd_rates(args) -> int:
    cfg = ExperimentConfig(
        class_id=args.class_id, r=args.r, d=args.d, n_list=args.n_list, method=args.method,
        kappa=args.kappa, c=args.c, seed=args.seed, box_factor=args.box_factor,
        c1_floor=args.c1_floor, monte_carlo=args.monte_carlo, output_dir=args.output_dir,
        name=args.name,
    )
    sweep = run_experiment(cfg)
    fit = None
    if len(sweep.points) >= 3:
        fit = fit_rate(sweep.points, with_log_term=use_log_term(sweep.points, cfg.d))
    paths = emit(sweep, fit, cfg.output_dir)
    for p in sweep.points:
        print(f"n={p.n} N={p.N} m={p.m} error={p.error:.6e} C1={p.C1:.4f} C2={p.C2:.4f}")
    if fit:
        print(f"slope={fit.slope:.4f} log_exponent={fit.log_exponent} residual={fit.residual:.3e}")
    print(f"wrote {paths['csv']}, {paths['manifest']}, {paths['svg']}", file=sys.stderr)
    return _report_checks(sweep_checks(sweep, fit))


def cmd_verify_at1(args) -> int:
    if args.frequencies and args.samples and args.function:
        freqs = load_frequencies(args.frequencies)
        S = load_samples(args.samples)
        members = [load_function(args.function)]
        cert = certify(freqs, S)
    else:
        freqs = hyperbolic_cross(args.d, args.Q)
        S, cert = build_sample_set(
            freqs, args.method, seed=args.seed, kappa=args.kappa, c=args.c, c1_floor=args.c1_floor,
        )
        box = hyperbolic_cross(args.d, args.K)
        members = [random_w2r_member(box, args.r, args.seed + j) for j in range(args.members)]
    reports = [verify_at1(f, freqs, S, certificate=cert, slack=args.slack) for f in members]
    _write_json(args.report, {
        "certificate": cert.to_json(),
        "reports": [rep.to_json() for rep in reports],
    })
    for j, rep in enumerate(reports):
        print(f"member {j}: lhs={rep.lhs:.4e} d_inf~{rep.d_inf_estimate:.4e} "
              f"bound={rep.bound:.4e} ratio={rep.ratio:.4f}")
    return _report_checks({f"member_{j}_ratio": rep.passed for j, rep in enumerate(reports)})


def _sampling_flags(p, method="bss"):
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--method", choices=["grid", "random", "bss"], default=method)
    p.add_argument("--kappa", type=float, default=10.0)
    p.add_argument("--c", type=float, default=12.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c1-floor", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orecov", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file whose keys override flags")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discretize", help="build and certify a sample set on a hyperbolic cross")
    _sampling_flags(p)
    p.add_argument("--Q", type=float, default=8)
    p.add_argument("--grid-s", type=int, default=None)
    p.add_argument("--output", "-o", default="-")
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("recover", help="weighted least-squares recovery from files")
    p.add_argument("--frequencies", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--function", required=True)
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("worstcase", help="certified worst-case error over band-limited W^r_2")
    _sampling_flags(p)
    p.add_argument("--Q", type=int, default=8)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--box-factor", type=float, default=4.0)
    p.add_argument("--output", "-o", default="-")
    p.set_defaults(func=cmd_worstcase)

    p = sub.add_parser("rates", help="sweep n, fit the decay rate, emit CSV/JSON/SVG")
    _sampling_flags(p, method="random")
    p.add_argument("--class", dest="class_id", choices=["w2r", "w1r"], default="w2r")
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--n-list", type=lambda s: [int(v) for v in s.split(",") if v], default=None)
    p.add_argument("--box-factor", type=float, default=4.0)
    p.add_argument("--monte-carlo", type=int, default=0)
    p.add_argument("--output-dir", default="results")
    p.add_argument("--name", default="")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("verify-at1", help="check the uniform-error bound on seeded W^r_2 members")
    _sampling_flags(p)
    p.add_argument("--Q", type=float, default=8)
    p.add_argument("--K", type=float, default=64)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--members", type=int, default=20)
    p.add_argument("--slack", type=float, default=0.0)
    p.add_argument("--frequencies")
    p.add_argument("--samples")
    p.add_argument("--function")
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_verify_at1)
    return parser


def apply_config(args, path):
    overrides = _read_json(path)
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if dest == "class":
            dest = "class_id"
        if not hasattr(args, dest):
            raise ValueError(f"config key {key!r} is not an option of {args.command}")
        setattr(args, dest, value)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        if args.config:
            apply_config(args, args.config)
        return args.func(args)
    except (OrecovError, ValueError, OSError) as exc:
        print(f"orecov: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
