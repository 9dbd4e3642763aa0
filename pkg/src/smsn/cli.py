"""
Command-line front end.

Every subcommand reads a distribution document (``--input``, ``-`` for
stdin) and writes JSON, or CSV for ``sample``, to ``--output`` or stdout.

Exit codes: 0 success, 2 parse error, 3 validation error (including a
failed ``validate`` run), 4 numeric failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from typing import Dict, List, Optional

import numpy as np

from smsn import __version__
from smsn.canonical import (
    canonical_cp,
    canonical_ics_omega_sigma,
    canonical_ics_sigma_kappa,
    verify_canonical,
)
from smsn.distributions import Degenerate, ScaleMixtureSN, SkewT, dist_from_dict, sample
from smsn.exceptions import (
    ConvergenceError,
    DegeneratePairError,
    SMSNError,
    UnsupportedOperationError,
    ValidationError,
)
from smsn.mc_oracle import empirical_mardia, empirical_scatter_pair, write_samples_csv
from smsn.mode import smsn_mode, sn_mode_equation, st_mode_equation
from smsn.moments import analytic_kappa, canonical_moments, mardia_indices, smsn_mean, smsn_mean_cov

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4

DEFAULT_TOLERANCES = {
    "canonical": 1e-8,
    "eigen": 1e-10,
    "trace": 1e-10,
    "trace_kappa": 1e-8,
    "mc_z": 3.0,
    "mode_residual": 1e-14,
    "mode_gradient": 1e-8,
}
DEFAULT_N = {"sample": 1000, "validate": 200_000, "canonicalize": 1_000_000}
EMPIRICAL_BATCHES = 20


class ParseError(Exception):
    """Input that cannot be read as a distribution document."""


def _clean(obj):
    """Make ``obj`` JSON serializable; non-finite floats become ``null``."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(_clean(obj), indent=2, allow_nan=False)


def _load(path: str) -> ScaleMixtureSN:
    try:
        if path == "-":
            text = sys.stdin.read()
        else:
            with open(path) as fh:
                text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {path}: {exc}") from None
    if not isinstance(spec, dict):
        raise ParseError("distribution document must be a JSON object")
    return dist_from_dict(spec)


def _tolerances(overrides: List[str]) -> Dict[str, float]:
    tol = dict(DEFAULT_TOLERANCES)
    for item in overrides or []:
        key, sep, val = item.partition("=")
        if not sep or key not in tol:
            raise ParseError(f"bad --tol-override {item!r}; keys: {', '.join(sorted(tol))}")
        try:
            tol[key] = float(val)
        except ValueError:
            raise ParseError(f"bad --tol-override value {val!r}") from None
    return tol


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def _n(args, command: str) -> int:
    return args.n if args.n is not None else DEFAULT_N[command]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_describe(dist: ScaleMixtureSN, args) -> dict:
    mixing = dist.mixing
    out = dist.to_dict()
    mean = smsn_mean(dist) if mixing.has_moment(1) else None
    cov = smsn_mean_cov(dist)[1] if mixing.has_moment(2) else None
    out.update(
        mean=mean,
        covariance=cov,
        alpha_star=dist.params.alpha_star,
        delta_star=dist.params.delta_star,
        moments={
            f"E(S^{m})": {"exists": mixing.has_moment(m), "requires": _requires(mixing, m)}
            for m in range(1, 5)
        },
        indices=mardia_indices(dist).conditions,
    )
    return out


def _requires(mixing, m: int) -> str:
    cond = mixing.moment_condition(m)
    return "none" if cond is None else cond


def _empirical_kurtosis(dist: ScaleMixtureSN, args) -> dict:
    n = _n(args, "canonicalize")
    if n < 2 * EMPIRICAL_BATCHES * (dist.d + 2):
        raise ValidationError(f"--n {n} is too small for the empirical kurtosis route")
    X = sample(dist, n, _rng(args.seed, 0))
    est = empirical_scatter_pair(X)
    ct = canonical_ics_sigma_kappa(dist, est.Kappa, est.Sigma)
    # batch means give the Monte-Carlo spread of the canonical shape
    batches = []
    for chunk in np.array_split(X, EMPIRICAL_BATCHES):
        e = empirical_scatter_pair(chunk)
        batches.append(canonical_ics_sigma_kappa(dist, e.Kappa, e.Sigma).canonical_params.alpha)
    se = np.std(np.array(batches), axis=0, ddof=1) / math.sqrt(EMPIRICAL_BATCHES)
    return {"ct": ct, "alpha_se": se, "n": n}


def cmd_canonicalize(dist: ScaleMixtureSN, args) -> dict:
    extra = {}
    if args.method == "cp":
        ct = canonical_cp(dist)
    elif args.method == "ics":
        ct = canonical_ics_omega_sigma(dist)
    elif args.empirical:
        emp = _empirical_kurtosis(dist, args)
        ct = emp["ct"]
        extra = {"canonical_alpha_se": emp["alpha_se"], "n": emp["n"], "seed": args.seed}
    else:
        ct = canonical_ics_sigma_kappa(dist, analytic_kappa(dist))
    out = ct.to_dict()
    out["canonical_alpha"] = ct.canonical_params.alpha
    if ct.fallback:
        out["fallback"] = ct.fallback
    out.update(extra)
    if args.verify:
        out["verify"] = verify_canonical(ct, dist).to_dict()
    return out


def cmd_indices(dist: ScaleMixtureSN, args) -> dict:
    mi = mardia_indices(dist)
    out = mi.to_dict()
    out["beta2d"] = mi.beta2d
    if args.mc:
        X = sample(dist, args.mc, _rng(args.seed, 0))
        rep = empirical_mardia(X, seed=args.seed)
        out["empirical"] = rep.to_dict()
        out["z_scores"] = {
            "gamma1d": _z(rep.estimate["b1d"], mi.gamma1d, rep.mc_se["b1d"]),
            "gamma2d": _z(rep.estimate["g2d"], mi.gamma2d, rep.mc_se["g2d"]),
        }
    return out


def _z(est: float, exact: Optional[float], se: float) -> Optional[float]:
    if exact is None or not se > 0:
        return None
    return (est - exact) / se


def cmd_mode(dist: ScaleMixtureSN, args) -> dict:
    return smsn_mode(dist).to_dict()


def cmd_sample(dist: ScaleMixtureSN, args) -> str:
    n = _n(args, "sample")
    X = sample(dist, n, _rng(args.seed, 0))
    if args.format == "json":
        return dumps(X)
    buf = io.StringIO()
    write_samples_csv(X, buf)
    return buf.getvalue()


class _Checks:
    def __init__(self):
        self.items = []

    def add(self, name, value, tol, passed=None):
        value = float(value)
        ok = bool(value <= tol) if passed is None else bool(passed)
        self.items.append({"name": name, "status": "pass" if ok else "fail", "value": value, "tolerance": tol})

    def skip(self, name, reason):
        self.items.append({"name": name, "status": "skipped", "reason": reason})

    @property
    def passed(self) -> bool:
        return all(c["status"] != "fail" for c in self.items)


def cmd_validate(dist: ScaleMixtureSN, args) -> dict:
    tol = _tolerances(args.tol_override)
    params, mixing = dist.params, dist.mixing
    d = dist.d
    checks = _Checks()

    ct = canonical_cp(dist)
    checks.add("canonical_cp", _worst(verify_canonical(ct, dist, tol["canonical"])), tol["canonical"])

    if mixing.has_moment(2):
        ct = canonical_ics_omega_sigma(dist)
        checks.add("canonical_ics", _worst(verify_canonical(ct, dist, tol["canonical"])), tol["canonical"])
        cm = canonical_moments(dist)
        _, Sigma = smsn_mean_cov(dist)
        if ct.fallback is None:
            expected = np.sort(np.r_[cm.sigma_star_sq, np.full(d - 1, cm.sigma_sq)])
            checks.add("eigenstructure", np.max(np.abs(ct.eigenvalues - expected)), tol["eigen"])
        else:
            checks.skip("eigenstructure", f"flat spectrum, {ct.fallback} fallback used")
        var_sum = cm.sigma_star_sq + (d - 1) * cm.sigma_sq
        trace = np.trace(np.linalg.solve(params.Omega, Sigma))
        checks.add("trace_omega_sigma", abs(trace - var_sum) / max(1.0, abs(var_sum)), tol["trace"])
    else:
        for name in ("canonical_ics", "eigenstructure", "trace_omega_sigma"):
            checks.skip(name, _requires(mixing, 2))

    mi = mardia_indices(dist)
    if mixing.has_moment(4):
        K = analytic_kappa(dist)
        _, Sigma = smsn_mean_cov(dist)
        try:
            ct = canonical_ics_sigma_kappa(dist, K)
            checks.add("canonical_kurtosis", _worst(verify_canonical(ct, dist, tol["canonical"])), tol["canonical"])
        except DegeneratePairError as exc:
            checks.skip("canonical_kurtosis", str(exc))
        beta2 = mi.beta2d
        trace = np.trace(np.linalg.solve(Sigma, K))
        checks.add("trace_sigma_kappa", abs(trace - beta2) / max(1.0, abs(beta2)), tol["trace_kappa"])
    else:
        for name in ("canonical_kurtosis", "trace_sigma_kappa"):
            checks.skip(name, _requires(mixing, 4))

    have_g1 = mi.gamma1d is not None
    have_g2 = mi.gamma2d is not None
    if have_g1 or have_g2:
        n = _n(args, "validate") if not args.mc else args.mc
        X = sample(dist, n, _rng(args.seed, 0))
        rep = empirical_mardia(X, seed=args.seed)
        pairs = (("gamma1d", "b1d", mi.gamma1d), ("gamma2d", "g2d", mi.gamma2d))
        for name, key, exact in pairs:
            if exact is None:
                checks.skip(f"index_{name}", mi.conditions[name]["requires"])
                continue
            z = _z(rep.estimate[key], exact, rep.mc_se[key])
            checks.add(f"index_{name}", abs(z), tol["mc_z"])
    else:
        for name in ("gamma1d", "gamma2d"):
            checks.skip(f"index_{name}", mi.conditions[name]["requires"])

    try:
        res = smsn_mode(dist)
    except (ConvergenceError, UnsupportedOperationError) as exc:
        checks.skip("mode_gradient", str(exc))
    else:
        a = params.alpha_star
        if isinstance(mixing, Degenerate):
            checks.add("mode_residual", abs(sn_mode_equation(res.scalar_root, a)), tol["mode_residual"])
        elif isinstance(mixing, SkewT):
            resid = st_mode_equation(res.scalar_root, a, mixing.nu, d)
            checks.add("mode_residual", abs(resid), tol["mode_residual"])
        checks.add("mode_gradient", res.residual_gradient_norm, tol["mode_gradient"])

    return {"passed": checks.passed, "checks": checks.items, "seed": args.seed}


def _worst(report) -> float:
    return max(c["deviation"] for c in report.checks.values())


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", "-i", default="-", help="distribution JSON (default: stdin)")
    common.add_argument("--output", "-o", default=None, help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    common.add_argument("--n", type=_positive_int, default=None, help="Monte-Carlo sample count")

    parser = _Parser(prog="smsn", description="Scale mixtures of multivariate skew-normal distributions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("describe", parents=[common], help="mean, covariance, alpha*, delta*, moment flags")

    p = sub.add_parser("canonicalize", parents=[common], help="canonical transform")
    p.add_argument("--method", choices=("cp", "ics", "kurtosis"), default="cp")
    p.add_argument("--empirical", action="store_true", help="estimate K from --n samples (kurtosis only)")
    p.add_argument("--verify", action="store_true", help="append the verification report")

    p = sub.add_parser("indices", parents=[common], help="Mardia skewness and kurtosis")
    p.add_argument("--mc", type=_positive_int, default=None, metavar="N", help="add N-sample MC estimates")

    sub.add_parser("mode", parents=[common], help="mode via scalar root finding")

    p = sub.add_parser("sample", parents=[common], help="draw --n samples")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("validate", parents=[common], help="check closed forms against oracles")
    p.add_argument("--mc", type=_positive_int, default=None, metavar="N", help="MC sample count")
    p.add_argument("--tol-override", action="append", default=[], metavar="KEY=VAL")
    return parser


COMMANDS = {
    "describe": cmd_describe,
    "canonicalize": cmd_canonicalize,
    "indices": cmd_indices,
    "mode": cmd_mode,
    "sample": cmd_sample,
    "validate": cmd_validate,
}


def _emit(text: str, path: Optional[str]) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            _tolerances(args.tol_override)
        if args.command == "canonicalize" and args.empirical and args.method != "kurtosis":
            raise ParseError("--empirical requires --method kurtosis")
        dist = _load(args.input)
        result = COMMANDS[args.command](dist, args)
    except ParseError as exc:
        print(f"smsn: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConvergenceError, FloatingPointError) as exc:
        print(f"smsn: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SMSNError, ValueError) as exc:
        print(f"smsn: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    _emit(result if isinstance(result, str) else dumps(result), args.output)
    if args.command == "validate" and not result["passed"]:
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
