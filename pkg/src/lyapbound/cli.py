"""Command-line interface.

Every subcommand reads its parameters from defaults, then an optional JSON
config (``--config``), then per-parameter flags, in that order. Results go
to ``--out`` (default stdout) as CSV or JSON, preceded by a header that
records the package version and the resolved configuration. The same
configuration and seed always produce byte-identical output.

Exit codes: 0 pass, 2 hypotheses not met, 3 a certified inequality failed,
4 bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import __version__
from .almost_commuting import PDCocycleSample, almost_commuting_bound, gamma_t_probe
from .avalanche import PRESETS, aligned_family, ap_sandwich, check_ap, require_ap
from .dynamics import Cocycle, PolymerSystem, bernoulli, markov_with_correlation
from .errors import BoundViolated, ConfigError, HypothesisNotMet, LyapBoundError
from .estimator import mc_lyapunov
from .gt_bounds import GTQuadrature, example_matrices, example_triple, gt_check, random_hermitian_family
from .rng import make_rng
from .schrodinger import admissible_point, polymer_lower_bound, spectral_points
from .stability import (
    blocking_plan,
    jacobi_regime,
    jacobi_stability,
    off_spectrum_sandwich,
    perturb,
    sample_diagonal_family,
    stability2_gap,
)

#: Frozen CSV column order.
COLUMNS = ("subcommand", "case", "quantity", "kind", "value", "stderr", "pass")

EXIT_OK, EXIT_HYPOTHESIS, EXIT_BOUND, EXIT_CONFIG = 0, 2, 3, 4

_SQRT1000 = math.sqrt(1000.0)


@dataclass
class Outcome:
    rows: list
    ok: bool


def _row(case, quantity, kind, value, stderr=None, passed=None) -> dict:
    return {
        "case": case,
        "quantity": quantity,
        "kind": kind,
        "value": float(value),
        "stderr": None if stderr is None else float(stderr),
        "pass": passed,
    }


# ---------------------------------------------------------------------------
# subcommands


def run_example(p: dict, seed: int) -> Outcome:
    a, b, pf = p["a"], p["b"], p["pfrak"]
    worst, gt, upper = example_triple(a, b, pf)
    A0, A1 = example_matrices(a, b)
    res = mc_lyapunov(bernoulli(pf), Cocycle.from_mapping({0: A0, 1: A1}), p["n"], p["trials"], seed)
    band = 3.0 * res.stderr
    ok = worst <= gt <= res.mean + band and res.mean <= upper + band
    rows = [
        _row("example", "worst_case", "formula", worst),
        _row("example", "gt_bound", "certified", gt),
        _row("example", "upper_bound", "formula", upper),
        _row("example", "mc_mean", "mc", res.mean, res.stderr, ok),
    ]
    return Outcome(rows, ok)


def _polymer_sampler(p: dict):
    if p["sampler"] == "iid":
        return bernoulli(p["pfrak"])
    if p["sampler"] == "markov":
        return markov_with_correlation(p["pfrak"], p["corr"])
    raise ConfigError("sampler must be 'iid' or 'markov'")


def run_polymer(p: dict, seed: int) -> Outcome:
    if p["E"] is None:
        E, v, d1, d2 = admissible_point(p["p"])
        v = p["v"] if p["v"] is not None else v
    else:
        if None in (p["v"], p["delta1"], p["delta2"]):
            raise ConfigError("with E given, v, delta1 and delta2 are required")
        E, v, d1, d2 = p["E"], p["v"], p["delta1"], p["delta2"]
    d1 = p["delta1"] if p["delta1"] is not None else d1
    d2 = p["delta2"] if p["delta2"] is not None else d2
    cert = polymer_lower_bound(E, v, p["p"], p["pfrak"], d1, d2)
    ps = PolymerSystem(p["p"], v, _polymer_sampler(p))
    res = mc_lyapunov(ps, ps.site_cocycle(E), p["n_blocks"], p["trials"], seed)
    ok = cert.value <= res.mean + 3.0 * res.stderr
    x = cert.extras
    rows = [
        _row("point", "E", "input", E),
        _row("point", "v", "input", v),
        _row("point", "delta1", "input", d1),
        _row("point", "delta2", "input", d2),
        _row("certificate", "log_kappa", "certified", x["log_kappa"]),
        _row("certificate", "eps", "certified", cert.eps),
        _row("certificate", "b0", "certified", x["b0"]),
        _row("certificate", "mu", "certified", x["mu"]),
        _row("bound", "half_pfrak_p_log_mu", "certified", cert.value),
        _row("bound", "alignment_deficit", "measured", x["alpha"]),
        _row("bound", "exact_ergodic_bound", "certified", x["exact_bound"]),
        _row("bound", "half_pfrak_p_log_b", "stated_form", x["stated_form_log_b"]),
        _row("bound", "chain_value", "formula", x["chain_value"], passed=bool(x["chain_closes"])),
    ]
    for k, (ek, ev) in enumerate(spectral_points(p["p"])):
        rows.append(_row(f"spectral_point_{k}", "E", "exact", ek))
        rows.append(_row(f"spectral_point_{k}", "v", "exact", ev))
    rows.append(_row("mc", "block_exponent", "mc", res.mean, res.stderr, ok))
    return Outcome(rows, ok)


def run_offspectrum(p: dict, seed: int) -> Outcome:
    rng = make_rng(seed, 0)
    n = p["n"]
    v = np.where(rng.random(n) < p["p0"], p["v0"], p["v1"])
    cert = off_spectrum_sandwich(p["E"] - v, r0=p["r0"])
    x = cert.extras
    ok = x["measured_gap"] <= cert.value
    rows = [
        _row("offspectrum", "exponent", "measured", x["exponent"]),
        _row("offspectrum", "mean_log_r", "measured", x["mean_log_r"]),
        _row("offspectrum", "gap", "measured", x["measured_gap"]),
        _row("offspectrum", "gap_bound", "certified", cert.value, passed=ok),
    ]
    return Outcome(rows, ok)


def run_stability(p: dict, seed: int) -> Outcome:
    plan = blocking_plan(p["eps1"], p["Gamma"], p["eta"], p["C0"], p["C1"])
    rows = [_row("plan", "nu", "exact", plan.nu), _row("plan", "delta0", "exact", plan.delta0)]
    ok = True
    for f in range(p["families"]):
        rng = make_rng(seed, f)
        fam = sample_diagonal_family(rng, p["n"], p["d"], p["Gamma"], p["eta"], p["C0"], p["C1"])
        M = perturb(rng, fam.matrices(), p["delta_frac"] * plan.delta0)
        gap, cert = stability2_gap(fam, M, plan)
        good = gap <= cert.value
        ok &= good
        rows.append(_row(f"family_{f}", "gap", "measured", gap))
        rows.append(_row(f"family_{f}", "gap_bound", "certified", cert.value, passed=good))
    return Outcome(rows, ok)


def run_jacobi(p: dict, seed: int) -> Outcome:
    rng = make_rng(seed, 0)
    th = rng.uniform(p["theta_lo"], p["theta_hi"], p["n"])
    reg = jacobi_regime(th)
    if p["E"] is not None:
        E = p["E"]
    else:
        plan = blocking_plan(p["eps1"], reg.Gamma, reg.eta, reg.C0, reg.C1)
        E = p["E_frac"] * plan.delta0 / reg.C
    gap, cert = jacobi_stability(E, th, p["eps1"])
    ok = gap <= cert.value
    rows = [
        _row("jacobi", "E", "input", E),
        _row("jacobi", "E0", "exact", cert.extras["E0"]),
        _row("jacobi", "gap", "measured", gap),
        _row("jacobi", "gap_bound", "certified", cert.value, passed=ok),
    ]
    return Outcome(rows, ok)


def run_gt_check(p: dict, seed: int) -> Outcome:
    quad = GTQuadrature(p["half_width"], p["nodes"])
    rows, ok = [], True
    worst = math.inf
    for f in range(p["families"]):
        H = random_hermitian_family(make_rng(seed, f), max_n=p["max_n"], max_d=p["max_d"])
        c = gt_check(H, quad)
        good = c.slack >= -p["slack_tol"]
        ok &= good
        worst = min(worst, c.slack)
        rows.append(_row(f"family_{f}", "slack", "measured", c.slack, passed=good))
    rows.append(_row("all", "min_slack", "measured", worst, passed=ok))
    return Outcome(rows, ok)


def run_ap_check(p: dict, seed: int) -> Outcome:
    if p["preset"] not in PRESETS:
        raise ConfigError(f"preset must be one of {sorted(PRESETS)}")
    params = PRESETS[p["preset"]]
    seq = aligned_family(make_rng(seed, 0), p["n"], p["d"], noise=p["noise"], max_angle=p["max_angle"])
    rep = require_ap(check_ap(seq, params, kappa=p["kappa"], eps=p["eps"]))
    rows = [
        _row("ap", "kappa", "certified", rep.kappa),
        _row("ap", "eps", "certified", rep.eps),
        _row("ap", "measured_kappa", "measured", rep.measured_kappa),
        _row("ap", "measured_eps", "measured", rep.measured_eps),
    ]
    if rep.n >= 2:
        s = ap_sandwich(seq, params, rep.kappa, rep.eps)
        rows += [
            _row("sandwich", "log_lower", "certified", s.log_lower),
            _row("sandwich", "log_middle", "measured", s.log_middle),
            _row("sandwich", "log_upper", "certified", s.log_upper, passed=True),
        ]
    return Outcome(rows, True)


def _matrices(value, name: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of square matrices") from None
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ConfigError(f"{name} must be a list of square matrices")
    return arr


def run_estimate(p: dict, seed: int) -> Outcome:
    mats = _matrices(p["mats"], "mats")
    if mats.shape[0] != 2:
        raise ConfigError("estimate takes exactly two matrices (symbols 0 and 1)")
    sys_ = bernoulli(p["p0"]) if p["corr"] == 0 else markov_with_correlation(p["p0"], p["corr"])
    res = mc_lyapunov(sys_, Cocycle.from_mapping({0: mats[0], 1: mats[1]}), p["n"], p["trials"], seed)
    return Outcome([_row("estimate", "top_exponent", "mc", res.mean, res.stderr)], True)


def run_almost_commuting(p: dict, seed: int) -> Outcome:
    sample = PDCocycleSample(_matrices(p["mats"], "mats"), tuple(p["probs"]), p["c"])
    b = almost_commuting_bound(sample)
    rows = [
        _row("bound", "lambda_max_expected_log", "exact", b.terms["lambda_max_expected_log"]),
        _row("bound", "kappa_c", "exact", b.extras["kappa_c"]),
        _row("bound", "lower_bound", "conditional", b.value),
    ]
    base = gamma_t_probe(sample, 0.0, p["n"], p["trials"], seed)
    rows.append(_row("probe_t=0", "gamma_t", "mc", base.estimate, base.stderr))
    for t in p["ts"]:
        pr = gamma_t_probe(sample, float(t), p["n"], p["trials"], seed)
        band = 3.0 * math.hypot(pr.stderr, base.stderr)
        holds = abs(pr.estimate - base.estimate) <= pr.penalty + band
        rows.append(_row(f"probe_t={t:g}", "gamma_t", "mc", pr.estimate, pr.stderr))
        rows.append(_row(f"probe_t={t:g}", "penalty", "conditional", pr.penalty, passed=holds))
    return Outcome(rows, True)


@dataclass(frozen=True)
class Subcommand:
    run: Callable[[dict, int], Outcome]
    defaults: dict
    help: str


_A0, _A1 = example_matrices(_SQRT1000, _SQRT1000)
_ROT = np.array([[math.cos(0.01), -math.sin(0.01)], [math.sin(0.01), math.cos(0.01)]])

SUBCOMMANDS: dict[str, Subcommand] = {
    "example": Subcommand(
        run_example,
        {"a": _SQRT1000, "b": _SQRT1000, "pfrak": 0.5, "n": 100000, "trials": 20},
        "two-symbol example: worst case, Golden-Thompson bound, upper bound, Monte Carlo",
    ),
    "polymer": Subcommand(
        run_polymer,
        {
            "E": None,
            "v": None,
            "p": 11,
            "pfrak": 0.6,
            "delta1": None,
            "delta2": None,
            "sampler": "iid",
            "corr": 0.8,
            "n_blocks": 10000,
            "trials": 10,
        },
        "polymer model certificate and block exponent estimate",
    ),
    "offspectrum": Subcommand(
        run_offspectrum,
        {"E": 0.0, "v0": -32.0, "v1": -40.0, "p0": 1.0, "n": 10000, "r0": None},
        "transfer matrices far from the spectrum",
    ),
    "stability": Subcommand(
        run_stability,
        {
            "eps1": 0.4,
            "Gamma": 0.5,
            "eta": 0.3,
            "C0": 1.0,
            "C1": 2.0,
            "d": 2,
            "delta_frac": 0.5,
            "n": 10000,
            "families": 1,
        },
        "perturbed aligned diagonal sequences",
    ),
    "jacobi": Subcommand(
        run_jacobi,
        {"E": None, "E_frac": 0.5, "theta_lo": 1.5, "theta_hi": 2.5, "eps1": 0.3, "n": 10000},
        "Jacobi two-step transfer matrices near E = 0",
    ),
    "gt-check": Subcommand(
        run_gt_check,
        {"families": 1000, "max_n": 5, "max_d": 4, "half_width": 9.0, "nodes": 4001, "slack_tol": 1e-7},
        "Golden-Thompson inequality on random Hermitian families",
    ),
    "ap-check": Subcommand(
        run_ap_check,
        {"preset": "AP_V1", "n": 50, "d": 2, "noise": 0.1, "max_angle": 1.4, "kappa": None, "eps": None},
        "AP hypotheses and sandwich on a random gapped family",
    ),
    "estimate": Subcommand(
        run_estimate,
        {"mats": [_A0.tolist(), _A1.tolist()], "p0": 0.5, "corr": 0.0, "n": 10000, "trials": 10},
        "Monte Carlo top exponent of a two-symbol cocycle",
    ),
    "almost-commuting": Subcommand(
        run_almost_commuting,
        {
            "mats": [np.diag([4.0, 1.0]).tolist(), (_ROT @ np.diag([1.0, 2.0]) @ _ROT.T).tolist()],
            "probs": [0.5, 0.5],
            "c": 1.0,
            "ts": [0.5, 1.0],
            "n": 10000,
            "trials": 10,
        },
        "conditional bound for almost-commuting positive definite factors",
    ),
}


# ---------------------------------------------------------------------------
# configuration and output


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _coerce(key: str, value, default):
    """Convert ``value`` to the type of ``default`` (``None`` defaults accept numbers)."""
    if value is None:
        return None
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            raise ValueError
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(default, float) or default is None:
            if isinstance(value, (bool, list, dict)):
                raise ValueError
            return float(value)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise ValueError
            return value
        if isinstance(default, list):
            if not isinstance(value, list):
                raise ValueError
            return value
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"bad value for {key!r}: {value!r}")


def _flag_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lyapbound", description="Certified Lyapunov exponent bounds.")
    parser.add_argument("--version", action="version", version=f"lyapbound {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name, sc in SUBCOMMANDS.items():
        sp = sub.add_parser(name, help=sc.help, description=sc.help)
        sp.add_argument("--config", help="JSON document with parameter values")
        sp.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed (default 0)")
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default=None)
        for key, default in sc.defaults.items():
            sp.add_argument(
                "--" + key.replace("_", "-"),
                dest="p_" + key,
                type=_flag_value,
                default=argparse.SUPPRESS,
                help=f"default: {json.dumps(default) if not isinstance(default, list) else 'see docs'}",
            )
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, the JSON config and flag overrides."""
    sc = SUBCOMMANDS[args.subcommand]
    params = dict(sc.defaults)
    seed, fmt = 0, "csv"
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        doc = dict(doc)
        name = doc.pop("subcommand", args.subcommand)
        if name != args.subcommand:
            raise ConfigError(f"config is for {name!r}, not {args.subcommand!r}")
        seed = doc.pop("seed", seed)
        fmt = doc.pop("format", fmt)
        unknown = sorted(set(doc) - set(params))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        params.update(doc)
    for key in sc.defaults:
        if hasattr(args, "p_" + key):
            params[key] = getattr(args, "p_" + key)
    params = {k: _coerce(k, v, sc.defaults[k]) for k, v in params.items()}
    seed = seed if args.seed is None else args.seed
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an integer in [0, 2**64)")
    fmt = fmt if args.format is None else args.format
    if fmt not in ("csv", "json"):
        raise ConfigError("format must be 'csv' or 'json'")
    return {"subcommand": args.subcommand, "seed": seed, "format": fmt, "params": params}


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def render(config: dict, rows: list, ok: bool, status: str) -> str:
    """Serialize rows with the version/config header."""
    cfg = json.dumps(config, sort_keys=True, separators=(",", ":"))
    sub = config["subcommand"]
    if config["format"] == "json":
        doc = {
            "version": __version__,
            "config": config,
            "status": status,
            "pass": ok,
            "columns": list(COLUMNS),
            "rows": [{"subcommand": sub, **r} for r in rows],
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(f"# lyapbound {__version__}\n# config {cfg}\n# status {status}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([sub] + [_fmt(r[c]) for c in COLUMNS[1:]])
    return buf.getvalue()


def run(argv=None) -> tuple[int, str, str | None]:
    """Execute a command line; returns ``(exit_code, text, out_path)``.

    On a configuration error ``text`` is the message and ``out_path`` is
    ``None``; otherwise ``text`` is the rendered result.
    """
    try:
        args = build_parser().parse_args(argv)
        config = resolve_config(args)
    except ConfigError as e:
        return EXIT_CONFIG, f"config error: {e}\n", None
    rows, ok = [], False
    try:
        out = SUBCOMMANDS[config["subcommand"]].run(config["params"], config["seed"])
        rows, ok = out.rows, out.ok
        code, status = (EXIT_OK, "pass") if ok else (EXIT_BOUND, "fail")
    except ConfigError as e:
        return EXIT_CONFIG, f"config error: {e}\n", None
    except HypothesisNotMet as e:
        code, status = EXIT_HYPOTHESIS, f"hypothesis not met: {type(e).__name__}: {e}"
    except BoundViolated as e:
        code, status = EXIT_BOUND, f"bound violated: {type(e).__name__}: {e}"
    except LyapBoundError as e:
        code, status = EXIT_CONFIG, f"bad input: {type(e).__name__}: {e}"
    return code, render(config, rows, ok, status), args.out


def main(argv=None) -> int:
    code, text, out = run(argv)
    if out is None and text.startswith("config error"):
        sys.stderr.write(text)
    elif out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if code != EXIT_OK and not text.startswith("config error"):
        status = next((ln for ln in text.splitlines() if "status" in ln), "")
        sys.stderr.write(f"lyapbound: exit {code} {status.strip()}\n")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
