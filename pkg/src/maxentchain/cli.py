"""Command-line front end.

Exit codes: 0 success, 1 structural or parse error, 2 infeasible (or
degenerate) constraints, 3 hypothesis check failed, 4 simulation verdict
failed.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    DegeneracyError,
    DegenerateSupportError,
    HypothesisError,
    IndeterminateError,
    InfeasibleOrDegenerateError,
    StructuralError,
)
from .feasibility import build_system, solve_feasibility
from .io import dump_json, load_spec
from .labyrinths import complete_blocks, decompose
from .maxent import (
    complete_bernoulli,
    complete_parry,
    complete_uniform,
    constrained_chain,
    entropy_full,
    entropy_rate,
)
from .model import DEFAULT_TOL, derive_quantities, validate_hypotheses
from .qsd import DEFAULT_HORIZON, qsd_report_hidden, qsd_report_visible
from .reconstruction import compare_laws, simulate_splice

EXIT_OK, EXIT_STRUCTURAL, EXIT_INFEASIBLE, EXIT_HYPOTHESIS, EXIT_SIMULATION = range(5)
COMMANDS = ("validate", "feasibility", "complete", "qsd", "simulate", "report")
MODES = ("auto", "bernoulli", "constrained", "parry", "uniform")


@dataclass
class RunConfig:
    command: str
    input_path: str
    output_path: str | None = None
    mode: str = "auto"
    tol: float = DEFAULT_TOL
    max_iter: int = 100_000
    steps: int = 1_000_000
    seed: int = 0
    horizon: int = DEFAULT_HORIZON
    report_path: str | None = None


class _Stop(Exception):
    def __init__(self, code, message, payload=None):
        super().__init__(message)
        self.code = code
        self.payload = payload


def _emit(text: str, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _err(msg):
    print(f"maxentchain: {msg}", file=sys.stderr)


def _check_hypotheses(spec, tol):
    report = validate_hypotheses(spec, tol)
    if not report.passed:
        failed = ", ".join(f"{c.name} ({c.residual:.3g})" for c in report.checks if not c.passed)
        raise _Stop(EXIT_HYPOTHESIS, f"hypothesis checks failed: {failed}", report.to_dict())
    return report


def _feasibility(spec, tol):
    """Per-block LP outcomes, keyed by block index."""
    if spec.comm is None:
        raise _Stop(EXIT_STRUCTURAL, "feasibility needs a communication matrix L")
    return {p.index: solve_feasibility(build_system(p.pihat, p.comm)) for p in decompose(spec, tol)}


def _infeasible_payload(outcomes):
    return {"verdict": "infeasible",
            "blocks": {str(k): o.to_dict() for k, o in outcomes.items()}}


def complete_spec(spec, cfg: RunConfig):
    """Dispatch a completion; returns ``(chain_or_None, payload)``."""
    mode = cfg.mode
    if spec.closed:
        if mode == "auto":
            mode = "uniform" if spec.comm is None else "parry"
        if mode == "uniform":
            p = complete_uniform(spec.n_hidden)
            stat = np.full(spec.n_hidden, 1.0 / spec.n_hidden)
            return None, {"mode": "uniform", "hidden": list(spec.states.hidden),
                          "P_EE": p.tolist(), "pi": stat.tolist(),
                          "entropy": entropy_rate(p, stat)}
        if mode == "parry":
            if spec.comm is None:
                raise _Stop(EXIT_STRUCTURAL, "mode parry needs a communication matrix L")
            pm = complete_parry(spec.comm)
            return None, {"mode": "parry", "hidden": list(spec.states.hidden),
                          "P_EE": pm.p_hat.tolist(), "pi": pm.stationary.tolist(),
                          "eigenvalue": pm.eigenvalue, "entropy": pm.log_lambda}
        raise _Stop(EXIT_STRUCTURAL, f"mode {mode} needs visible states")

    if mode in ("parry", "uniform"):
        raise _Stop(EXIT_STRUCTURAL, f"mode {mode} requires an empty visible set")
    if mode == "constrained" and spec.comm is None:
        raise _Stop(EXIT_STRUCTURAL, "mode constrained requires a communication matrix L")
    _check_hypotheses(spec, cfg.tol)
    if mode == "auto":
        mode = "bernoulli" if spec.comm is None else "constrained"

    if mode == "constrained":
        outcomes = _feasibility(spec, cfg.tol)
        if not all(o.feasible for o in outcomes.values()):
            raise _Stop(EXIT_INFEASIBLE, "support constraints are infeasible",
                        _infeasible_payload(outcomes))

    if spec.partition is not None:
        problems = decompose(spec, cfg.tol)
        chain = complete_blocks(spec, problems, {p.index: mode for p in problems},
                                max_iter=cfg.max_iter)
    elif mode == "bernoulli":
        chain = complete_bernoulli(spec, cfg.tol)
    else:
        chain, _ = constrained_chain(spec, max_iter=cfg.max_iter)
    payload = chain.to_dict()
    payload["entropy"] = entropy_full(chain).to_dict()
    return chain, payload


def _validate_text(report):
    lines = [f"{'check':<22} {'status':<6} residual"]
    for c in report.checks:
        lines.append(f"{c.name:<22} {'pass' if c.passed else 'FAIL':<6} {c.residual:.3e}")
    return "\n".join(lines) + "\n"


def _qsd_text(reports):
    lines = [f"{'side':<8} {'geometric':>11} {'exit_law':>11} {'independence':>13} {'conditional':>12}"]
    for r in reports:
        lines.append(f"{r.side:<8} {r.geometric_residual:11.3e} {r.exit_law_residual:11.3e} "
                     f"{r.independence_residual:13.3e} {r.conditional_residual:12.3e}")
    return "\n".join(lines) + "\n"


def _matrix_md(labels_r, labels_c, mat):
    head = "| | " + " | ".join(str(x) for x in labels_c) + " |"
    sep = "|---" * (len(labels_c) + 1) + "|"
    rows = [f"| **{a}** | " + " | ".join(f"{v:.6g}" for v in row) + " |"
            for a, row in zip(labels_r, mat)]
    return "\n".join([head, sep, *rows])


def _cmd_validate(spec, cfg):
    if spec.closed:
        raise _Stop(EXIT_STRUCTURAL, "nothing to validate without visible states")
    report = validate_hypotheses(spec, cfg.tol)
    sys.stderr.write(_validate_text(report))
    _emit(dump_json(report.to_dict()), cfg.output_path)
    return EXIT_OK if report.passed else EXIT_HYPOTHESIS


def _cmd_feasibility(spec, cfg):
    if spec.closed:
        raise _Stop(EXIT_STRUCTURAL, "feasibility needs visible states to fix the stationary law")
    _check_hypotheses(spec, cfg.tol)
    outcomes = _feasibility(spec, cfg.tol)
    if spec.partition is None:
        payload = outcomes[0].to_dict()
    else:
        verdict = "feasible" if all(o.feasible for o in outcomes.values()) else "infeasible"
        payload = {"verdict": verdict, "blocks": {str(k): o.to_dict() for k, o in outcomes.items()}}
    _emit(dump_json(payload), cfg.output_path)
    if all(o.feasible for o in outcomes.values()):
        return EXIT_OK
    _err("support constraints are infeasible; Farkas certificate written")
    return EXIT_INFEASIBLE


def _cmd_complete(spec, cfg):
    _, payload = complete_spec(spec, cfg)
    _emit(dump_json(payload), cfg.output_path)
    return EXIT_OK


def _cmd_qsd(spec, cfg):
    if spec.closed:
        raise _Stop(EXIT_STRUCTURAL, "q.s.d. diagnostics need visible states")
    chain, _ = complete_spec(spec, cfg)
    reports = [qsd_report_visible(chain, cfg.horizon), qsd_report_hidden(chain, cfg.horizon)]
    sys.stderr.write(_qsd_text(reports))
    _emit(dump_json({r.side: r.to_dict() for r in reports}), cfg.output_path)
    return EXIT_OK


def _cmd_simulate(spec, cfg):
    if spec.closed:
        raise _Stop(EXIT_STRUCTURAL, "the splice construction needs visible states")
    chain, _ = complete_spec(spec, cfg)
    trace = simulate_splice(chain, cfg.steps, cfg.seed)
    result = compare_laws(trace, chain)
    if cfg.output_path is not None:
        Path(cfg.output_path).write_text(trace.to_csv())
    stats = {"steps": cfg.steps, "seed": cfg.seed, **result.to_dict()}
    if cfg.report_path is not None:
        dump_json(stats, cfg.report_path)
    else:
        sys.stdout.write(dump_json({"verdict": result.verdict, "criteria": result.criteria}))
    _err(f"simulation verdict: {result.verdict}")
    return EXIT_SIMULATION if result.verdict == "fail" else EXIT_OK


def build_report(spec, cfg) -> tuple[str, int]:
    """Full pipeline as Markdown, plus the exit code it implies."""
    out = ["# Maximum-entropy completion report", "",
           f"Input: `{cfg.input_path}`  ", f"Seed: {cfg.seed}, steps: {cfg.steps}, "
           f"horizon: {cfg.horizon}, tolerance: {cfg.tol:g}", ""]
    if spec.closed:
        _, payload = complete_spec(spec, cfg)
        labels = spec.states.hidden
        out += ["## Completion", "", f"Mode: **{payload['mode']}** (no visible states)", "",
                _matrix_md(labels, labels, payload["P_EE"]), "",
                f"Entropy rate: {payload['entropy']:.12g}", ""]
        return "\n".join(out), EXIT_OK

    report = validate_hypotheses(spec, cfg.tol)
    out += ["## Hypotheses", "", "| check | status | residual |", "|---|---|---|"]
    out += [f"| {c.name} | {'pass' if c.passed else 'FAIL'} | {c.residual:.3e} |"
            for c in report.checks]
    out.append("")
    if not report.passed:
        out.append("Pipeline stopped: hypothesis checks failed.")
        return "\n".join(out) + "\n", EXIT_HYPOTHESIS

    out += ["## Feasibility", ""]
    if spec.comm is None:
        out += ["No communication matrix: unconstrained (Bernoulli) optimum applies.", ""]
    else:
        outcomes = _feasibility(spec, cfg.tol)
        for k, o in outcomes.items():
            out.append(f"- block {k}: **{o.verdict}**")
            if o.certificate is not None:
                c = o.certificate
                out.append(f"  - certificate u = {np.round(c.u, 9).tolist()}, "
                           f"v = {np.round(c.v, 9).tolist()}")
        out.append("")
        if not all(o.feasible for o in outcomes.values()):
            out.append("Pipeline stopped: constraints are infeasible.")
            return "\n".join(out) + "\n", EXIT_INFEASIBLE

    chain, payload = complete_spec(spec, cfg)
    labels = spec.states.labels
    ent = payload["entropy"]
    out += ["## Completion", "", f"Mode: **{chain.mode}**", "",
            _matrix_md(labels, labels, chain.P), "",
            "## Entropies", "",
            "| quantity | value |", "|---|---|",
            f"| h(X) | {ent['h_X']:.12g} |", f"| h(Z) | {ent['h_Z']:.12g} |",
            f"| H' | {ent['H_prime']:.12g} |",
            f"| H' vs h(Z) identity residual | {ent['identity_residual']:.3e} |",
            f"| three-term decomposition residual | {ent['decomposition_residual']:.3e} |", ""]

    reports = [qsd_report_visible(chain, cfg.horizon), qsd_report_hidden(chain, cfg.horizon)]
    out += ["## Quasi-stationarity", "",
            "| side | geometric | exit law | independence | conditional |", "|---|---|---|---|---|"]
    out += [f"| {r.side} | {r.geometric_residual:.3e} | {r.exit_law_residual:.3e} | "
            f"{r.independence_residual:.3e} | {r.conditional_residual:.3e} |" for r in reports]
    out.append("")

    trace = simulate_splice(chain, cfg.steps, cfg.seed)
    result = compare_laws(trace, chain)
    out += ["## Reconstruction", "", f"Verdict: **{result.verdict}**", ""]
    if result.verdict != "inconclusive":
        out += ["| criterion | passed | detail |", "|---|---|---|"]
        for name, c in result.criteria.items():
            detail = ", ".join(f"{k}={v:.4g}" for k, v in c.items()
                               if k != "passed" and isinstance(v, float))
            out.append(f"| {name} | {c['passed']} | {detail} |")
    else:
        out.append(result.criteria["reason"])
    out.append("")
    code = EXIT_SIMULATION if result.verdict == "fail" else EXIT_OK
    return "\n".join(out), code


def _cmd_report(spec, cfg):
    text, code = build_report(spec, cfg)
    _emit(text, cfg.output_path)
    return code


_HANDLERS = {
    "validate": _cmd_validate,
    "feasibility": _cmd_feasibility,
    "complete": _cmd_complete,
    "qsd": _cmd_qsd,
    "simulate": _cmd_simulate,
    "report": _cmd_report,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the process exit code."""
    try:
        spec = load_spec(cfg.input_path)
        return _HANDLERS[cfg.command](spec, cfg)
    except _Stop as stop:
        _err(str(stop))
        if stop.payload is not None:
            _emit(dump_json(stop.payload), cfg.output_path)
        return stop.code
    except HypothesisError as exc:
        _err(str(exc))
        return EXIT_HYPOTHESIS
    except DegenerateSupportError as exc:
        _err(str(exc))
        return EXIT_INFEASIBLE
    except InfeasibleOrDegenerateError as exc:
        _err(str(exc))
        if exc.certificate is not None:
            _emit(dump_json({"verdict": "infeasible", "block": exc.block,
                             "certificate": exc.certificate.to_dict()}), cfg.output_path)
        return EXIT_INFEASIBLE
    except (StructuralError, DegeneracyError, IndeterminateError, OSError) as exc:
        _err(str(exc))
        return EXIT_STRUCTURAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxentchain",
        description="Maximum-entropy completion of partially specified stationary Markov chains.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input_path", metavar="SPEC", help="chain spec JSON file")
    common.add_argument("-o", "--output", dest="output_path", help="output file (default stdout)")
    common.add_argument("--mode", choices=MODES, default="auto")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL,
                        help="tolerance for hypothesis and identity checks")
    common.add_argument("--max-iter", type=int, default=100_000)
    common.add_argument("--steps", type=int, default=1_000_000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    common.add_argument("--report", dest="report_path",
                        help="simulate: write statistics JSON here")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "validate": "check the standing hypotheses",
        "feasibility": "decide the support constraints by LP",
        "complete": "compute the maximum-entropy hidden block",
        "qsd": "quasi-stationarity residuals",
        "simulate": "splice simulation and law comparison",
        "report": "full pipeline as Markdown",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(**vars(args))
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
