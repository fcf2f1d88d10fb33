"""Quasi-stationarity of the two killed chains, computed from matrix powers.

Started from ``pihat_I`` and killed on entering ``E``, the visible chain
survives ``n`` steps with probability ``pi(I)^n``, leaves with law
``pihat_E`` and the exit state is independent of the exit time. The
hidden side mirrors this with ``pi(E)`` and ``pihat_I``. All quantities
here are exact evaluations, no sampling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CompletedChain

__all__ = ["QsdReport", "qsd_report_visible", "qsd_report_hidden", "DEFAULT_HORIZON"]

DEFAULT_HORIZON = 50
CONDITIONAL_HORIZON = 20


@dataclass(frozen=True, eq=False)
class QsdReport:
    side: str
    rho: float
    survival: np.ndarray
    geometric_residual: float
    exit_law: np.ndarray
    exit_law_residual: float
    independence_residual: float
    conditional_residual: float

    def residuals(self) -> dict:
        return {
            "geometric": self.geometric_residual,
            "exit_law": self.exit_law_residual,
            "independence": self.independence_residual,
            "conditional": self.conditional_residual,
        }

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "rho": self.rho,
            "survival": self.survival.tolist(),
            "exit_law": self.exit_law.tolist(),
            **{f"{k}_residual": v for k, v in self.residuals().items()},
        }


def _report(side, start, inner, outward, rho, target, horizon):
    # start: initial law on this side; inner: substochastic block on this side;
    # outward: block from this side to the other one
    rows = [start]
    for _ in range(horizon):
        rows.append(rows[-1] @ inner)
    rows = np.array(rows)                       # rows[n] = start P^n
    survival = rows.sum(axis=1)
    powers = rho ** np.arange(horizon + 1)
    geometric = float(np.abs(survival - powers).max())

    exit_law = start @ outward / (1.0 - rho)
    exit_residual = float(np.abs(exit_law - target).max())

    if horizon > 0:
        joint = rows[:-1] @ outward             # P(X_tau = s, tau = n), n = 1..N
        p_tau = survival[:-1] - survival[1:]
        indep = float(np.abs(joint - p_tau[:, None] * exit_law[None, :]).max())
    else:
        indep = 0.0

    m = min(horizon, CONDITIONAL_HORIZON)
    conditional = float(np.abs(rows[: m + 1] / powers[: m + 1, None] - start[None, :]).max())
    return QsdReport(side, float(rho), survival, geometric, exit_law, exit_residual,
                     indep, conditional)


def qsd_report_visible(chain: CompletedChain, horizon: int = DEFAULT_HORIZON) -> QsdReport:
    """Visible chain from ``pihat_I`` killed on entering ``E``."""
    s, der = chain.spec, chain.derived
    return _report("visible", der.pihat_i, s.p_ii, s.p_ie, der.pi_I_mass, der.pihat_e, horizon)


def qsd_report_hidden(chain: CompletedChain, horizon: int = DEFAULT_HORIZON) -> QsdReport:
    """Hidden chain from ``pihat_E`` killed on entering ``I``."""
    s, der = chain.spec, chain.derived
    return _report("hidden", der.pihat_e, chain.p_ee, s.p_ei, der.pi_E_mass, der.pihat_i, horizon)
