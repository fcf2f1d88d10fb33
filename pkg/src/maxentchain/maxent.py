"""Maximum-entropy completions of the hidden block and entropy functionals.

Conventions: ``p_hat`` is the normalized hidden kernel
``P_EE / pi(E)``, a stochastic matrix with stationary law ``pihat_E``.
``h(Z)`` is its entropy rate and ``H'`` the hidden contribution to the full
chain entropy. Entropies use natural logs with ``0 log 0 = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import xlogy

from . import kernels
from .errors import (
    DegenerateSupportError,
    InfeasibleOrDegenerateError,
    StructuralError,
)
from .model import (
    DEFAULT_TOL,
    CompletedChain,
    PartialChainSpec,
    assemble,
    derive_quantities,
    is_irreducible,
)

__all__ = [
    "EntropyReport",
    "MaxentSolution",
    "ParryMeasure",
    "entropy_rate",
    "hidden_entropy",
    "entropy_full",
    "complete_bernoulli",
    "maxent_product_form",
    "complete_constrained",
    "constrained_chain",
    "complete_parry",
    "complete_uniform",
]

BLOWUP = 1e12
PATIENCE = 1000


def entropy_rate(P, weights) -> float:
    """``-sum_a w(a) sum_b P(a,b) log P(a,b)``."""
    P = np.asarray(P, dtype=float)
    return float(-np.asarray(weights, dtype=float) @ xlogy(P, P).sum(axis=1))


def hidden_entropy(p_ee, pi_e) -> float:
    """``H'``: the hidden-to-hidden part of the full entropy."""
    return entropy_rate(p_ee, pi_e)


def hprime_from_hz(h_z: float, mass_e: float) -> float:
    # P = pi(E) p_hat and pi_E = pi(E) pihat_E give
    # H' = pi(E)^2 h(Z) - pi(E)^2 log pi(E)
    return mass_e**2 * h_z - mass_e**2 * np.log(mass_e)


@dataclass(frozen=True)
class EntropyReport:
    h_X: float
    h_Z: float
    H_prime: float
    identity_residual: float
    visible_term: float
    exit_term: float
    decomposition_residual: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def entropy_full(chain: CompletedChain) -> EntropyReport:
    """Full-chain entropy, its three-term split, and the ``H'``/``h(Z)`` link.

    The split is: visible rows, exits from ``E`` (fixed by the exit law)
    and the hidden block ``H'``. ``decomposition_residual`` compares their
    sum with the direct entropy of ``P``.
    """
    spec, der = chain.spec, chain.derived
    h_x = entropy_rate(chain.P, chain.pi)
    visible = entropy_rate(np.hstack([spec.p_ii, spec.p_ie]), spec.pi_i)
    exits = float(-der.pi_e.sum() * xlogy(spec.pi_i, spec.pi_i).sum())
    h_prime = hidden_entropy(chain.p_ee, der.pi_e)
    h_z = entropy_rate(chain.p_hat, der.pihat_e)
    return EntropyReport(
        h_X=h_x,
        h_Z=h_z,
        H_prime=h_prime,
        identity_residual=abs(h_prime - hprime_from_hz(h_z, der.pi_E_mass)),
        visible_term=visible,
        exit_term=exits,
        decomposition_residual=abs(h_x - (visible + exits + h_prime)),
    )


def complete_bernoulli(spec: PartialChainSpec, tol: float = DEFAULT_TOL) -> CompletedChain:
    """Unconstrained optimum: every hidden row equals ``pi_E``."""
    der = derive_quantities(spec, tol)
    p_ee = np.tile(der.pi_E_mass * der.pihat_e, (spec.n_hidden, 1))
    return assemble(spec, p_ee, mode="bernoulli", tol=tol, derived=der)


@dataclass(frozen=True, eq=False)
class MaxentSolution:
    """Product-form optimum ``p_hat(d,e) = alpha(d) beta(e) L(d,e)``."""

    p_hat: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    anchor_index: int
    iterations: int
    residual: float
    entropy_hZ: float
    entropy_Hprime: float

    def to_dict(self) -> dict:
        return {
            "p_hat": self.p_hat.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "anchor_index": self.anchor_index,
            "entropy_hZ": self.entropy_hZ,
            "entropy_Hprime": self.entropy_Hprime,
            "telemetry": {"iterations": self.iterations, "residual": self.residual},
        }


def constraint_residual(p_hat, pihat) -> float:
    """Sup-norm violation of unit row sums and stationarity of ``pihat``."""
    rows = np.abs(p_hat.sum(axis=1) - 1.0).max()
    stat = np.abs(pihat @ p_hat - pihat).max()
    return float(max(rows, stat))


def _classify_failure(pihat, comm, reason, block):
    # local import: feasibility depends on nothing here, but keep the
    # solver importable on its own
    from .feasibility import build_system, solve_feasibility

    outcome = solve_feasibility(build_system(pihat, comm))
    if outcome.verdict == "infeasible":
        raise InfeasibleOrDegenerateError(
            f"{reason}; the support constraints are infeasible (Farkas certificate attached)",
            block=block, certificate=outcome.certificate)
    raise DegenerateSupportError(
        f"{reason}; constraints are feasible but force zeros on allowed edges, "
        "so no strictly positive product form exists", block=block)


def maxent_product_form(pihat, comm, mass: float = 1.0, *, tol: float = 1e-12,
                        max_iter: int = 100_000, anchor: int = 0,
                        backend: str | None = None, block=None) -> MaxentSolution:
    """Maximize ``h(Z)`` over kernels supported on ``comm`` with stationary ``pihat``.

    Iterates ``beta(e) <- pihat(e) / sum_{d: L(d,e)=1} pihat(d) alpha(d)`` with
    ``alpha(d) = 1 / sum_{c: L(d,c)=1} beta(c)``, renormalizing
    ``beta[anchor] = 1`` every sweep, from ``beta = 1`` until the sup change
    in ``beta`` is at most ``tol``.

    Parameters
    ----------
    pihat : (n,) array
        Target stationary law, positive, summing to one.
    comm : (n, n) 0-1 array
        Allowed transitions; must be irreducible.
    mass : float
        ``pi(E)``, used only to report ``H'``.

    Raises
    ------
    InfeasibleOrDegenerateError
        Scalings diverge, stall for ``PATIENCE`` sweeps, or ``max_iter`` is
        hit. The feasibility LP is then run to pick the message; a
        ``DegenerateSupportError`` means feasible but not with positive
        entries on every allowed edge.
    """
    pihat = np.asarray(pihat, dtype=float)
    comm = np.asarray(comm, dtype=float)
    n = pihat.shape[0]
    if comm.shape != (n, n):
        raise StructuralError(f"L has shape {comm.shape}, expected {(n, n)}")
    if not is_irreducible(comm):
        raise StructuralError("L must be irreducible")
    if np.any(pihat <= 0) or abs(pihat.sum() - 1.0) > DEFAULT_TOL:
        raise StructuralError("pihat must be positive and sum to 1")
    if not 0 <= anchor < n:
        raise StructuralError(f"anchor {anchor} out of range")

    beta = np.ones(n)
    iterations, status = kernels.get_backend(backend).product_form(
        pihat, np.ascontiguousarray(comm), beta, anchor, tol, max_iter, BLOWUP, PATIENCE)
    if status != kernels.CONVERGED:
        reason = {
            kernels.BLOWUP: "scalings left [1e-12, 1e12]",
            kernels.STALLED: f"iterate change stagnated for {PATIENCE} sweeps",
            kernels.MAX_ITER: f"no convergence after {max_iter} sweeps",
        }[status]
        _classify_failure(pihat, comm, reason, block)

    alpha = 1.0 / (comm @ beta)
    p_hat = alpha[:, None] * comm * beta[None, :]
    residual = constraint_residual(p_hat, pihat)
    if residual > DEFAULT_TOL:
        # small iterate change can hide a drift toward the boundary
        _classify_failure(pihat, comm, f"constraint residual {residual:.3g} after convergence",
                          block)
    h_z = entropy_rate(p_hat, pihat)
    return MaxentSolution(
        p_hat=p_hat,
        alpha=alpha,
        beta=beta,
        anchor_index=anchor,
        iterations=int(iterations),
        residual=residual,
        entropy_hZ=h_z,
        entropy_Hprime=float(hprime_from_hz(h_z, mass)),
    )


def complete_constrained(spec: PartialChainSpec, *, tol: float = 1e-12,
                         max_iter: int = 100_000, anchor: int = 0,
                         backend: str | None = None) -> MaxentSolution:
    """Product-form completion under the communication matrix of ``spec``."""
    if spec.comm is None:
        raise StructuralError("constrained completion needs a communication matrix L")
    der = derive_quantities(spec)
    return maxent_product_form(der.pihat_e, spec.comm, der.pi_E_mass, tol=tol,
                               max_iter=max_iter, anchor=anchor, backend=backend)


def constrained_chain(spec: PartialChainSpec, **opts) -> tuple[CompletedChain, MaxentSolution]:
    """Run :func:`complete_constrained` and assemble the full chain."""
    sol = complete_constrained(spec, **opts)
    der = derive_quantities(spec)
    chain = assemble(spec, der.pi_E_mass * sol.p_hat, mode="constrained", derived=der,
                     blocks=(sol.to_dict(),))
    return chain, sol


class ParryMeasure(NamedTuple):
    p_hat: np.ndarray
    stationary: np.ndarray
    log_lambda: float
    eigenvalue: float
    right: np.ndarray
    left: np.ndarray


def _perron_vector(M, tol, max_iter):
    x = np.full(M.shape[0], 1.0 / M.shape[0])
    for _ in range(max_iter):
        y = M @ x
        y /= y.sum()
        if np.abs(y - x).max() <= tol:
            return y
        x = y
    raise InfeasibleOrDegenerateError(f"power iteration did not converge in {max_iter} steps")


def complete_parry(comm, *, tol: float = 1e-15, max_iter: int = 1_000_000) -> ParryMeasure:
    """Maximal-entropy Markov measure on the shift defined by ``comm``.

    Power iteration runs on ``L + I``, which has the same eigenvectors and
    is aperiodic, so periodic ``L`` (e.g. a cycle) is handled.
    """
    L = np.asarray(comm, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1] or not np.all((L == 0) | (L == 1)):
        raise StructuralError("L must be a square 0-1 matrix")
    if not is_irreducible(L):
        raise StructuralError("L must be irreducible")
    shifted = L + np.eye(L.shape[0])
    phi = _perron_vector(shifted, tol, max_iter)
    nu = _perron_vector(shifted.T, tol, max_iter)
    lam = float(nu @ L @ phi / (nu @ phi))
    nu = nu / (nu @ phi)
    p_hat = L * phi[None, :] / (lam * phi[:, None])
    stationary = nu * phi
    return ParryMeasure(p_hat, stationary, float(np.log(lam)), lam, phi, nu)


def complete_uniform(n: int) -> np.ndarray:
    """Unconstrained optimum with no visible states: all entries ``1/n``."""
    if n < 1:
        raise StructuralError("size must be at least 1")
    return np.full((n, n), 1.0 / n)
