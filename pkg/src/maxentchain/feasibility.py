"""Existence of a kernel with given support and stationary law, as an LP.

The unknown normalized kernel ``p_hat`` is stacked column by column into a
vector ``p`` (``p[t + s*l] = p_hat[t, s]``, zero-based). The system
``D p = b, p >= 0`` stacks three ``l x l^2`` blocks:

* ``A p = 1``        unit row sums,
* ``B p = pihat``    stationarity of ``pihat``,
* ``C p = 0``        zero mass on forbidden edges.

Either a nonnegative solution exists, or there is ``y = (u, v, w)`` with
``D^t y >= 0`` and ``b^t y < 0``. On allowed edges only ``u`` and ``v``
matter; ``w`` can always be chosen large enough for forbidden edges.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndeterminateError, StructuralError

__all__ = [
    "LinearSystem",
    "FarkasCertificate",
    "FeasibilityOutcome",
    "encode",
    "decode",
    "build_system",
    "solve_feasibility",
    "phase_one",
    "diagonal_shortcut",
    "witness_residuals",
    "certificate_violations",
    "reconstruct_w",
]

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-12


def encode(p_hat) -> np.ndarray:
    """Column-major flattening: ``p[t + s*l] = p_hat[t, s]``."""
    return np.asarray(p_hat, dtype=float).flatten(order="F")


def decode(p, ell: int) -> np.ndarray:
    return np.asarray(p, dtype=float).reshape((ell, ell), order="F")


@dataclass(frozen=True, eq=False)
class LinearSystem:
    D: np.ndarray
    b: np.ndarray
    ell: int
    pihat: np.ndarray
    comm: np.ndarray

    @property
    def A(self):
        return self.D[: self.ell]

    @property
    def B(self):
        return self.D[self.ell: 2 * self.ell]

    @property
    def C(self):
        return self.D[2 * self.ell:]


def build_system(pihat, comm) -> LinearSystem:
    """Assemble ``D`` (``3l x l^2``) and ``b`` from ``pihat`` and ``L``."""
    pihat = np.asarray(pihat, dtype=float).reshape(-1)
    comm = np.asarray(comm, dtype=float)
    ell = pihat.size
    if comm.shape != (ell, ell):
        raise StructuralError(f"L has shape {comm.shape}, expected {(ell, ell)}")
    if np.any(pihat <= 0) or abs(pihat.sum() - 1.0) > FEAS_TOL:
        raise StructuralError("pihat must be positive and sum to 1")

    A = np.zeros((ell, ell * ell))
    B = np.zeros((ell, ell * ell))
    C = np.zeros((ell, ell * ell))
    for s in range(ell):
        for t in range(ell):
            col = t + s * ell
            A[t, col] = 1.0
            B[s, col] = pihat[t]
            C[s, col] = 1.0 - comm[t, s]
    b = np.concatenate([np.ones(ell), pihat, np.zeros(ell)])
    return LinearSystem(np.vstack([A, B, C]), b, ell, pihat, comm)


@dataclass(frozen=True, eq=False)
class FarkasCertificate:
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([self.u, self.v, self.w])

    def to_dict(self) -> dict:
        return {"u": self.u.tolist(), "v": self.v.tolist(), "w": self.w.tolist()}


@dataclass(frozen=True, eq=False)
class FeasibilityOutcome:
    verdict: str
    witness: np.ndarray | None = None
    certificate: FarkasCertificate | None = None

    @property
    def feasible(self) -> bool:
        return self.verdict == "feasible"

    def to_dict(self) -> dict:
        out = {"verdict": self.verdict}
        if self.witness is not None:
            out["witness"] = self.witness.tolist()
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_dict()
        return out


def phase_one(D, b, pivot_tol: float = PIVOT_TOL, max_pivots: int = 100_000):
    """Minimize the artificial mass for ``D x = b, x >= 0`` (``b >= 0``).

    Revised simplex with Bland's rule. The basis system is re-solved from
    the original data at every pivot, so rounding does not accumulate the
    way it does in an updated tableau. Returns ``(x, y, value, basis)``
    where ``y`` is the optimal phase-one dual: ``D^t y <= 0`` and
    ``b^t y = value``.
    """
    D = np.asarray(D, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = D.shape
    full = np.hstack([D, np.eye(m)])
    cost = np.concatenate([np.zeros(n), np.ones(m)])
    basis = list(range(n, n + m))

    for _ in range(max_pivots):
        B = full[:, basis]
        x_b = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, cost[basis])
        reduced = cost - full.T @ y
        reduced[basis] = 0.0
        entering = np.flatnonzero(reduced < -pivot_tol)
        if entering.size == 0:
            break
        j = int(entering[0])
        d = np.linalg.solve(B, full[:, j])
        rows = np.flatnonzero(d > pivot_tol)
        if rows.size == 0:  # pragma: no cover - phase one is bounded below
            raise IndeterminateError("phase one reported an unbounded direction")
        ratios = np.maximum(x_b[rows], 0.0) / d[rows]
        best = ratios.min()
        ties = rows[ratios <= best + pivot_tol * max(1.0, best)]
        r = int(min(ties, key=lambda i: basis[i]))
        basis[r] = j
    else:
        raise IndeterminateError(f"phase one exceeded {max_pivots} pivots")

    x = np.zeros(n + m)
    x[basis] = np.maximum(x_b, 0.0)
    return x[:n], y, float(cost @ x), basis


def witness_residuals(p_hat, pihat, comm) -> dict:
    p_hat = np.asarray(p_hat)
    return {
        "row_sums": float(np.abs(p_hat.sum(axis=1) - 1.0).max()),
        "stationarity": float(np.abs(pihat @ p_hat - pihat).max()),
        "support": float(np.abs(np.where(comm == 0, p_hat, 0.0)).max()),
        "negativity": float(max(0.0, -p_hat.min())),
    }


def certificate_violations(u, v, pihat, comm) -> tuple[float, float]:
    """``(b^t y, min over allowed edges of u(t) + v(s) pihat(t))``.

    A valid certificate has the first negative and the second nonnegative.
    """
    slack = u[:, None] + v[None, :] * pihat[:, None]
    allowed = slack[comm == 1]
    return float(np.sum(u + pihat * v)), float(allowed.min()) if allowed.size else np.inf


def reconstruct_w(u, v, pihat, comm) -> np.ndarray:
    """``w(s) = max_t |u(t)| + |v(s)| pihat(t)``, nudged up until ``D^t y >= 0``."""
    w = (np.abs(u)[:, None] + np.abs(v)[None, :] * pihat[:, None]).max(axis=0)
    for _ in range(64):
        full = u[:, None] + v[None, :] * pihat[:, None] + w[None, :] * (1.0 - comm)
        bad = (full < 0).any(axis=0)
        if not bad.any():
            return w
        w = np.where(bad, np.nextafter(w, np.inf) * (1 + 1e-15), w)
    raise IndeterminateError("could not complete certificate with w")


def _clean_certificate(u, v, pihat, comm):
    # rounding can leave u(t) + v(s) pihat(t) at -1e-17 on an allowed edge;
    # raise u(t) by the deficit, which moves b^t y by the same tiny amount
    for _ in range(64):
        slack = u[:, None] + v[None, :] * pihat[:, None]
        deficit = np.where(comm == 1, np.minimum(slack, 0.0), 0.0).min(axis=1)
        if not (deficit < 0).any():
            return u
        u = np.where(deficit < 0, np.nextafter(u - deficit, np.inf), u)
    raise IndeterminateError("could not clean certificate")


def solve_feasibility(sys: LinearSystem, tol: float = FEAS_TOL) -> FeasibilityOutcome:
    """Decide ``D p = b, p >= 0`` and return a witness or a Farkas certificate.

    The certificate is scaled so ``max(|u|, |v|) = 1`` and is checked
    against both inequality families before being returned.
    """
    ell, pihat, comm = sys.ell, sys.pihat, sys.comm
    x, y, value, basis = phase_one(sys.D, sys.b)

    if value <= tol:
        witness = np.clip(decode(x, ell), 0.0, None)
        res = witness_residuals(witness, pihat, comm)
        if max(res.values()) > tol:
            full = np.hstack([sys.D, np.eye(sys.D.shape[0])])
            raise IndeterminateError(
                f"phase one reached value {value:.3g} but witness residuals are {res}; "
                f"basis condition number {np.linalg.cond(full[:, basis]):.3g}")
        return FeasibilityOutcome("feasible", witness=witness)

    cert = -y
    u, v = cert[:ell], cert[ell:2 * ell]
    scale = max(np.abs(u).max(), np.abs(v).max())
    if scale <= 0:
        raise IndeterminateError(f"phase one value {value:.3g} with a null dual")
    u, v = u / scale, v / scale
    u = _clean_certificate(u, v, pihat, comm)
    total, min_slack = certificate_violations(u, v, pihat, comm)
    if total > -tol or min_slack < 0:
        raise IndeterminateError(
            f"phase one value {value:.3g} but certificate has b^t y = {total:.3g}, "
            f"min allowed slack {min_slack:.3g}")
    w = reconstruct_w(u, v, pihat, comm)
    return FeasibilityOutcome("infeasible", certificate=FarkasCertificate(u, v, w))


def diagonal_shortcut(comm) -> bool:
    """True when every self-loop is allowed, which guarantees feasibility."""
    comm = np.asarray(comm)
    if comm.ndim != 2 or comm.shape[0] != comm.shape[1]:
        raise StructuralError("L must be square")
    return bool(np.all(np.diag(comm) == 1))
