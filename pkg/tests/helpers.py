"""Spec generators and independent oracles shared by the tests."""
from __future__ import annotations

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from maxentchain.model import PartialChainSpec, StateSpace

DESK = {
    "visible": ["i1", "i2"],
    "hidden": ["e1", "e2"],
    "P_II": [[0.3, 0.3], [0.3, 0.3]],
    "P_IE": [[0.2, 0.2], [0.1, 0.3]],
    "P_EI": [[0.3, 0.3], [0.3, 0.3]],
    "pi_I": [0.3, 0.3],
}

# pihat(1) > pihat(2) + pihat(3) with no self-loops: no admissible kernel
INFEASIBLE_PIHAT = np.array([0.6, 0.25, 0.15])
NO_LOOPS_3 = np.ones((3, 3)) - np.eye(3)


def desk_spec(**extra) -> PartialChainSpec:
    return PartialChainSpec(
        StateSpace(tuple(DESK["visible"]), tuple(DESK["hidden"])),
        DESK["P_II"], DESK["P_IE"], DESK["P_EI"], DESK["pi_I"], **extra)


def _reversible_kernel(rng, pihat):
    """A random kernel with stationary ``pihat``, positive off the diagonal."""
    n = pihat.size
    if n == 1:
        return np.ones((1, 1))
    ratio = np.minimum(1.0, pihat[None, :] / pihat[:, None])
    prop = rng.dirichlet(np.ones(n), size=n)
    prop = (prop + prop.T) / 2
    K = prop * ratio
    np.fill_diagonal(K, 0.0)
    K /= K.sum(axis=1).max() * 1.05
    np.fill_diagonal(K, 1.0 - K.sum(axis=1))
    lam = rng.uniform(0, 0.5)
    return (1 - lam) * K + lam * np.tile(pihat, (n, 1))


def spec_for(pihat_i, pihat_e, mass_i, rng, *, comm=None, partition=None,
             eps: float = 0.3, labels=None) -> PartialChainSpec:
    """Build a spec satisfying every standing hypothesis exactly.

    ``P_II = m K + eps x pihat_I^t`` with ``pihat_I . x = 0`` keeps the visible
    eigen-identity; the hidden inflow is the matching remainder.
    """
    pihat_i = np.asarray(pihat_i, float)
    pihat_e = np.asarray(pihat_e, float)
    ni, ne = pihat_i.size, pihat_e.size
    m = float(mass_i)
    K = _reversible_kernel(rng, pihat_i)
    R = np.tile(pihat_e, (ni, 1))
    if ni > 1:
        z = rng.normal(size=ne)
        z -= z.mean()
        y = rng.normal(size=ni)
        y -= pihat_i @ y
        bump = np.outer(y, z)
        lim = np.min(np.where(bump < 0, R / np.where(bump < 0, -bump, 1), np.inf))
        R = R + 0.5 * min(lim, 1.0) * bump
    x = rng.normal(size=ni)
    x -= pihat_i @ x
    p_ii_base = m * K
    p_ie_base = (1 - m) * R
    # largest step keeping both blocks nonnegative
    a = np.outer(x, pihat_i)
    b = -np.outer(x, pihat_e)
    with np.errstate(divide="ignore", invalid="ignore"):
        ca = np.where(a < 0, p_ii_base / -a, np.inf).min()
        cb = np.where(b < 0, p_ie_base / -b, np.inf).min()
    step = eps * min(ca, cb, 1.0)
    p_ii = p_ii_base + step * a
    p_ie = p_ie_base + step * b
    pi_i = m * pihat_i
    vis = tuple(f"i{k}" for k in range(ni))
    hid = labels or tuple(f"e{k}" for k in range(ne))
    return PartialChainSpec(StateSpace(vis, hid), p_ii, p_ie, np.tile(pi_i, (ne, 1)), pi_i,
                            comm=comm, partition=partition)


def random_spec(rng, ni=None, ne=None, **kw) -> PartialChainSpec:
    ni = ni or int(rng.integers(1, 5))
    ne = ne or int(rng.integers(1, 5))
    pihat_i = rng.dirichlet(np.full(ni, 2.0))
    pihat_e = rng.dirichlet(np.full(ne, 2.0))
    return spec_for(pihat_i, pihat_e, rng.uniform(0.15, 0.85), rng, **kw)


def random_irreducible(rng, n, diagonal=True, density=0.4):
    """Random 0-1 irreducible matrix: a Hamiltonian cycle plus random edges."""
    perm = rng.permutation(n)
    L = (rng.random((n, n)) < density).astype(float)
    L[perm, np.roll(perm, -1)] = 1.0
    if diagonal:
        np.fill_diagonal(L, 1.0)
    return L


def entropy(P, w):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(P > 0, P * np.log(P), 0.0)
    return float(-(w[:, None] * t).sum())


def _flow_system(pihat, comm):
    n = pihat.size
    edges = np.argwhere(comm > 0)
    A = np.zeros((2 * n, len(edges)))
    for k, (d, e) in enumerate(edges):
        A[d, k] = 1.0
        A[n + e, k] = 1.0
    b = np.concatenate([pihat, pihat])
    return edges, A, b


def brute_force_maxent(pihat, comm, tol=1e-14, max_newton=200):
    """Maximize h(Z) by damped Newton on the joint flow ``F = diag(pihat) P``.

    Independent of the package: works on edge flows with the equality
    constraints eliminated through a null-space basis, started from the most
    interior point returned by a linear program.
    """
    pihat = np.asarray(pihat, float)
    n = pihat.size
    edges, A, b = _flow_system(pihat, comm)
    k = len(edges)
    # interior start: max t s.t. A x = b, x >= t
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-np.eye(k), np.ones((k, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(k), A_eq=np.hstack([A, np.zeros((2 * n, 1))]),
                  b_eq=b, bounds=[(0, None)] * k + [(0, 1)], method="highs")
    assert res.status == 0 and res.x[-1] > 0, "instance has no interior point"
    x = res.x[:k]
    N = null_space(A)
    w = pihat[edges[:, 0]]

    def f(x):
        return float(np.sum(x * np.log(x / w)))

    for _ in range(max_newton):
        g = np.log(x / w) + 1.0
        gn = N.T @ g
        if np.abs(gn).max() < tol:
            break
        H = N.T @ (N / x[:, None])
        dx = N @ np.linalg.solve(H, -gn)
        t = 1.0
        neg = dx < 0
        if neg.any():
            t = min(1.0, 0.99 * np.min(-x[neg] / dx[neg]))
        f0 = f(x)
        while f(x + t * dx) > f0 + 1e-4 * t * (g @ dx) and t > 1e-16:
            t /= 2
        x = x + t * dx
    F = np.zeros((n, n))
    F[edges[:, 0], edges[:, 1]] = x
    return F / pihat[:, None]


def random_feasible_kernels(rng, pihat, comm, count):
    """Random stochastic kernels on ``comm`` with stationary ``pihat``.

    Vertices of the flow polytope from random linear objectives, then random
    convex combinations of them.
    """
    pihat = np.asarray(pihat, float)
    n = pihat.size
    edges, A, b = _flow_system(pihat, comm)
    verts = []
    for _ in range(max(4, count // 4)):
        r = linprog(rng.normal(size=len(edges)), A_eq=A, b_eq=b, bounds=(0, None),
                    method="highs")
        assert r.status == 0
        verts.append(np.clip(r.x, 0, None))
    verts = np.array(verts)
    out = []
    for k in range(count):
        if k < len(verts):
            x = verts[k]
        else:
            x = rng.dirichlet(np.full(len(verts), 0.5)) @ verts
        F = np.zeros((n, n))
        F[edges[:, 0], edges[:, 1]] = x
        out.append(F / pihat[:, None])
    return out


def lp_feasible(pihat, comm) -> bool:
    """Reference verdict from scipy's HiGHS."""
    _, A, b = _flow_system(np.asarray(pihat, float), comm)
    r = linprog(np.zeros(A.shape[1]), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    return r.status == 0
