"""Rebuild the chain from its visible skeleton and killed hidden excursions.

The skeleton ``Y`` runs on ``I`` with kernel
``Q(i,j) = P(i,j) + P(i,E) pihat_I(j)``. Each skeleton step ``i -> j`` is
taken directly when a gate with success probability
``theta(i,j) = P(i,j) / Q(i,j)`` opens; otherwise an excursion into ``E``
is spliced in before landing on ``j``. The excursion enters at ``d`` with
probability ``P(i,d) / P(i,E)``, moves by ``P_EE / pi(E)`` and is killed
with probability ``pi(I)`` at each step.

The trace is one-sided (``t >= 0``) and starts stationary: a killed
excursion from ``pihat_E`` fills ``[0, S_0)`` and ``W(S_0) ~ pihat_I``.

Random numbers come from one ``numpy.random.Generator`` in this order:
initial excursion (entry state, then kill/move pairs), ``W(S_0)``, then per
skeleton step: target ``j``, gate, entry state, kill/move pairs.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import kernels
from .errors import CompletionInvalidError
from .model import CompletedChain

__all__ = [
    "SkeletonKernel",
    "SpliceTrace",
    "SimStats",
    "LawComparison",
    "build_skeleton",
    "entry_law_residuals",
    "simulate_splice",
    "simulate_direct",
    "sample_initial_states",
    "compare_laws",
    "MIN_TRACE_LENGTH",
]

MIN_TRACE_LENGTH = 100_000
SIGMAS = 3.0
CHI2_LEVEL = 0.01
TV_LIMIT = 0.01
MIN_EDGE_FLOW = 1e-3
CHECK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SkeletonKernel:
    q: np.ndarray
    theta: np.ndarray


def build_skeleton(chain: CompletedChain, tol: float = CHECK_TOL) -> SkeletonKernel:
    """Skeleton kernel ``Q`` and gate probabilities ``theta``."""
    s, der = chain.spec, chain.derived
    to_e = s.p_ie.sum(axis=1)
    q = s.p_ii + np.outer(to_e, der.pihat_i)
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.where(q > 0, s.p_ii / q, 0.0)

    res = {
        "skeleton_row_sums": float(np.abs(q.sum(axis=1) - 1.0).max()),
        "skeleton_stationarity": float(np.abs(der.pihat_i @ q - der.pihat_i).max()),
        "gate_direct": float(np.abs(q * theta - s.p_ii).max()),
        "gate_excursion": float(np.abs(q * (1 - theta) - np.outer(to_e, der.pihat_i)).max()),
    }
    bad = {k: v for k, v in res.items() if v > tol}
    if bad:
        raise CompletionInvalidError(bad)
    return SkeletonKernel(q, theta)


def entry_law_residuals(chain: CompletedChain, skeleton: SkeletonKernel) -> dict:
    """Residuals of the hidden-entry identities.

    For each visible ``i`` with ``P(i,E) > 0``, summing the closed-gate mass
    over ``j`` times the entry law gives back ``P(i,d)``; averaging over
    ``pihat_I`` gives ``pi(d)``.
    """
    s, der = chain.spec, chain.derived
    to_e = s.p_ie.sum(axis=1)
    closed = (skeleton.q * (1 - skeleton.theta)).sum(axis=1)
    live = to_e > 0
    entry = np.zeros_like(s.p_ie)
    entry[live] = s.p_ie[live] / to_e[live, None]
    per_row = closed[:, None] * entry
    return {
        "per_state": float(np.abs(per_row - s.p_ie).max()),
        "averaged": float(np.abs(der.pihat_i @ per_row - der.pi_e).max()),
    }


def _cdf(mat):
    return np.ascontiguousarray(np.cumsum(mat, axis=-1))


@dataclass(frozen=True, eq=False)
class SpliceTrace:
    w: np.ndarray
    n_visible: int
    seed: int
    labels: tuple = field(default=())

    @property
    def in_visible(self) -> np.ndarray:
        return self.w < self.n_visible

    @property
    def renewal_times(self) -> np.ndarray:
        return np.flatnonzero(self.in_visible)

    @property
    def segments(self) -> list[tuple[str, int, int]]:
        """``(kind, start, stop)`` spans tiling ``[0, T)``."""
        vis = self.in_visible
        change = np.flatnonzero(np.diff(vis.astype(np.int8))) + 1
        starts = np.concatenate([[0], change])
        stops = np.concatenate([change, [vis.size]])
        out = []
        for a, b in zip(starts.tolist(), stops.tolist()):
            if vis[a]:
                out.extend(("visible-step", t, t + 1) for t in range(a, b))
            else:
                out.append(("excursion", a, b))
        return out

    def to_csv(self) -> str:
        kinds = np.where(self.in_visible, "visible-step", "excursion")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "state", "segment_kind"])
        names = self.labels or tuple(range(int(self.w.max()) + 1))
        for t, (x, k) in enumerate(zip(self.w.tolist(), kinds.tolist())):
            writer.writerow([t, names[x], k])
        return buf.getvalue()


def _splice_args(chain, skeleton):
    s, der = chain.spec, chain.derived
    to_e = s.p_ie.sum(axis=1)
    entry = np.zeros_like(s.p_ie)
    live = to_e > 0
    entry[live] = s.p_ie[live] / to_e[live, None]
    return (
        _cdf(skeleton.q),
        np.ascontiguousarray(skeleton.theta),
        _cdf(entry),
        _cdf(chain.p_hat),
        _cdf(der.pihat_i),
        _cdf(der.pihat_e),
        float(der.pi_I_mass),
        s.n_visible,
    )


def simulate_splice(chain: CompletedChain, steps: int, seed: int = 0,
                    skeleton: SkeletonKernel | None = None,
                    backend: str | None = None) -> SpliceTrace:
    """Sample ``steps`` states of the spliced process ``W``.

    Pass ``skeleton`` to override ``Q``/``theta``, e.g. to check that a
    wrong gate is detected.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    skeleton = build_skeleton(chain) if skeleton is None else skeleton
    rng = np.random.default_rng(seed)
    w = kernels.get_backend(backend).splice(*_splice_args(chain, skeleton), int(steps), rng)
    return SpliceTrace(w, chain.n_visible, seed, chain.spec.states.labels)


def sample_initial_states(chain: CompletedChain, n: int, seed: int = 0,
                          backend: str | None = None) -> np.ndarray:
    """``n`` independent draws of ``W(0)`` using the splice initial segment."""
    args = _splice_args(chain, build_skeleton(chain))
    _, _, _, phat_cdf, pi_i_cdf, pi_e_cdf, kill, n_visible = args
    rng = np.random.default_rng(seed)
    return kernels.get_backend(backend).initial_states(
        pi_i_cdf, pi_e_cdf, phat_cdf, kill, n_visible, int(n), rng)


def simulate_direct(chain: CompletedChain, steps: int, seed: int = 0,
                    backend: str | None = None) -> np.ndarray:
    """Plain stationary sampling of the full chain."""
    if steps < 1:
        raise ValueError("steps must be at least 1")
    rng = np.random.default_rng(seed)
    return kernels.get_backend(backend).direct(_cdf(chain.pi), _cdf(chain.P), int(steps), rng)


@dataclass(frozen=True, eq=False)
class SimStats:
    counts: np.ndarray
    empirical_P: np.ndarray
    gap_histogram: np.ndarray
    marginal: np.ndarray
    visible_marginal_at_renewals: np.ndarray

    def to_dict(self) -> dict:
        return {
            "empirical_P": self.empirical_P.tolist(),
            "gap_histogram": self.gap_histogram.tolist(),
            "marginal": self.marginal.tolist(),
            "visible_marginal_at_renewals": self.visible_marginal_at_renewals.tolist(),
        }


def sim_stats(w, n_states: int, n_visible: int) -> SimStats:
    w = np.asarray(w)
    counts = np.zeros((n_states, n_states))
    np.add.at(counts, (w[:-1], w[1:]), 1.0)
    rows = counts.sum(axis=1, keepdims=True)
    emp = np.divide(counts, rows, out=np.zeros_like(counts), where=rows > 0)
    renewals = np.flatnonzero(w < n_visible)
    gaps = np.diff(renewals)
    at_renewal = np.bincount(w[renewals], minlength=n_visible).astype(float)
    return SimStats(
        counts=counts,
        empirical_P=emp,
        gap_histogram=np.bincount(gaps, minlength=2),
        marginal=np.bincount(w, minlength=n_states) / w.size,
        visible_marginal_at_renewals=at_renewal / max(at_renewal.sum(), 1.0),
    )


@dataclass(frozen=True, eq=False)
class LawComparison:
    verdict: str
    stats: SimStats
    criteria: dict

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "criteria": self.criteria, "stats": self.stats.to_dict()}


def _geometric_chi2(hist, p):
    n = hist.sum()
    ks = np.arange(1, hist.size)
    obs = hist[1:].astype(float)
    expected = n * stats.geom.pmf(ks, p)
    # pool the tail so every bin expects at least 5
    last = int(np.flatnonzero(expected >= 5).max()) if np.any(expected >= 5) else 0
    pooled_obs = np.append(obs[:last], obs[last:].sum())
    pooled_exp = np.append(expected[:last], n * stats.geom.sf(last, p))
    if pooled_obs.size < 2:
        return np.nan, 0.0
    res = stats.chisquare(pooled_obs, pooled_exp)
    return float(res.statistic), float(res.pvalue)


def _batch_sigma(x, batches=100):
    usable = x.size - x.size % batches
    means = x[:usable].reshape(batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(batches))


def compare_laws(trace: SpliceTrace, chain: CompletedChain,
                 min_length: int = MIN_TRACE_LENGTH) -> LawComparison:
    """Check that the spliced trace has the law of the chain.

    Criteria:

    ``transitions``
        empirical transition frequencies within 3 binomial standard errors
        of ``P`` on every edge with flow ``pi(a) P(a,b) >= 1e-3``.
    ``renewal_gaps``
        gaps between visits to ``I`` pass a chi-square test against
        Geometric(``pi(I)``) at the 1% level.
    ``renewal_law``
        total variation between the visible state at renewals and
        ``pihat_I`` is at most 0.01.
    ``visible_fraction``
        fraction of time in ``I`` within 3 sigma of ``pi(I)``; sigma is the
        larger of the binomial and the batch-means estimate.

    Traces shorter than ``min_length`` give ``"inconclusive"``.
    """
    P, pi = chain.P, chain.pi
    n_vis = chain.n_visible
    st = sim_stats(trace.w, P.shape[0], n_vis)
    if trace.w.size < min_length:
        return LawComparison("inconclusive", st, {
            "reason": f"trace length {trace.w.size} < {min_length}"})

    visits = st.counts.sum(axis=1)
    checked = (pi[:, None] * P >= MIN_EDGE_FLOW) & (visits[:, None] > 0)
    se = np.sqrt(P * (1 - P) / np.maximum(visits, 1.0)[:, None])
    z = np.where(checked, np.abs(st.empirical_P - P) / np.where(se > 0, se, np.inf), 0.0)
    z = np.where(checked & (se == 0) & (st.empirical_P != P), np.inf, z)
    max_z = float(z.max()) if checked.any() else 0.0

    chi2, pvalue = _geometric_chi2(st.gap_histogram, chain.derived.pi_I_mass)
    tv = float(0.5 * np.abs(st.visible_marginal_at_renewals - chain.derived.pihat_i).sum())

    in_vis = trace.in_visible.astype(float)
    frac = float(in_vis.mean())
    p_i = chain.derived.pi_I_mass
    sigma = max(np.sqrt(p_i * (1 - p_i) / in_vis.size), _batch_sigma(in_vis))
    frac_z = abs(frac - p_i) / sigma

    criteria = {
        "transitions": {"passed": bool(max_z <= SIGMAS), "max_z": max_z,
                        "threshold": SIGMAS, "edges_checked": int(checked.sum())},
        "renewal_gaps": {"passed": bool(pvalue >= CHI2_LEVEL), "chi2": chi2,
                         "pvalue": pvalue, "threshold": CHI2_LEVEL},
        "renewal_law": {"passed": bool(tv <= TV_LIMIT), "tv": tv, "threshold": TV_LIMIT},
        "visible_fraction": {"passed": bool(frac_z <= SIGMAS), "fraction": frac,
                             "expected": p_i, "z": float(frac_z), "threshold": SIGMAS},
    }
    verdict = "pass" if all(c["passed"] for c in criteria.values()) else "fail"
    return LawComparison(verdict, st, criteria)
