"""Hot loops, compiled with numba when available.

Every kernel is written once as plain Python over numpy arrays. The
``numba`` backend compiles them with ``@njit``; the ``numpy`` backend runs
the product-form sweep vectorized and the samplers interpreted. Both draw
from the same ``numpy.random.Generator`` in the same order, so traces are
bit-identical across backends.

Select the default with ``MAXENTCHAIN_BACKEND=numba|numpy``. Numba is used
when importable unless the variable says otherwise.
"""
import os
import types

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

__all__ = ["available_backends", "default_backend", "get_backend"]

# product-form sweep status codes
CONVERGED, BLOWUP, STALLED, MAX_ITER = 0, 1, 2, 3


def _pick(cdf, u):
    # cdf rows may end slightly below 1
    k = np.searchsorted(cdf, u, side="right")
    n = cdf.shape[0]
    return k if k < n else n - 1


def _product_form_loop(pihat, comm, beta, anchor, tol, max_iter, blowup, patience):
    n = pihat.shape[0]
    alpha = np.empty(n)
    new = np.empty(n)
    best = np.inf
    stalled = 0
    for it in range(1, max_iter + 1):
        for d in range(n):
            s = 0.0
            for c in range(n):
                if comm[d, c] != 0.0:
                    s += beta[c]
            alpha[d] = 1.0 / s
        for e in range(n):
            s = 0.0
            for d in range(n):
                if comm[d, e] != 0.0:
                    s += pihat[d] * alpha[d]
            new[e] = pihat[e] / s
        ref = new[anchor]
        change = 0.0
        extreme = False
        for e in range(n):
            v = new[e] / ref
            diff = abs(v - beta[e])
            if diff > change:
                change = diff
            beta[e] = v
            if v > blowup or v < 1.0 / blowup:
                extreme = True
        for d in range(n):
            if alpha[d] > blowup or alpha[d] < 1.0 / blowup:
                extreme = True
        if extreme or not np.isfinite(change):
            return it, BLOWUP
        if change <= tol:
            return it, CONVERGED
        if change < best:
            best = change
            stalled = 0
        else:
            stalled += 1
            if stalled >= patience:
                return it, STALLED
    return max_iter, MAX_ITER


def _product_form_vectorized(pihat, comm, beta, anchor, tol, max_iter, blowup, patience):
    best = np.inf
    stalled = 0
    for it in range(1, max_iter + 1):
        alpha = 1.0 / (comm @ beta)
        new = pihat / (comm.T @ (pihat * alpha))
        new /= new[anchor]
        change = np.max(np.abs(new - beta))
        beta[:] = new
        extreme = (np.any(new > blowup) or np.any(new < 1.0 / blowup)
                   or np.any(alpha > blowup) or np.any(alpha < 1.0 / blowup))
        if extreme or not np.isfinite(change):
            return it, BLOWUP
        if change <= tol:
            return it, CONVERGED
        if change < best:
            best = change
            stalled = 0
        else:
            stalled += 1
            if stalled >= patience:
                return it, STALLED
    return max_iter, MAX_ITER


def _direct_loop(init_cdf, cdf, steps, rng):
    out = np.empty(steps, dtype=np.int64)
    x = _pick(init_cdf, rng.random())
    out[0] = x
    for t in range(1, steps):
        x = _pick(cdf[x], rng.random())
        out[t] = x
    return out


def _initial_segment(out, pos, steps, pihat_e_cdf, phat_cdf, kill, n_visible, rng):
    # killed excursion Z' from pihat_E; W takes Z'_1..Z'_{tau'-1}
    z = _pick(pihat_e_cdf, rng.random())
    while True:
        if rng.random() < kill:
            return pos
        z = _pick(phat_cdf[z], rng.random())
        if pos < steps:
            out[pos] = n_visible + z
        pos += 1


def _splice_loop(q_cdf, theta, entry_cdf, phat_cdf, pihat_i_cdf, pihat_e_cdf,
                 kill, n_visible, steps, rng):
    out = np.empty(steps, dtype=np.int64)
    pos = _initial_segment(out, 0, steps, pihat_e_cdf, phat_cdf, kill, n_visible, rng)
    y = _pick(pihat_i_cdf, rng.random())
    if pos < steps:
        out[pos] = y
    pos += 1
    while pos < steps:
        j = _pick(q_cdf[y], rng.random())
        if rng.random() >= theta[y, j]:
            z = _pick(entry_cdf[y], rng.random())
            out[pos] = n_visible + z
            pos += 1
            while pos < steps:
                if rng.random() < kill:
                    break
                z = _pick(phat_cdf[z], rng.random())
                out[pos] = n_visible + z
                pos += 1
        if pos < steps:
            out[pos] = j
        pos += 1
        y = j
    return out


def _initial_states_loop(pihat_i_cdf, pihat_e_cdf, phat_cdf, kill, n_visible, n, rng):
    out = np.empty(n, dtype=np.int64)
    buf = np.empty(1, dtype=np.int64)
    for k in range(n):
        pos = _initial_segment(buf, 0, 1, pihat_e_cdf, phat_cdf, kill, n_visible, rng)
        if pos == 0:
            buf[0] = _pick(pihat_i_cdf, rng.random())
        out[k] = buf[0]
    return out


def _build_numpy():
    return types.SimpleNamespace(
        name="numpy",
        product_form=_product_form_vectorized,
        direct=_direct_loop,
        splice=_splice_loop,
        initial_states=_initial_states_loop,
    )


def _build_numba():
    jit = numba.njit(cache=True)
    pick = jit(_pick)

    # compiled kernels resolve helpers through their globals, so each gets a
    # copy of the module namespace with the compiled helpers swapped in
    def rebind(fn, **extra):
        env = dict(fn.__globals__)
        env.update(extra)
        return types.FunctionType(fn.__code__, env, fn.__name__, fn.__defaults__, fn.__closure__)

    seg = jit(rebind(_initial_segment, _pick=pick))
    return types.SimpleNamespace(
        name="numba",
        product_form=jit(_product_form_loop),
        direct=jit(rebind(_direct_loop, _pick=pick)),
        splice=jit(rebind(_splice_loop, _pick=pick, _initial_segment=seg)),
        initial_states=jit(rebind(_initial_states_loop, _initial_segment=seg, _pick=pick)),
    )


_BACKENDS = {}


def available_backends() -> list[str]:
    return ["numba", "numpy"] if numba is not None else ["numpy"]


def default_backend() -> str:
    name = os.environ.get("MAXENTCHAIN_BACKEND", "").strip().lower()
    if name in ("", "auto"):
        return "numba" if numba is not None else "numpy"
    if name not in ("numba", "numpy"):
        raise ValueError(f"MAXENTCHAIN_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and numba is None:
        raise ImportError("MAXENTCHAIN_BACKEND=numba but numba is not installed")
    return name


def get_backend(name: str | None = None):
    """Kernel namespace for ``name`` (default from the environment)."""
    name = default_backend() if name is None else name
    if name not in _BACKENDS:
        if name == "numba":
            if numba is None:
                raise ImportError("numba is not installed")
            _BACKENDS[name] = _build_numba()
        elif name == "numpy":
            _BACKENDS[name] = _build_numpy()
        else:
            raise ValueError(f"unknown backend {name!r}")
    return _BACKENDS[name]
