"""Partially defined chains: input data, hypothesis checks and derived weights.

States are split into visible states ``I`` and hidden (labyrinth) states
``E``. Known data are the blocks ``P_II``, ``P_IE``, ``P_EI`` and the
unnormalized restriction ``pi_I`` of the stationary law. Everything else is
either derived (``pi_E``) or completed (``P_EE``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    CompletionInvalidError,
    DegeneracyError,
    HypothesisError,
    StructuralError,
)

DEFAULT_TOL = 1e-9

__all__ = [
    "DEFAULT_TOL",
    "StateSpace",
    "PartialChainSpec",
    "Check",
    "ValidationReport",
    "DerivedQuantities",
    "CompletedChain",
    "is_irreducible",
    "validate_hypotheses",
    "derive_quantities",
    "assemble",
    "completion_residuals",
]


def is_irreducible(mat) -> bool:
    """True when the digraph of positive entries is strongly connected."""
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
        return False
    n, _ = connected_components(mat > 0, directed=True, connection="strong")
    return n == 1


def _as_matrix(name, value, shape):
    arr = np.asarray(value, dtype=float)
    if arr.size == 0 and 0 in shape:
        arr = arr.reshape(shape)
    if arr.shape != shape:
        raise StructuralError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise StructuralError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise StructuralError(f"{name} has negative entries")
    return arr


@dataclass(frozen=True)
class StateSpace:
    visible: tuple
    hidden: tuple

    def __post_init__(self):
        object.__setattr__(self, "visible", tuple(self.visible))
        object.__setattr__(self, "hidden", tuple(self.hidden))
        labels = self.visible + self.hidden
        if len(set(labels)) != len(labels):
            raise StructuralError("state labels must be unique across I and E")
        if not self.hidden:
            raise StructuralError("the hidden set E must be nonempty")

    @property
    def n_visible(self) -> int:
        return len(self.visible)

    @property
    def n_hidden(self) -> int:
        return len(self.hidden)

    @property
    def labels(self) -> tuple:
        return self.visible + self.hidden

    def hidden_index(self, label) -> int:
        try:
            return self.hidden.index(label)
        except ValueError:
            raise StructuralError(f"unknown hidden state {label!r}") from None


@dataclass(frozen=True, eq=False)
class PartialChainSpec:
    """Known part of a stationary chain on ``I`` and ``E``.

    An empty visible set is accepted only as the closed-labyrinth case
    (uniform or Parry completion); every other operation needs ``I``.
    ``partition`` is a list of blocks of hidden labels. When a partition is
    given, ``comm`` must be irreducible on each block rather than globally.
    """

    states: StateSpace
    p_ii: np.ndarray
    p_ie: np.ndarray
    p_ei: np.ndarray
    pi_i: np.ndarray
    comm: np.ndarray | None = None
    partition: tuple | None = None

    def __post_init__(self):
        ni, ne = self.states.n_visible, self.states.n_hidden
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("p_ii", _as_matrix("P_II", self.p_ii, (ni, ni)))
        set_("p_ie", _as_matrix("P_IE", self.p_ie, (ni, ne)))
        set_("p_ei", _as_matrix("P_EI", self.p_ei, (ne, ni)))
        pi_i = np.asarray(self.pi_i, dtype=float).reshape(-1)
        if pi_i.shape != (ni,):
            raise StructuralError(f"pi_I has length {pi_i.size}, expected {ni}")
        set_("pi_i", pi_i)
        if ni:
            rows = self.p_ii.sum(axis=1) + self.p_ie.sum(axis=1)
            bad = np.abs(rows - 1.0)
            if bad.max() > DEFAULT_TOL:
                raise StructuralError(
                    f"visible rows of P do not sum to 1 (max deviation {bad.max():.3g})")
            if np.any(pi_i <= 0) or not 0 < pi_i.sum() < 1:
                raise StructuralError("pi_I must be positive with total mass in (0, 1)")

        if self.partition is not None:
            blocks = tuple(tuple(b) for b in self.partition)
            flat = [lab for b in blocks for lab in b]
            if any(len(b) == 0 for b in blocks):
                raise StructuralError("partition blocks must be nonempty")
            if len(flat) != len(set(flat)) or set(flat) != set(self.states.hidden):
                raise StructuralError("partition blocks must be disjoint and cover E")
            set_("partition", blocks)

        if self.comm is not None:
            comm = _as_matrix("L", self.comm, (ne, ne))
            if not np.all((comm == 0) | (comm == 1)):
                raise StructuralError("L must be 0-1 valued")
            for block in self.block_indices():
                if not is_irreducible(comm[np.ix_(block, block)]):
                    raise StructuralError("L must be irreducible (on each labyrinth block)")
            set_("comm", comm)

    @property
    def n_visible(self) -> int:
        return self.states.n_visible

    @property
    def n_hidden(self) -> int:
        return self.states.n_hidden

    @property
    def closed(self) -> bool:
        """No visible states: the labyrinth is the whole chain."""
        return self.states.n_visible == 0

    def block_indices(self) -> list[np.ndarray]:
        """Hidden-state index arrays of the labyrinth blocks, in given order."""
        if self.partition is None:
            return [np.arange(self.n_hidden)]
        return [np.array([self.states.hidden_index(lab) for lab in b]) for b in self.partition]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple
    tol: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "residual": c.residual, "detail": c.detail}
                for c in self.checks
            ],
        }


def validate_hypotheses(spec: PartialChainSpec, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check the standing assumptions on the known blocks.

    Failures are reported, never raised. Checks:

    ``exit_law``
        every row of ``P_EI`` equals ``pi_I``.
    ``visible_eigenvector``
        ``pi_I^t P_II = pi(I) pi_I^t``.
    ``visible_irreducible``
        ``P_II`` is irreducible as a digraph.
    ``labyrinth_reachable``
        some visible state has positive probability of entering ``E``.
    """
    if spec.closed:
        raise StructuralError("hypothesis checks need a nonempty visible set")
    mass = spec.pi_i.sum()

    h1 = float(np.abs(spec.p_ei - spec.pi_i[None, :]).max())
    eig = float(np.abs(spec.pi_i @ spec.p_ii - mass * spec.pi_i).max())
    irreducible = is_irreducible(spec.p_ii)
    to_e = spec.p_ie.sum(axis=1)

    checks = (
        Check("exit_law", h1 <= tol, h1, "rows of P_EI equal pi_I"),
        Check("visible_eigenvector", eig <= tol, eig, "pi_I^t P_II = pi(I) pi_I^t"),
        Check("visible_irreducible", bool(irreducible), 0.0 if irreducible else 1.0,
              "P_II strongly connected"),
        Check("labyrinth_reachable", bool(to_e.max() > 0), float(to_e.max()),
              "some P(i,E) > 0"),
    )
    return ValidationReport(checks, tol)


@dataclass(frozen=True, eq=False)
class DerivedQuantities:
    pi_I_mass: float
    pi_E_mass: float
    pi_e: np.ndarray
    pihat_i: np.ndarray
    pihat_e: np.ndarray


def derive_quantities(spec: PartialChainSpec, tol: float = DEFAULT_TOL) -> DerivedQuantities:
    """Recover the hidden stationary weights forced by the hypotheses.

    ``pi_E(e) = pi(I)^{-1} sum_i pi(i) P(i,e)``.
    """
    report = validate_hypotheses(spec, tol)
    for name in ("exit_law", "visible_eigenvector"):
        if not report[name].passed:
            raise HypothesisError(
                f"{name} fails (residual {report[name].residual:.3g} > tol {tol:g})")

    mass_i = float(spec.pi_i.sum())
    mass_e = 1.0 - mass_i
    pi_e = spec.pi_i @ spec.p_ie / mass_i
    if np.any(pi_e <= 0):
        zero = [spec.states.hidden[k] for k in np.flatnonzero(pi_e <= 0)]
        raise DegeneracyError(f"hidden states {zero} get zero stationary weight")
    if abs(pi_e.sum() - mass_e) > tol:
        raise HypothesisError(
            f"sum of pi_E is {pi_e.sum():.12g}, expected pi(E) = {mass_e:.12g}")
    return DerivedQuantities(
        pi_I_mass=mass_i,
        pi_E_mass=mass_e,
        pi_e=pi_e,
        pihat_i=spec.pi_i / mass_i,
        pihat_e=pi_e / pi_e.sum(),
    )


@dataclass(frozen=True, eq=False)
class CompletedChain:
    """A full stochastic matrix on ``I`` followed by ``E``.

    ``mode`` records which completion produced ``p_ee``: one of
    ``bernoulli``, ``constrained``, ``multi``, ``external``. ``blocks``
    holds per-labyrinth solver output for partitioned specs.
    """

    spec: PartialChainSpec
    p_ee: np.ndarray
    mode: str
    pi: np.ndarray
    derived: DerivedQuantities
    blocks: tuple = field(default=())

    @property
    def P(self) -> np.ndarray:
        s = self.spec
        return np.block([[s.p_ii, s.p_ie], [s.p_ei, self.p_ee]])

    @property
    def n_visible(self) -> int:
        return self.spec.n_visible

    @property
    def p_hat(self) -> np.ndarray:
        return self.p_ee / self.derived.pi_E_mass

    def to_dict(self) -> dict:
        s = self.spec
        out = {
            "mode": self.mode,
            "visible": list(s.states.visible),
            "hidden": list(s.states.hidden),
            "P": self.P.tolist(),
            "P_EE": self.p_ee.tolist(),
            "pi": self.pi.tolist(),
        }
        if self.blocks:
            out["blocks"] = {str(k): b for k, b in enumerate(self.blocks)}
        return out


def completion_residuals(spec, p_ee, derived) -> dict:
    """Sup-norm residuals of the four completed-chain identities."""
    P = np.block([[spec.p_ii, spec.p_ie], [spec.p_ei, p_ee]])
    pi = np.concatenate([spec.pi_i, derived.pi_e])
    pi_e, mass_e = derived.pi_e, derived.pi_E_mass
    return {
        "row_sums": float(np.abs(P.sum(axis=1) - 1.0).max()),
        "stationarity": float(np.abs(pi @ P - pi).max()),
        "hidden_row_mass": float(np.abs(p_ee.sum(axis=1) - mass_e).max()),
        "hidden_stationarity": float(np.abs(pi_e @ p_ee - mass_e * pi_e).max()),
    }


def assemble(spec: PartialChainSpec, p_ee, mode: str = "external",
             tol: float = DEFAULT_TOL, derived: DerivedQuantities | None = None,
             blocks=()) -> CompletedChain:
    """Attach a hidden block to a chain spec and verify the result."""
    derived = derive_quantities(spec, tol) if derived is None else derived
    p_ee = _as_matrix("P_EE", p_ee, (spec.n_hidden, spec.n_hidden))
    res = completion_residuals(spec, p_ee, derived)
    failures = {k: v for k, v in res.items() if v > tol}
    if failures:
        raise CompletionInvalidError(failures)
    pi = np.concatenate([spec.pi_i, derived.pi_e])
    return CompletedChain(spec, p_ee, mode, pi, derived, tuple(blocks))
