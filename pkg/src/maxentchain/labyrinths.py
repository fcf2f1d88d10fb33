"""Several labyrinths joined only through visible states.

Each block ``E_m`` is completed on its own. Note the row mass of every
block is the global ``pi(E)``, not ``pi(E_m)``: from any hidden state the
chain exits to ``I`` with probability ``pi(I)`` and otherwise stays in its
own block.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleOrDegenerateError, StructuralError
from .feasibility import build_system, solve_feasibility
from .maxent import entropy_rate, maxent_product_form
from .model import DEFAULT_TOL, CompletedChain, PartialChainSpec, assemble, derive_quantities

__all__ = ["BlockProblem", "decompose", "complete_blocks", "block_entropies"]


@dataclass(frozen=True, eq=False)
class BlockProblem:
    index: int
    labels: tuple
    indices: np.ndarray
    pi_e: np.ndarray
    pihat: np.ndarray
    comm: np.ndarray | None
    row_mass: float


def decompose(spec: PartialChainSpec, tol: float = DEFAULT_TOL) -> list[BlockProblem]:
    """Split the hidden set along ``spec.partition`` (one block if absent)."""
    for m, idx in enumerate(spec.block_indices()):
        if not np.any(spec.p_ie[:, idx] > 0):
            raise StructuralError(f"block {m} receives no mass from the visible states")
    der = derive_quantities(spec, tol)
    problems = []
    for m, idx in enumerate(spec.block_indices()):
        pi_m = der.pi_e[idx]
        comm_m = None if spec.comm is None else spec.comm[np.ix_(idx, idx)]
        problems.append(BlockProblem(
            index=m,
            labels=tuple(spec.states.hidden[k] for k in idx),
            indices=idx,
            pi_e=pi_m,
            pihat=pi_m / pi_m.sum(),
            comm=comm_m,
            row_mass=der.pi_E_mass,
        ))
    return problems


def complete_blocks(spec: PartialChainSpec, problems: list[BlockProblem], modes=None, *,
                    tol: float = 1e-12, max_iter: int = 100_000,
                    backend: str | None = None) -> CompletedChain:
    """Complete every block and assemble a block-diagonal hidden kernel.

    ``modes`` maps block index to ``"bernoulli"``, ``"constrained"`` or
    ``"auto"`` (constrained when the block has a communication matrix).
    Constrained blocks are checked with the feasibility LP first; an
    infeasible block raises with its index and certificate attached.
    """
    modes = dict(modes or {})
    der = derive_quantities(spec)
    p_ee = np.zeros((spec.n_hidden, spec.n_hidden))
    telemetry = []
    for prob in problems:
        mode = modes.get(prob.index, "auto")
        if mode == "auto":
            mode = "bernoulli" if prob.comm is None else "constrained"
        if mode == "bernoulli":
            p_hat = np.tile(prob.pihat, (prob.pihat.size, 1))
            info = {"mode": "bernoulli"}
        elif mode == "constrained":
            if prob.comm is None:
                raise StructuralError(f"block {prob.index} has no communication matrix")
            outcome = solve_feasibility(build_system(prob.pihat, prob.comm))
            if not outcome.feasible:
                raise InfeasibleOrDegenerateError(
                    "support constraints are infeasible", block=prob.index,
                    certificate=outcome.certificate)
            sol = maxent_product_form(prob.pihat, prob.comm, prob.row_mass, tol=tol,
                                      max_iter=max_iter, backend=backend, block=prob.index)
            p_hat = sol.p_hat
            info = {"mode": "constrained", **sol.to_dict()}
        else:
            raise StructuralError(f"unknown block mode {mode!r}")
        p_ee[np.ix_(prob.indices, prob.indices)] = prob.row_mass * p_hat
        info["labels"] = list(prob.labels)
        telemetry.append(info)

    kinds = {t["mode"] for t in telemetry}
    if len(problems) > 1:
        chain_mode = "multi"
    else:
        chain_mode = kinds.pop()
    return assemble(spec, p_ee, mode=chain_mode, derived=der, blocks=telemetry)


def block_entropies(chain: CompletedChain, problems: list[BlockProblem]) -> list[float]:
    """Per-block hidden entropy terms; they add up to the total ``H'``."""
    return [
        entropy_rate(chain.p_ee[np.ix_(p.indices, p.indices)], chain.derived.pi_e[p.indices])
        for p in problems
    ]
