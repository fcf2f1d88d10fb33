import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import DESK, INFEASIBLE_PIHAT, NO_LOOPS_3, random_irreducible, spec_for
from maxentchain import (
    InfeasibleOrDegenerateError,
    PartialChainSpec,
    StateSpace,
    StructuralError,
    block_entropies,
    complete_blocks,
    constrained_chain,
    decompose,
    derive_quantities,
    entropy_full,
)


def _two_block_spec(rng, sizes=(2, 3), comm=True, pihat_e=None):
    ne = sum(sizes)
    pihat_e = rng.dirichlet(np.full(ne, 2.0)) if pihat_e is None else np.asarray(pihat_e)
    labels = tuple(f"e{k}" for k in range(ne))
    blocks, start = [], 0
    L = np.zeros((ne, ne)) if comm else None
    for size in sizes:
        idx = list(range(start, start + size))
        blocks.append([labels[k] for k in idx])
        if comm:
            L[np.ix_(idx, idx)] = random_irreducible(rng, size)
        start += size
    return spec_for(rng.dirichlet(np.ones(3)), pihat_e, rng.uniform(0.3, 0.7), rng,
                    comm=L, partition=blocks, labels=labels)


def _desk_split():
    return PartialChainSpec(StateSpace(tuple(DESK["visible"]), tuple(DESK["hidden"])),
                            DESK["P_II"], DESK["P_IE"], DESK["P_EI"], DESK["pi_I"],
                            partition=[["e1"], ["e2"]])


class TestDecompose:
    def test_single_block_default(self, desk):
        (prob,) = decompose(desk)
        der = derive_quantities(desk)
        np.testing.assert_array_equal(prob.pihat, der.pihat_e)
        assert prob.row_mass == der.pi_E_mass

    def test_singletons_share_global_row_mass(self):
        probs = decompose(_desk_split())
        assert [p.labels for p in probs] == [("e1",), ("e2",)]
        for p in probs:
            np.testing.assert_array_equal(p.pihat, [1.0])
            assert p.row_mass == pytest.approx(0.4, abs=1e-15)
        np.testing.assert_allclose([probs[0].pi_e[0], probs[1].pi_e[0]], [0.15, 0.25])

    def test_unreachable_block(self, rng):
        spec = _two_block_spec(rng, comm=False)
        p_ie = spec.p_ie.copy()
        p_ie[:, 2] += p_ie[:, :2].sum(axis=1)
        p_ie[:, :2] = 0
        cut = PartialChainSpec(spec.states, spec.p_ii, p_ie, spec.p_ei, spec.pi_i,
                               partition=spec.partition)
        with pytest.raises(StructuralError, match="block 0"):
            decompose(cut)

    def test_per_block_exit_identity(self, rng):
        spec = _two_block_spec(rng)
        mass = spec.pi_i.sum()
        for p in decompose(spec):
            np.testing.assert_allclose(p.pi_e, spec.pi_i @ spec.p_ie[:, p.indices] / mass,
                                       atol=1e-15)
            assert p.pihat.sum() == pytest.approx(1.0, abs=1e-15)


class TestCompleteBlocks:
    def test_singleton_blocks_diagonal(self):
        spec = _desk_split()
        chain = complete_blocks(spec, decompose(spec))
        np.testing.assert_allclose(chain.p_ee, np.diag([0.4, 0.4]), atol=1e-15)
        assert chain.mode == "multi"

    def test_bernoulli_blocks_entropy_additive(self, rng):
        spec = _two_block_spec(rng, comm=False)
        probs = decompose(spec)
        chain = complete_blocks(spec, probs)
        rep = entropy_full(chain)
        assert abs(sum(block_entropies(chain, probs)) - rep.H_prime) <= 1e-12
        for p in probs:
            blk = chain.p_ee[np.ix_(p.indices, p.indices)]
            np.testing.assert_allclose(blk, p.row_mass * np.tile(p.pihat, (len(p.indices), 1)),
                                       atol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_constrained_blocks(self, seed):
        rng = np.random.default_rng(seed)
        spec = _two_block_spec(rng, sizes=(int(rng.integers(1, 4)), int(rng.integers(1, 4))))
        probs = decompose(spec)
        chain = complete_blocks(spec, probs)
        a, b = probs
        assert np.all(chain.p_ee[np.ix_(a.indices, b.indices)] == 0)
        assert np.all(chain.p_ee[np.ix_(b.indices, a.indices)] == 0)
        np.testing.assert_allclose(chain.p_ee.sum(axis=1), 1 - spec.pi_i.sum(), atol=1e-10)
        rep = entropy_full(chain)
        assert abs(sum(block_entropies(chain, probs)) - rep.H_prime) <= 1e-12
        # block order does not matter
        again = complete_blocks(spec, probs[::-1])
        np.testing.assert_array_equal(again.p_ee, chain.p_ee)

    def test_single_block_bit_identical(self, rng):
        L = random_irreducible(rng, 4)
        spec = spec_for([0.3, 0.7], rng.dirichlet(np.ones(4)), 0.5, rng, comm=L)
        direct, _ = constrained_chain(spec)
        via = complete_blocks(spec, decompose(spec))
        assert np.array_equal(direct.p_ee, via.p_ee)
        assert via.mode == "constrained"

    def test_mixed_modes(self, rng):
        spec = _two_block_spec(rng)
        probs = decompose(spec)
        chain = complete_blocks(spec, probs, {0: "bernoulli", 1: "constrained"})
        assert [b["mode"] for b in chain.blocks] == ["bernoulli", "constrained"]
        assert "telemetry" in chain.blocks[1]

    def test_unknown_mode(self, rng):
        spec = _two_block_spec(rng)
        with pytest.raises(StructuralError):
            complete_blocks(spec, decompose(spec), {0: "parry"})

    def test_infeasible_block_named(self, rng):
        labels = ("a", "b", "c", "d")
        pihat_e = np.concatenate([0.5 * INFEASIBLE_PIHAT, [0.5]])
        L = np.zeros((4, 4))
        L[:3, :3] = NO_LOOPS_3
        L[3, 3] = 1
        spec = spec_for([0.5, 0.5], pihat_e, 0.6, rng, comm=L,
                        partition=[["d"], ["a", "b", "c"]], labels=labels)
        with pytest.raises(InfeasibleOrDegenerateError) as exc:
            complete_blocks(spec, decompose(spec))
        assert exc.value.block == 1
        assert "block 1" in str(exc.value)
        assert exc.value.certificate is not None
