import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import DESK, desk_spec, random_spec
from maxentchain import (
    CompletionInvalidError,
    DegeneracyError,
    HypothesisError,
    PartialChainSpec,
    StateSpace,
    StructuralError,
    assemble,
    complete_bernoulli,
    derive_quantities,
    validate_hypotheses,
)
from maxentchain.model import is_irreducible


def _spec(**over):
    d = {**DESK, **over}
    return PartialChainSpec(StateSpace(tuple(d["visible"]), tuple(d["hidden"])),
                            d["P_II"], d["P_IE"], d["P_EI"], d["pi_I"],
                            comm=d.get("L"), partition=d.get("partition"))


class TestStateSpace:
    def test_duplicate_labels_rejected(self):
        with pytest.raises(StructuralError):
            StateSpace(("a", "b"), ("b", "c"))

    def test_empty_hidden_rejected(self):
        with pytest.raises(StructuralError):
            StateSpace(("a",), ())

    def test_hidden_index(self):
        s = StateSpace(("a",), ("x", "y"))
        assert s.hidden_index("y") == 1
        assert s.labels == ("a", "x", "y")


class TestSpecValidation:
    def test_rows_must_sum_to_one(self):
        with pytest.raises(StructuralError):
            _spec(P_IE=[[0.2, 0.2], [0.1, 0.2]])

    def test_negative_entries_rejected(self):
        with pytest.raises(StructuralError):
            _spec(P_II=[[0.3, 0.3], [0.5, 0.1]], P_IE=[[0.2, 0.2], [-0.1, 0.5]])

    @pytest.mark.parametrize("pi", [[0.5, 0.5], [0.0, 0.3], [0.6, 0.6]])
    def test_pi_mass_bounds(self, pi):
        with pytest.raises(StructuralError):
            _spec(pi_I=pi)

    def test_shape_mismatch(self):
        with pytest.raises(StructuralError):
            _spec(P_EI=[[0.3, 0.3]])

    def test_reducible_comm_rejected(self):
        with pytest.raises(StructuralError):
            _spec(L=[[1, 1], [0, 1]])

    def test_non_binary_comm_rejected(self):
        with pytest.raises(StructuralError):
            _spec(L=[[1, 0.5], [1, 1]])

    def test_partition_must_cover(self):
        with pytest.raises(StructuralError):
            _spec(partition=[["e1"]])
        with pytest.raises(StructuralError):
            _spec(partition=[["e1", "e2"], ["e2"]])

    def test_comm_irreducible_per_block(self):
        spec = _spec(L=[[1, 0], [0, 1]], partition=[["e1"], ["e2"]])
        assert len(spec.block_indices()) == 2

    def test_irreducibility_is_structural(self):
        assert is_irreducible(np.array([[0, 1e-300], [1, 0]]))
        assert not is_irreducible(np.array([[1.0, 1.0], [0.0, 1.0]]))


class TestValidateHypotheses:
    def test_desk_passes_with_zero_residuals(self, desk):
        rep = validate_hypotheses(desk)
        assert rep.passed
        assert rep["exit_law"].residual == 0.0
        assert rep["visible_eigenvector"].residual == pytest.approx(0.0, abs=1e-15)

    def test_exit_law_violation_reported_not_raised(self):
        spec = _spec(P_EI=[[0.3, 0.3], [0.4, 0.2]])
        rep = validate_hypotheses(spec)
        assert not rep.passed
        assert not rep["exit_law"].passed
        assert rep["exit_law"].residual == pytest.approx(0.1)
        assert rep["visible_eigenvector"].passed

    def test_eigenvector_violation(self):
        spec = _spec(P_II=[[0.4, 0.2], [0.3, 0.3]], P_IE=[[0.2, 0.2], [0.1, 0.3]])
        rep = validate_hypotheses(spec)
        assert not rep["visible_eigenvector"].passed
        assert rep["visible_eigenvector"].residual == pytest.approx(0.03)

    def test_no_entry_to_hidden(self):
        spec = PartialChainSpec(StateSpace(("a",), ("x",)), [[1.0]], [[0.0]], [[0.5]], [0.5])
        rep = validate_hypotheses(spec)
        assert not rep["labyrinth_reachable"].passed

    def test_idempotent(self, desk):
        assert validate_hypotheses(desk).to_dict() == validate_hypotheses(desk).to_dict()

    def test_closed_spec_is_not_validated(self):
        spec = PartialChainSpec(StateSpace((), ("x", "y")), np.zeros((0, 0)), np.zeros((0, 2)),
                                np.zeros((2, 0)), [])
        assert spec.closed
        with pytest.raises(StructuralError):
            validate_hypotheses(spec)


class TestDeriveQuantities:
    def test_desk_values(self, desk):
        der = derive_quantities(desk)
        assert der.pi_I_mass == pytest.approx(0.6, abs=1e-15)
        assert der.pi_E_mass == pytest.approx(0.4, abs=1e-15)
        np.testing.assert_allclose(der.pi_e, [0.15, 0.25], atol=1e-15)
        np.testing.assert_allclose(der.pihat_e, [0.375, 0.625], atol=1e-15)
        np.testing.assert_allclose(der.pihat_i, [0.5, 0.5], atol=1e-15)

    def test_zero_column_is_degenerate(self):
        spec = _spec(P_IE=[[0.4, 0.0], [0.4, 0.0]])
        with pytest.raises(DegeneracyError):
            derive_quantities(spec)

    def test_single_hidden_state(self):
        spec = PartialChainSpec(StateSpace(("a", "b"), ("x",)), [[0.3, 0.3], [0.3, 0.3]],
                                [[0.4], [0.4]], [[0.3, 0.3]], [0.3, 0.3])
        der = derive_quantities(spec)
        np.testing.assert_allclose(der.pi_e, [0.4])
        np.testing.assert_array_equal(der.pihat_e, [1.0])

    def test_hypothesis_failure_raises(self):
        with pytest.raises(HypothesisError):
            derive_quantities(_spec(P_EI=[[0.3, 0.3], [0.4, 0.2]]))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_random_specs(self, seed):
        rng = np.random.default_rng(seed)
        spec = random_spec(rng)
        der = derive_quantities(spec)
        mass = spec.pi_i.sum()
        np.testing.assert_allclose(der.pi_e, spec.pi_i @ spec.p_ie / mass, atol=1e-15)
        assert der.pi_e.sum() == pytest.approx(der.pi_E_mass, abs=1e-12)
        assert der.pihat_i.sum() == pytest.approx(1, abs=1e-12)
        assert der.pihat_e.sum() == pytest.approx(1, abs=1e-12)
        assert np.all(der.pihat_e > 0) and np.all(der.pihat_i > 0)
        # pihat_I P_II^n = pi(I)^n pihat_I
        v = der.pihat_i.copy()
        for n in range(1, 21):
            v = v @ spec.p_ii
            np.testing.assert_allclose(v, mass**n * der.pihat_i, atol=1e-12)


class TestAssemble:
    def test_bernoulli_block_accepted(self, desk):
        chain = assemble(desk, [[0.15, 0.25], [0.15, 0.25]])
        assert chain.mode == "external"
        np.testing.assert_allclose(chain.pi, [0.3, 0.3, 0.15, 0.25])
        assert np.abs(chain.pi @ chain.P - chain.pi).max() < 1e-15

    def test_zero_block_rejected(self, desk):
        with pytest.raises(CompletionInvalidError) as exc:
            assemble(desk, np.zeros((2, 2)))
        assert "row_sums" in exc.value.failures

    def test_scaled_block_residual(self, desk):
        with pytest.raises(CompletionInvalidError) as exc:
            assemble(desk, 1.01 * np.array([[0.15, 0.25], [0.15, 0.25]]))
        assert exc.value.failures["hidden_row_mass"] == pytest.approx(0.01 * 0.4)

    def test_wrong_shape(self, desk):
        with pytest.raises(StructuralError):
            assemble(desk, np.zeros((3, 3)))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_bernoulli_assembly_exactly_stationary(self, seed):
        chain = complete_bernoulli(random_spec(np.random.default_rng(seed)))
        assert np.abs(chain.pi @ chain.P - chain.pi).max() <= 1e-12
        assert np.abs(chain.P.sum(axis=1) - 1).max() <= 1e-12


def test_to_dict_round_trips_shape(desk_chain):
    d = desk_chain.to_dict()
    assert d["mode"] == "bernoulli"
    assert np.array(d["P"]).shape == (4, 4)
    assert d["visible"] == ["i1", "i2"]


def test_desk_spec_helper_matches_constants(desk):
    assert desk_spec().states == desk.states
