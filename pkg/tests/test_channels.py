"""Tests for superoperator primitives."""

from __future__ import annotations

import numpy as np
import pytest

from xtalk.channels import (
    apply_superop,
    choi_matrix,
    depolarizing_superop,
    min_choi_eigenvalue,
    outcome_probabilities,
    tp_residual,
    unitary_from_hamiltonian,
    unitary_superop,
    zero_state_vec,
)
from xtalk.design import default_registry

ATOL = 1e-10


def random_density_matrix(dim, rng):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


class TestUnitarySuperop:
    def test_matches_conjugation(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            h = h + h.conj().T
            u = unitary_from_hamiltonian(h)
            rho = random_density_matrix(2, rng)
            direct = u @ rho @ u.conj().T
            via_sop = (unitary_superop(u) @ rho.reshape(-1)).reshape(2, 2)
            assert np.max(np.abs(direct - via_sop)) < ATOL

    def test_registry_gates_are_tp_and_cp(self):
        reg = default_registry()
        for size in (1, 2):
            for name in reg.names_for_size(size):
                sop = unitary_superop(reg.unitary(name))
                assert tp_residual(sop) < ATOL
                assert min_choi_eigenvalue(sop) > -ATOL


class TestUnitaryFromHamiltonian:
    def test_matches_expm_oracle(self):
        from scipy.linalg import expm

        rng = np.random.default_rng(1)
        for _ in range(10):
            h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            h = h + h.conj().T
            assert np.max(np.abs(unitary_from_hamiltonian(h) - expm(-1j * h))) < 1e-9


class TestDepolarizing:
    @pytest.mark.parametrize("p", [0.0, 0.1, 0.5, 1.0])
    def test_tp_and_cp(self, p):
        sop = depolarizing_superop(p)
        assert tp_residual(sop) < ATOL
        assert min_choi_eigenvalue(sop) > -ATOL

    def test_action(self):
        rng = np.random.default_rng(2)
        rho = random_density_matrix(2, rng)
        p = 0.3
        out = (depolarizing_superop(p) @ rho.reshape(-1)).reshape(2, 2)
        want = (1 - p) * rho + p * np.eye(2) / 2
        assert np.max(np.abs(out - want)) < ATOL

    def test_maximally_mixed_is_fixed_point(self):
        mixed = (np.eye(2) / 2).reshape(-1)
        for p in (0.0, 0.25, 1.0):
            out = depolarizing_superop(p) @ mixed
            assert np.max(np.abs(out - mixed)) == 0.0

    def test_choi_eigenvalues_known(self):
        # Kraus form sqrt(1-3p/4) I, sqrt(p/4) {X,Y,Z} gives unnormalized
        # Choi spectrum {2-3p/2, p/2, p/2, p/2}
        p = 0.2
        eig = np.linalg.eigvalsh(choi_matrix(depolarizing_superop(p)))
        assert np.allclose(sorted(eig), [0.1, 0.1, 0.1, 1.7], atol=1e-12)

    def test_rate_out_of_range(self):
        with pytest.raises(ValueError):
            depolarizing_superop(1.2)


class TestApplySuperop:
    def test_single_qubit_factor_embedding(self):
        rng = np.random.default_rng(3)
        n = 3
        u = unitary_from_hamiltonian(rng.normal(size=(2, 2)) + np.eye(2))
        sop = unitary_superop(u)
        rho = random_density_matrix(8, rng)
        state = rho.reshape((2,) * (2 * n))
        got = apply_superop(state, sop, (1,), n).reshape(8, 8)
        full_u = np.kron(np.kron(np.eye(2), u), np.eye(2))
        want = full_u @ rho @ full_u.conj().T
        assert np.max(np.abs(got - want)) < ATOL

    def test_two_qubit_factor_on_noncontiguous_qubits(self):
        rng = np.random.default_rng(4)
        n = 3
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        u = unitary_from_hamiltonian(h + h.conj().T)
        sop = unitary_superop(u)
        rho = random_density_matrix(8, rng)
        got = apply_superop(rho.reshape((2,) * 6), sop, (0, 2), n).reshape(8, 8)

        # oracle: permute qubit order to (0,2,1), apply kron(U, I), permute back
        perm = [0, 2, 1]
        p_mat = np.zeros((8, 8))
        for idx in range(8):
            bits = [(idx >> (2 - q)) & 1 for q in range(3)]
            new_bits = [bits[perm[i]] for i in range(3)]
            new_idx = (new_bits[0] << 2) | (new_bits[1] << 1) | new_bits[2]
            p_mat[new_idx, idx] = 1.0
        big_u = p_mat.T @ np.kron(u, np.eye(2)) @ p_mat
        want = big_u @ rho @ big_u.conj().T
        assert np.max(np.abs(got - want)) < ATOL

    def test_qubit_order_in_factor_matters_consistently(self):
        rng = np.random.default_rng(5)
        n = 2
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        u = unitary_from_hamiltonian(h + h.conj().T)
        sop = unitary_superop(u)
        rho = random_density_matrix(4, rng)
        a = apply_superop(rho.reshape((2,) * 4), sop, (0, 1), n).reshape(4, 4)
        swap = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=float)
        u_swapped = swap @ u @ swap
        b = apply_superop(rho.reshape((2,) * 4), unitary_superop(u_swapped), (1, 0), n).reshape(4, 4)
        assert np.max(np.abs(a - b)) < ATOL


class TestStateHelpers:
    def test_zero_state_probabilities(self):
        state = zero_state_vec(3)
        probs = outcome_probabilities(state, 3)
        want = np.zeros(8)
        want[0] = 1.0
        assert np.allclose(probs, want)

    def test_tp_residual_flags_non_tp(self):
        sop = 0.9 * np.eye(4)
        assert tp_residual(sop) > 0.09
