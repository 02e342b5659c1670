import numpy as np
import pytest

from wishfx.errors import DataError
from wishfx.linalg import (
    PsdMat,
    SymMat,
    accumulate_logdet,
    clamp_psd_batch,
    expm,
    logm_path,
    sqrtm_psd,
    sym_sqrt_batch,
)


def rk4_linear_flow(a, tau, n_steps):
    """Independent oracle: RK4 on dX = A X dt, X(0) = I."""
    d = a.shape[0]
    x = np.eye(d, dtype=complex)
    h = tau / n_steps
    for _ in range(n_steps):
        k1 = a @ x
        k2 = a @ (x + 0.5 * h * k1)
        k3 = a @ (x + 0.5 * h * k2)
        k4 = a @ (x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


class TestSymPsd:
    def test_symmetry_is_structural(self):
        a = SymMat([[1.0, 2.0], [2.0, 3.0]])
        full = a.full
        assert np.array_equal(full, full.T)

    def test_rejects_asymmetric(self):
        with pytest.raises(DataError):
            SymMat([[1.0, 2.0], [2.1, 3.0]])

    def test_psd_accepts_boundary(self):
        m = PsdMat.from_full([[1.0, 1.0], [1.0, 1.0]])  # rank one
        assert m.min_eig >= -1e-10

    def test_psd_rejects_indefinite(self):
        with pytest.raises(DataError):
            PsdMat.from_full([[1.0, 0.0], [0.0, -1e-6]])


class TestExpm:
    def test_zero(self):
        assert np.allclose(expm(np.zeros((2, 2))), np.eye(2), atol=1e-15)

    def test_diagonal(self):
        out = expm(np.diag([1.0, 2.0]))
        assert np.allclose(out, np.diag([np.e, np.e**2]), rtol=1e-14)

    def test_against_rk4_flow(self):
        rng = np.random.default_rng(7)
        a = 0.5 * rng.standard_normal((4, 4))
        oracle = rk4_linear_flow(a, 1.0, 40)
        assert np.abs(expm(a) - oracle).max() < 1e-8

    def test_inverse_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            a = rng.standard_normal((4, 4))
            a *= min(1.0, 10.0 / np.linalg.norm(a, 2))
            prod = expm(a) @ expm(-a)
            assert np.abs(prod - np.eye(4)).max() < 1e-10

    def test_commuting_sum(self):
        rng = np.random.default_rng(13)
        a = rng.standard_normal((3, 3))
        b = 0.3 * a @ a - 0.7 * a + 0.2 * np.eye(3)  # commutes with a
        lhs = expm(a + b)
        rhs = expm(a) @ expm(b)
        assert np.abs(lhs - rhs).max() < 1e-10

    def test_rejects_nonsquare(self):
        with pytest.raises(DataError):
            expm(np.zeros((2, 3)))


class TestSqrtmPsd:
    def test_identity(self):
        assert np.allclose(sqrtm_psd(np.eye(3)).full, np.eye(3), atol=1e-14)

    def test_diagonal(self):
        assert np.allclose(sqrtm_psd(np.diag([4.0, 9.0])).full, np.diag([2.0, 3.0]))

    def test_square_recovers_input(self, sigma0):
        s = sqrtm_psd(PsdMat.from_full(sigma0)).full
        assert np.abs(s @ s - sigma0).max() < 1e-12

    def test_output_symmetric_psd(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            g = rng.standard_normal((4, 4))
            a = g @ g.T
            s = sqrtm_psd(a)
            assert np.array_equal(s.full, s.full.T)
            assert np.linalg.eigvalsh(s.full)[0] >= -1e-12


class TestLogmPath:
    def test_identity_path(self):
        out = logm_path(lambda t: np.eye(2, dtype=complex), 3.0, 16)
        assert abs(np.trace(out)) < 1e-14

    def test_commuting_diagonal(self):
        d = np.diag([1.0 + 2.0j, -1.0])
        tau = 4.0
        out = logm_path(lambda t: expm(t * d), tau, 64)
        assert abs(np.trace(out) - 2.0j * tau) < 1e-10

    def test_winding_beyond_principal_branch(self):
        # det winds several times around the origin; the principal branch of
        # log det would be off by multiples of 2*pi*i.
        w = 5.0
        f = lambda t: np.diag([np.exp(1j * w * t), 1.0]).astype(complex)
        tau = 3.0
        out = logm_path(f, tau, 64)
        assert abs(np.trace(out) - 1j * w * tau) < 1e-10
        assert w * tau > np.pi  # sanity: outside the principal branch

    def test_exp_trace_matches_det(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        a *= 0.8
        f = lambda t: expm(t * a)
        tau = 2.5
        out = logm_path(f, tau, 64)
        det = np.linalg.det(f(tau))
        assert abs(np.exp(np.trace(out)) - det) / abs(det) < 1e-8

    def test_accumulate_flags_large_jumps(self):
        dets = np.exp(1j * np.linspace(0.0, 3.0, 4))  # per-step jump 1 rad
        logdet, max_jump = accumulate_logdet(dets)
        assert max_jump == pytest.approx(1.0, abs=1e-12)
        assert logdet == pytest.approx(3.0j, abs=1e-12)


class TestBatchedPsdOps:
    def test_sym_sqrt_batch_matches_scalar(self):
        rng = np.random.default_rng(17)
        g = rng.standard_normal((50, 2, 2))
        s = np.einsum("nij,nkj->nik", g, g)
        roots = sym_sqrt_batch(s)
        recon = np.einsum("nij,njk->nik", roots, roots)
        assert np.abs(recon - s).max() < 1e-10

    def test_sym_sqrt_batch_general_d(self):
        rng = np.random.default_rng(19)
        g = rng.standard_normal((20, 3, 3))
        s = np.einsum("nij,nkj->nik", g, g)
        roots = sym_sqrt_batch(s)
        recon = np.einsum("nij,njk->nik", roots, roots)
        assert np.abs(recon - s).max() < 1e-10

    def test_clamp_psd_batch(self):
        s = np.array(
            [
                [[1.0, 0.0], [0.0, 2.0]],
                [[1.0, 2.0], [2.0, 1.0]],  # eigenvalues 3, -1
            ]
        )
        out, n = clamp_psd_batch(s)
        assert n == 1
        assert np.array_equal(out[0], s[0])
        assert np.linalg.eigvalsh(out[1])[0] >= -1e-12
        # projection keeps the positive part
        assert np.linalg.eigvalsh(out[1])[1] == pytest.approx(3.0, abs=1e-12)
