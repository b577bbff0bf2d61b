import cmath
import math

import numpy as np
import pytest

from detstab.model import ModelParams, burned_states, ignition
from detstab.profile import solve_profile, tw_rhs
from detstab.spectral import (
    EvansSolver,
    SpectralSystem,
    canonical_frame,
    hf_bound,
    kato_frames,
    limit_matrix,
    matrix_integrated,
    matrix_unintegrated,
    spectral_projector,
    splitting_counts,
    transport_frame,
)
from detstab import _polar


def params(**kw):
    base = dict(q=0.2, k=1.0, D=1.0, ea=1.0, u_plus=0.0, u_ig=0.1)
    base.update(kw)
    return ModelParams(**base)


@pytest.fixture(scope="module")
def prof():
    return solve_profile(params())


@pytest.fixture(scope="module")
def system(prof):
    return SpectralSystem.from_profile(prof)


class TestMatrices:
    def test_integrated_row2(self, prof):
        for x, lam in ((0.0, 0.3 + 1j), (-4.0, 2.0), (11.0, 0.0)):
            B = matrix_integrated(x, lam, prof)
            assert np.allclose(B[1], [1.0, 0.0, prof.params.q, 0.0])

    def test_affine_in_lambda(self, prof):
        lam = 0.7 + 0.3j
        B = matrix_integrated(1.3, lam, prof)
        B0 = matrix_integrated(1.3, 0.0, prof)
        dB = B - B0
        expect = np.zeros((4, 4), dtype=complex)
        expect[0, 1] = lam
        expect[3, 2] = lam / prof.params.D
        assert np.allclose(dB, expect, atol=1e-15)

    def test_unintegrated_lambda_entries(self, prof):
        lam = 1.1 - 0.4j
        dA = matrix_unintegrated(0.5, lam, prof) - matrix_unintegrated(0.5, 0.0, prof)
        nz = [(i, j) for i in range(4) for j in range(4) if abs(dA[i, j]) > 0]
        assert nz == [(2, 0), (3, 1)]
        assert dA[2, 0] == pytest.approx(lam)
        assert dA[3, 1] == pytest.approx(lam / prof.params.D)

    def test_unintegrated_entry_at_ignition_point(self, prof):
        # the ignition cutoff kills the phi' term at x = 0 where u = u_ig
        lam = 0.9 + 0.2j
        B = matrix_unintegrated(0.0, lam, prof)
        ux = float(tw_rhs(prof(0.0), prof.params)[0])
        assert B[2, 0] == pytest.approx(lam + ux, abs=1e-12)

    def test_plus_limit_z_block(self, prof):
        A = limit_matrix(0.0, prof.params, "plus", integrated=False)
        zblock = A[np.ix_([1, 3], [1, 3])]
        eig = sorted(np.linalg.eigvals(zblock).real)
        assert eig == pytest.approx([-1.0 / prof.params.D, 0.0])

    def test_minus_limit_block_triangular(self, prof):
        B = limit_matrix(0.7 + 0.1j, prof.params, "minus")
        assert np.allclose(B[2:, :2], 0.0)
        assert B[3, 2] == pytest.approx(
            (0.7 + 0.1j + prof.params.k * ignition(burned_states(prof.params).u_minus_strong, prof.params))
            / prof.params.D)

    def test_conjugation_symmetry(self, prof):
        lam = 0.8 + 1.7j
        for x in (-3.0, 0.0, 5.0):
            B = matrix_integrated(x, lam, prof)
            Bc = matrix_integrated(x, np.conj(lam), prof)
            assert np.allclose(Bc, np.conj(B))

    def test_exponential_approach_to_limits(self, prof):
        lam = 1.0 + 0.5j
        theta = min(prof.decay_rate_minus, prof.decay_rate_plus)
        for x, side in ((prof.x_minus * 0.8, "minus"), (prof.x_plus * 0.8, "plus")):
            dev = np.abs(matrix_integrated(x, lam, prof)
                         - limit_matrix(lam, prof.params, side)).max()
            assert dev <= 50.0 * math.exp(-theta * abs(x) * 0.9)

    def test_reference_coef_matches_jit(self, system, prof):
        rng = np.random.default_rng(3)
        for _ in range(10):
            x = rng.uniform(prof.x_minus, prof.x_plus)
            lam = complex(rng.uniform(-1, 4), rng.uniform(-4, 4))
            out = np.zeros((4, 4), dtype=complex)
            _polar._coef.py_func(x, lam, system.kind, system.par, system.bx,
                                 system.bc, system.jump, system.jump_inv, out)
            jit_out = np.zeros((4, 4), dtype=complex)
            _polar._coef(x, lam, system.kind, system.par, system.bx,
                         system.bc, system.jump, system.jump_inv, jit_out)
            assert np.array_equal(out, jit_out)


class TestHighFreqBound:
    def test_moderate_parameters_give_radius_4(self, prof):
        hb = hf_bound(prof)
        assert hb.R == 4.0
        assert hb.L <= 4.0 / prof.params.ea * math.exp(-2.0)
        assert hb.M <= 6.0 / prof.params.ea * math.exp(-2.0)

    def test_bound_formula(self, prof):
        hb = hf_bound(prof)
        p = prof.params
        expect = max(4.0, 1.0 / (4 * p.D)
                     + (0.25 + 0.5 * abs(p.D - 1.0) ** 2) * p.k * hb.L + p.k * hb.M)
        assert hb.R == pytest.approx(expect)

    def test_grid_supremum_is_attained_value(self, prof):
        from detstab.model import ignition_deriv
        hb = hf_bound(prof)
        xs = np.linspace(prof.x_minus, prof.x_plus, 200001)
        u, z, _ = prof(xs)
        dense_L = float((ignition_deriv(u, prof.params) * z).max())
        assert hb.L >= dense_L - 1e-6

    @pytest.mark.slow
    def test_small_d_bound_exceeds_4(self):
        sols = solve_profile(params(D=0.0625, q=0.2))
        hb = hf_bound(sols)
        assert 4.0 < hb.R < 6.0


class TestSplittingAndFrames:
    def test_consistent_splitting_grid(self, system):
        rng = np.random.default_rng(0)
        lams = [complex(r, i) for r, i in zip(rng.uniform(0.01, 4, 12), rng.uniform(-4, 4, 12))]
        lams += [0.0, 4j, -4j, 4.0]
        for lam in lams:
            assert splitting_counts(lam, system) == (2, 2)

    def test_projector_idempotent(self, system):
        for side in ("minus", "plus"):
            P, Q1, gap = spectral_projector(system.limit(1.2 + 0.8j, side), side)
            assert np.linalg.norm(P @ P - P) < 1e-12
            assert gap > 1e-6
            assert np.linalg.norm(P @ Q1 - Q1) < 1e-12

    def test_single_node_frames_are_canonical(self, system):
        fr = kato_frames([0.5], system)
        assert np.allclose(fr.minus[0], canonical_frame(system.limit(0.5, "minus"), "minus"))
        assert np.allclose(fr.plus[0], canonical_frame(system.limit(0.5, "plus"), "plus"))

    def test_closed_loop_monodromy(self, system):
        loop = [2.0 + 0.1 * cmath.exp(2j * math.pi * t / 12) for t in range(13)]
        F0 = canonical_frame(system.limit(loop[0], "minus"), "minus")
        F = F0.copy()
        for a, b in zip(loop[:-1], loop[1:]):
            F = transport_frame(system, "minus", a, F, b)
        assert np.abs(F - F0).max() < 1e-6

    def test_reverse_traversal_agrees(self, system):
        # same endpoints, complementary arcs of a closed loop: transport is
        # path-independent away from splitting degeneracies
        path = np.array([0.0, 0.5j, 1.0j, 1.0 + 1.0j, 2.0 + 0.5j, 2.0])
        fwd = kato_frames(path, system)
        rev = kato_frames(np.conj(path), system)
        assert np.abs(rev.minus[-1] - fwd.minus[-1]).max() < 1e-6
        assert np.abs(rev.plus[-1] - fwd.plus[-1]).max() < 1e-6

    def test_conjugate_node_frames(self, system):
        lam = 1.3 + 0.9j
        Fm = canonical_frame(system.limit(lam, "minus"), "minus")
        Fmc = canonical_frame(system.limit(np.conj(lam), "minus"), "minus")
        assert np.abs(Fmc - np.conj(Fm)).max() < 1e-10

    def test_projector_residual_along_path(self, system):
        path = np.array([0.0, 0.2j, 0.5j, 1j, 1 + 1j, 2 + 0.5j, 3.0, 4.0])
        fr = kato_frames(path, system)
        assert fr.proj_residual <= 1e-8


class TestEvans:
    def test_conjugate_symmetry(self, system):
        for lam in (1 + 1j, 0.3 + 2.5j, 2.0 - 0.7j):
            va = EvansSolver(system).evans(lam)
            vb = EvansSolver(system).evans(np.conj(lam))
            assert abs(vb.E - np.conj(va.E)) / abs(va.E) < 1e-6
            assert vb.ledger == pytest.approx(va.ledger, rel=1e-9)

    def test_nonvanishing_at_origin(self, system):
        v = EvansSolver(system).evans(0.0)
        assert abs(v.E) > 1e-8
        assert abs(v.E.imag) < 1e-10 * abs(v.E)   # real at real lam

    def test_frame_orthonormal_at_matching(self, system):
        Qm = canonical_frame(system.limit(1.0, "minus"), "minus")
        om, g, status, _ = _polar.polar_transit(
            system.x_minus, 0.0, 1.0 + 0.0j, np.ascontiguousarray(Qm),
            1e-6, 1e-8, system.kind, system.par, system.bx, system.bc,
            system.jump, system.jump_inv)
        assert status == _polar.OK
        gram = om.conj().T @ om
        assert np.abs(gram - np.eye(2)).max() < 1e-8

    def test_resolve_stability_under_refinement(self, prof, system):
        # re-solving the wave at a tighter collocation tolerance moves the
        # Evans values by less than the contracted 1e-4 relative
        tight = solve_profile(prof.params, guess=prof, residual_tol=1e-9,
                              domain=(prof.x_minus, prof.x_plus))
        sys2 = SpectralSystem.from_profile(tight)
        for lam in (0.0, 1.0, 0.05 + 3.9j):
            v1 = EvansSolver(system).evans(lam)
            v2 = EvansSolver(sys2).evans(lam)
            full1 = cmath.log(v1.E) + v1.ledger
            full2 = cmath.log(v2.E) + v2.ledger
            assert abs(cmath.exp(full2 - full1) - 1.0) < 1e-4
