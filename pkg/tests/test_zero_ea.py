import cmath
import math

import numpy as np
import pytest

from detstab.errors import InvalidParameterError
from detstab.model import ModelParams, burned_states
from detstab.profile import solve_profile
from detstab.spectral import EvansSolver, canonical_frame
from detstab.winding import build_contour, winding_number
from detstab.zero_ea import (
    _NoConnection,
    bench_frontier,
    jump_matrix,
    matrix_unintegrated_heaviside,
    reactant_profile,
    solve_zero_ea_profile,
    u_equation_rhs,
    zero_ea_coeffs,
    zero_ea_system,
)

# frozen from an independent shooting computation: the unique bounded
# solution off the weak state, root-solved for u(0) = u_ig (brentq to 1e-12)
Q_STAR_SHOOTING = 0.226135214


def params(**kw):
    base = dict(q=0.1, k=1.0, D=1.0, ea=0.0, u_plus=0.0, u_ig=0.1)
    base.update(kw)
    return ModelParams(**base)


class TestCoeffs:
    def test_golden_ratio_case(self):
        co = zero_ea_coeffs(params())
        golden = (math.sqrt(5.0) - 1.0) / 2.0
        assert co.mu_plus == pytest.approx(golden, abs=1e-15)
        assert co.d0 == pytest.approx(golden, abs=1e-15)
        assert co.c0 == pytest.approx(1.0 - golden, abs=1e-15)

    def test_forcing_continuity_identity(self):
        for k, D in ((1.0, 1.0), (0.5, 2.0), (4.0, 0.0625)):
            co = zero_ea_coeffs(params(k=k, D=D))
            assert abs(co.d0 * (1.0 + D * co.mu_plus) - 1.0) < 1e-12
            assert abs(co.d0 * (1.0 + co.mu_plus / co.s_tilde) - 1.0) < 1e-12

    def test_root_signs(self):
        co = zero_ea_coeffs(params(k=2.0, D=0.25))
        assert co.mu_plus > 0 > co.mu_minus

    def test_small_rate_limit(self):
        co = zero_ea_coeffs(params(k=1e-8))
        assert co.mu_plus == pytest.approx(1e-8, rel=1e-4)
        assert co.d0 == pytest.approx(1.0, abs=1e-7)
        assert co.c0 == pytest.approx(0.0, abs=1e-7)

    def test_matching_system_solution(self):
        co = zero_ea_coeffs(params(k=0.7, D=1.3))
        A = np.array([[1.0, 1.0 / co.s_tilde], [co.mu_plus, -1.0]])
        det = np.linalg.det(A)
        assert abs(det - (-1.0 - co.mu_plus / co.s_tilde)) < 1e-14
        d0, c0 = np.linalg.solve(A, [1.0, 0.0])
        assert d0 == pytest.approx(co.d0, abs=1e-14)
        assert c0 == pytest.approx(co.c0, abs=1e-14)


class TestReactantProfile:
    def test_continuity_at_ignition_point(self):
        co = zero_ea_coeffs(params(k=0.8, D=1.7))
        zl, zpl = reactant_profile(-1e-12, co)
        zr, zpr = reactant_profile(1e-12, co)
        assert zl == pytest.approx(zr, abs=1e-11)
        assert zpl == pytest.approx(zpr, abs=1e-11)

    def test_limits(self):
        co = zero_ea_coeffs(params())
        z, _ = reactant_profile(np.array([-40.0, 40.0]), co)
        assert z[0] == pytest.approx(0.0, abs=1e-10)
        assert z[1] == pytest.approx(1.0, abs=1e-10)

    def test_strictly_below_one_in_unreacted_zone(self):
        co = zero_ea_coeffs(params())
        assert co.c0 > 0
        x = np.linspace(0.0, 30.0, 1000)
        z, _ = reactant_profile(x, co)
        assert (z < 1.0).all()


class TestForcingContinuity:
    def test_left_right_limits(self):
        p = params(q=0.22, k=0.9, D=1.4)
        co = zero_ea_coeffs(p)
        um = burned_states(p).u_minus_strong
        left = u_equation_rhs(-1e-13, 0.37, p, co, um)
        right = u_equation_rhs(1e-13, 0.37, p, co, um)
        assert abs(left - right) < 1e-12


class TestProfiles:
    def test_strong_connection(self):
        prof = solve_zero_ea_profile(params(q=0.1))
        assert prof.classification == "connection"
        assert prof.endpoint_error <= 1e-3
        assert prof.values[0][0] == pytest.approx(prof.u_minus, abs=1e-3)
        assert float(prof(0.0)[0]) == pytest.approx(0.1, abs=1e-8)

    def test_u_smooth_at_ignition_point(self):
        # a kink at the ignition point would make the one-sided slopes split
        # from the stored derivative by O(1); centered differences across 0
        # agree to discretization accuracy
        prof = solve_zero_ea_profile(params(q=0.2))
        i = int(np.searchsorted(prof.grid, 0.0))
        x, u, du = prof.grid, prof.values[0], prof.derivs[0]
        fd = (u[i + 1] - u[i - 1]) / (x[i + 1] - x[i - 1])
        assert fd == pytest.approx(du[i], abs=5e-3)

    def test_bench_at_figure_value(self):
        prof = solve_zero_ea_profile(params(q=0.226125505))
        assert prof.classification == "connection"
        assert prof.bench
        lo, hi = prof.bench_interval
        assert hi - lo >= 5.0

    def test_onset_below_frontier(self):
        prof = solve_zero_ea_profile(params(q=0.2))
        assert prof.classification == "connection"
        assert not prof.bench

    def test_no_connection_above_frontier(self):
        with pytest.raises(_NoConnection) as exc:
            solve_zero_ea_profile(params(q=0.24))
        assert exc.value.classification in ("bench", "no-connection")

    def test_requires_zero_ea(self):
        with pytest.raises(InvalidParameterError):
            solve_zero_ea_profile(params(ea=1.0))

    def test_monotone_classification_near_frontier(self):
        # single transition: connections below q*, none above
        qs = np.linspace(0.22, 0.232, 13)
        outcomes = []
        for q in qs:
            try:
                solve_zero_ea_profile(params(q=float(q)))
                outcomes.append(True)
            except _NoConnection:
                outcomes.append(False)
        flips = sum(1 for a, b in zip(outcomes[:-1], outcomes[1:]) if a != b)
        assert flips == 1 and outcomes[0] and not outcomes[-1]


class TestFrontier:
    @pytest.mark.slow
    def test_frontier_matches_shooting_oracle(self):
        qstar = bench_frontier(params())
        assert qstar == pytest.approx(Q_STAR_SHOOTING, abs=2e-6)

    @pytest.mark.slow
    def test_below_frontier_always_connects(self):
        qstar = bench_frontier(params())
        for q in (0.5 * qstar, 0.9 * qstar, qstar - 1e-4):
            prof = solve_zero_ea_profile(params(q=q))
            assert prof.classification == "connection"


class TestJump:
    def test_exponential_inverse_pair(self):
        prof = solve_zero_ea_profile(params())
        J = jump_matrix(prof)
        assert np.abs(J.expNegM0 @ J.expM0 - np.eye(4)).max() < 1e-12

    def test_single_coupling_entry(self):
        prof = solve_zero_ea_profile(params())
        J = jump_matrix(prof)
        mask = np.zeros((4, 4), dtype=bool)
        mask[3, 0] = True
        assert (J.M0[~mask] == 0.0).all()
        assert J.M0[3, 0] > 0.0

    def test_unintegrated_right_half_decouples(self):
        prof = solve_zero_ea_profile(params())
        A = matrix_unintegrated_heaviside(2.5, 0.7 + 0.3j, prof)
        # (u, u') block and (z, z') block uncoupled for x > 0
        assert A[2, 1] == 0.0 and A[2, 3] == 0.0
        assert A[3, 0] == 0.0 and A[3, 2] == 0.0
        left = matrix_unintegrated_heaviside(-2.5, 0.7 + 0.3j, prof)
        assert left[2, 1] != 0.0


@pytest.fixture(scope="module")
def connected_profile():
    return solve_zero_ea_profile(params())


class TestZeroEaEvans:
    @pytest.fixture()
    def prof(self, connected_profile):
        return connected_profile

    def test_conjugate_symmetry(self, prof):
        sys = zero_ea_system(prof)
        va = EvansSolver(sys).evans(1 + 1j)
        vb = EvansSolver(sys).evans(1 - 1j)
        assert abs(vb.E - np.conj(va.E)) / abs(va.E) < 1e-6

    def test_nonvanishing_at_origin(self, prof):
        v = EvansSolver(zero_ea_system(prof)).evans(0.0)
        assert abs(v.E) > 1e-8

    @pytest.mark.slow
    def test_radius_10_winding_zero(self, prof):
        sys = zero_ea_system(prof)
        ev = EvansSolver(sys)
        c = build_contour(10.0, 60)
        tr = ev.trace(c)
        res = winding_number(tr, refine=ev.refiner(c))
        assert res.winding == 0 and res.certified

    def test_jump_convention_consistency(self, prof):
        # gauge transform on x > 0 versus explicit left-state map at 0
        J = jump_matrix(prof)
        sys_gauge = zero_ea_system(prof, gauge=True)
        sys_plain = zero_ea_system(prof, gauge=False)
        lam = 0.7 + 0.4j
        Fm = canonical_frame(sys_plain.limit(lam, "minus"), "minus")
        Fp = canonical_frame(sys_plain.limit(lam, "plus"), "plus")
        T = J.expNegM0.astype(complex)
        v1 = EvansSolver(sys_gauge, rtol=1e-11, atol=1e-13).evans(lam, frames=(Fm, T @ Fp))
        v2 = EvansSolver(sys_plain, rtol=1e-11, atol=1e-13,
                         match_transform=T).evans(lam, frames=(Fm, Fp))
        E1 = cmath.exp(cmath.log(v1.E) + v1.ledger)
        E2 = cmath.exp(cmath.log(v2.E) + v2.ledger)
        assert abs(E1 - E2) / abs(E1) < 1e-8


@pytest.mark.slow
def test_smooth_profiles_converge_to_heaviside_limit():
    p0 = params(q=0.05)
    prof0 = solve_zero_ea_profile(p0)
    xs = np.linspace(-12.0, 6.0, 400)
    u0 = prof0(xs)[0]
    sup = []
    for ea in (0.05, 0.01):
        prof = solve_profile(ModelParams(q=0.05, k=1.0, D=1.0, ea=ea,
                                         u_plus=0.0, u_ig=0.1))
        sup.append(np.abs(prof(xs)[0] - u0).max())
    assert sup[1] < sup[0]
    assert sup[1] < 0.05
