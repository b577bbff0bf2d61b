"""Heaviside-ignition organizing center (zero activation energy).

With the ignition factor a unit step at u_ig, the reactant profile is known
in closed form on each side of the ignition point (placed at x = 0):

    z(x) = d0 exp(mu_+ x)            x < 0   (burning tail)
    z(x) = 1 - c0 exp(-s x / D) D/s  x > 0   (unreacted zone)

where mu_+ is the positive root of D mu^2 + s mu - k = 0 and (d0, c0) solve
the 2x2 matching system for continuity of z and z'.  The wave component u
then solves a scalar forced equation integrated out from u(0) = u_ig; as the
heat release approaches a distinguished q*, the trajectory stalls on a
"bench" at the weak-detonation height and the strong connection is lost.

Linearizing the step ignition produces a point mass at x = 0; its effect on
the eigenvalue system is the constant jump X(0-) = exp(-M0) X(0+), applied
here as a similarity gauge on the x > 0 coefficient so the standard
two-sided Evans machinery applies unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from . import model
from .errors import (
    FrontierNotBracketedError,
    InvalidParameterError,
    NumericalError,
)
from .model import ModelParams, burned_states, q_max, validate
from .profile import BENCH_MIN_LEN, find_bench
from .spectral import EvansSolver, SpectralSystem

__all__ = [
    "ZeroEaCoeffs",
    "ZeroEaProfile",
    "JumpMatrix",
    "zero_ea_coeffs",
    "reactant_profile",
    "u_equation_rhs",
    "solve_zero_ea_profile",
    "bench_frontier",
    "jump_matrix",
    "zero_ea_system",
    "zero_ea_evans",
    "matrix_unintegrated_heaviside",
]

SCHEMA_VERSION = 1

_S = 1.0  # wave speed after rescaling

ENDPOINT_TOL = 1e-3
ODE_RTOL = 1e-10
ODE_ATOL = 1e-12


@dataclass(frozen=True)
class ZeroEaCoeffs:
    """Closed-form constants of the step-ignition reactant profile."""

    s_tilde: float      # s / D
    mu_plus: float
    mu_minus: float
    c0: float
    d0: float
    x_ig: float = 0.0


def zero_ea_coeffs(p: ModelParams) -> ZeroEaCoeffs:
    """mu_+- from D mu^2 + s mu - k = 0 and the (d0, c0) matching solve."""
    if p.k <= 0 or p.D <= 0:
        raise InvalidParameterError("k and D must be positive")
    disc = math.sqrt(_S * _S + 4.0 * p.D * p.k)
    mu_p = (-_S + disc) / (2.0 * p.D)
    mu_m = (-_S - disc) / (2.0 * p.D)
    s_tilde = _S / p.D
    d0 = 1.0 / (1.0 + mu_p / s_tilde)
    c0 = mu_p * d0
    return ZeroEaCoeffs(s_tilde=s_tilde, mu_plus=mu_p, mu_minus=mu_m, c0=c0, d0=d0)


def reactant_profile(x, co: ZeroEaCoeffs):
    """(z, z') from the closed form; continuous with its derivative at 0."""
    x = np.asarray(x, dtype=float)
    z = np.where(x < 0.0,
                 co.d0 * np.exp(co.mu_plus * np.minimum(x, 0.0)),
                 1.0 - co.c0 * np.exp(-co.s_tilde * np.maximum(x, 0.0)) / co.s_tilde)
    zp = np.where(x < 0.0,
                  co.mu_plus * co.d0 * np.exp(co.mu_plus * np.minimum(x, 0.0)),
                  co.c0 * np.exp(-co.s_tilde * np.maximum(x, 0.0)))
    return z, zp


def u_equation_rhs(x, u, p: ModelParams, co: ZeroEaCoeffs, u_minus: float):
    """Forced scalar wave equation for u; the forcing is continuous at 0
    because d0 (s + D mu_+) = s."""
    base = (0.5 * u * u - _S * u) - (0.5 * u_minus * u_minus - _S * u_minus)
    if x < 0.0:
        force = -p.q * co.d0 * math.exp(co.mu_plus * x) * (_S + p.D * co.mu_plus)
    else:
        force = -p.q * _S
    return base + force


@dataclass
class ZeroEaProfile:
    """Discretized step-ignition wave with the analytic reactant branch."""

    params: ModelParams
    coeffs: ZeroEaCoeffs
    classification: str            # "connection" | "bench" | "no-connection"
    bench: bool
    bench_interval: tuple | None
    x_minus: float
    x_plus: float
    grid: np.ndarray
    values: np.ndarray             # (3, m): u, z, y = z'
    derivs: np.ndarray
    endpoint_error: float

    @property
    def u_minus(self) -> float:
        return burned_states(self.params).u_minus_strong

    def __call__(self, x):
        x = np.clip(x, self.grid[0], self.grid[-1])
        return CubicSpline(self.grid, self.values, axis=1)(x)

    def to_csv(self, path):
        header = "x,u,z,y,du,dz,dy"
        data = np.column_stack([self.grid, self.values.T, self.derivs.T])
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row in data:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    def meta_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "params": {k: getattr(self.params, k) for k in model.PARAM_KEYS},
            "domain": [self.x_minus, self.x_plus],
            "classification": self.classification,
            "bench": self.bench,
            "bench_interval": list(self.bench_interval) if self.bench_interval else None,
            "endpoint_error": self.endpoint_error,
            "analytic_z": True,
            "coeffs": {
                "s_tilde": self.coeffs.s_tilde,
                "mu_plus": self.coeffs.mu_plus,
                "mu_minus": self.coeffs.mu_minus,
                "c0": self.coeffs.c0,
                "d0": self.coeffs.d0,
            },
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.meta_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")


def solve_zero_ea_profile(p: ModelParams, *, span_back=400.0, span_fwd=200.0,
                          samples_per_unit=12.0) -> ZeroEaProfile:
    """Integrate the u equation out from u(0) = u_ig on both half-lines.

    Classifies the outcome: "connection" when both ends reach their rest
    states within tolerance, "bench" when the backward trajectory stalls at
    the weak-detonation height before escaping downward, "no-connection"
    otherwise.  The bench and no-connection outcomes raise NumericalError
    carrying the classified profile for diagnostics.
    """
    diag = validate(p)
    if not diag.ok:
        raise InvalidParameterError("; ".join(diag.issues))
    if p.ea != 0:
        raise InvalidParameterError(f"zero_ea solver requires ea = 0, got ea={p.ea}")
    co = zero_ea_coeffs(p)
    ends = burned_states(p)
    um, uw, up = ends.u_minus_strong, ends.u_minus_weak, p.u_plus

    # backward half: tau = -x increasing
    floor = min(uw, p.u_ig) - 0.05
    ceil = um + 1.0

    def back_rhs(tau, y):
        return [-u_equation_rhs(-tau, y[0], p, co, um)]

    def hit_floor(tau, y):
        return y[0] - floor

    hit_floor.terminal = True

    def hit_ceil(tau, y):
        return y[0] - ceil

    hit_ceil.terminal = True

    sol_b = solve_ivp(back_rhs, (0.0, span_back), [p.u_ig],
                      events=(hit_floor, hit_ceil), rtol=ODE_RTOL, atol=ODE_ATOL,
                      dense_output=True, max_step=1.0)
    if not sol_b.success:
        raise NumericalError(f"backward integration failed: {sol_b.message}")

    tau_end = sol_b.t[-1]
    ts = np.linspace(0.0, tau_end, max(64, int(tau_end * samples_per_unit)))
    ub = sol_b.sol(ts)[0]
    xs_b = -ts
    dub = np.array([u_equation_rhs(x, u, p, co, um) for x, u in zip(xs_b, ub)])
    bench_interval = find_bench(xs_b[::-1], ub[::-1], dub[::-1], uw)
    bench = bench_interval is not None

    terminated = len(sol_b.t_events[0]) > 0 or len(sol_b.t_events[1]) > 0
    back_err = abs(ub[-1] - um)
    if terminated or back_err > ENDPOINT_TOL:
        classification = "bench" if bench else "no-connection"
        prof = _assemble(p, co, classification, bench, bench_interval,
                         xs_b, ub, None, None, endpoint_error=float(back_err))
        raise _NoConnection(classification, prof)

    # trim the backward tail once both u and z are settled
    zb, _ = reactant_profile(xs_b, co)
    settled = (np.abs(ub - um) <= 0.5 * ENDPOINT_TOL) & (zb <= 0.5 * ENDPOINT_TOL)
    idx = np.nonzero(~settled)[0]
    keep = ts <= (ts[idx.max()] + 5.0 if idx.size else ts[-1])
    ts_keep = ts[keep]
    if ts_keep[-1] < ts[-1]:
        ub = sol_b.sol(ts_keep)[0]
        xs_b = -ts_keep

    # forward half: monotone decay to the unburned state
    def fwd_rhs(x, y):
        return [u_equation_rhs(x, y[0], p, co, um)]

    def arrived(x, y):
        return y[0] - (up + 0.25 * ENDPOINT_TOL)

    arrived.terminal = True
    arrived.direction = -1

    sol_f = solve_ivp(fwd_rhs, (0.0, span_fwd), [p.u_ig], events=(arrived,),
                      rtol=ODE_RTOL, atol=ODE_ATOL, dense_output=True, max_step=1.0)
    if not sol_f.success:
        raise NumericalError(f"forward integration failed: {sol_f.message}")
    x_f_end = max(sol_f.t[-1], 8.0 * p.D / _S)   # let z settle too
    x_f_end = min(x_f_end, span_fwd)
    xs_f = np.linspace(0.0, x_f_end, max(64, int(x_f_end * samples_per_unit)))
    uf = sol_f.sol(np.minimum(xs_f, sol_f.t[-1]))[0]
    fwd_err = abs(uf[-1] - up)

    prof = _assemble(p, co, "connection", bench, bench_interval,
                     xs_b, ub, xs_f, uf,
                     endpoint_error=float(max(back_err, fwd_err)))
    if prof.endpoint_error > ENDPOINT_TOL:
        raise _NoConnection("no-connection", prof)
    return prof


class _NoConnection(NumericalError):
    """Carries the classified partial profile."""

    def __init__(self, classification, profile):
        super().__init__(f"zero-ea profile: {classification} at q={profile.params.q}")
        self.classification = classification
        self.profile = profile


def _assemble(p, co, classification, bench, bench_interval, xs_b, ub, xs_f, uf,
              endpoint_error):
    if xs_f is None:
        grid = xs_b[::-1].copy()
        u = ub[::-1].copy()
    else:
        grid = np.concatenate([xs_b[::-1], xs_f[1:]])
        u = np.concatenate([ub[::-1], uf[1:]])
    keep = np.concatenate([[True], np.diff(grid) > 0])
    grid, u = grid[keep], u[keep]
    z, zp = reactant_profile(grid, co)
    um = burned_states(p).u_minus_strong
    du = np.array([u_equation_rhs(x, uu, p, co, um) for x, uu in zip(grid, u)])
    # z'' from D z'' + s z' - k H z = 0
    H = (grid < 0.0).astype(float)
    dzp = (p.k * H * z - _S * zp) / p.D
    values = np.vstack([u, z, zp])
    derivs = np.vstack([du, zp, dzp])
    return ZeroEaProfile(
        params=p,
        coeffs=co,
        classification=classification,
        bench=bench,
        bench_interval=bench_interval,
        x_minus=float(grid[0]),
        x_plus=float(grid[-1]),
        grid=grid,
        values=values,
        derivs=derivs,
        endpoint_error=endpoint_error,
    )


def bench_frontier(p: ModelParams, *, q_tol=1e-6, q_lo=None, q_hi=None) -> float:
    """Largest heat release admitting a strong connection, by bisection.

    Below the frontier the backward trajectory clears the weak-detonation
    height; above it the trajectory stalls (bench) or escapes downward.
    """
    if p.ea != 0:
        raise InvalidParameterError("bench_frontier requires ea = 0")
    qm = q_max(p.u_plus)
    lo = q_lo if q_lo is not None else min(0.01, 0.5 * qm)
    hi = q_hi if q_hi is not None else qm * (1.0 - 1e-9)

    def connects(q):
        try:
            solve_zero_ea_profile(ModelParams(q=q, k=p.k, D=p.D, ea=0.0,
                                              u_plus=p.u_plus, u_ig=p.u_ig))
            return True
        except _NoConnection:
            return False

    if not connects(lo):
        raise FrontierNotBracketedError(f"no connection at q={lo}: cannot bracket the frontier")
    if connects(hi):
        raise FrontierNotBracketedError(f"connection persists at q={hi}: cannot bracket the frontier")
    while hi - lo > q_tol:
        mid = 0.5 * (lo + hi)
        if connects(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class JumpMatrix:
    """Point-mass coupling at the ignition point and its exponentials.

    M0 has the single entry (z'' row, u column) k z(0) / (D |u'(0)|); the
    1/|u'(0)| factor converts the step-linearization delta in u to a delta
    in x.  M0 is nilpotent, so exp(-M0) = I - M0 exactly.
    """

    M0: np.ndarray
    expNegM0: np.ndarray
    expM0: np.ndarray


def jump_matrix(prof: ZeroEaProfile) -> JumpMatrix:
    p = prof.params
    co = prof.coeffs
    z0 = float(reactant_profile(0.0, co)[0])
    du0 = u_equation_rhs(0.0, p.u_ig, p, co, prof.u_minus)
    if abs(du0) < 1e-12:
        raise NumericalError("u'(0) = 0: point-mass weight undefined")
    kappa = p.k * z0 / (p.D * abs(du0))
    M0 = np.zeros((4, 4))
    M0[3, 0] = kappa
    return JumpMatrix(M0=M0, expNegM0=np.eye(4) - M0, expM0=np.eye(4) + M0)


def zero_ea_system(prof: ZeroEaProfile, *, gauge: bool = True) -> SpectralSystem:
    """Spectral system for the step-ignition wave.

    gauge=True applies the exp(-M0) similarity on x > 0 so the point mass is
    absorbed into the coefficients; gauge=False leaves the plain piecewise
    system (callers must then apply the left-state map at matching).
    """
    p = prof.params
    spl = CubicSpline(prof.grid, prof.values[:2], axis=1)
    J = jump_matrix(prof)
    jump = J.expNegM0.astype(complex) if gauge else np.eye(4, dtype=complex)
    jump_inv = J.expM0.astype(complex) if gauge else np.eye(4, dtype=complex)
    return SpectralSystem(
        params=p,
        kind=1,
        x_minus=prof.x_minus,
        x_plus=prof.x_plus,
        bx=np.ascontiguousarray(spl.x),
        bc=np.ascontiguousarray(spl.c),
        par=np.array([p.q, p.k, p.D, 0.0, p.u_ig]),
        jump=jump,
        jump_inv=jump_inv,
        phi_minus=1.0,
    )


def zero_ea_evans(lam, prof: ZeroEaProfile, solver: EvansSolver | None = None,
                  frames=None):
    """Evans value for the step-ignition wave (gauge convention)."""
    if prof.classification != "connection":
        raise NumericalError("Evans evaluation requires a connected profile")
    if solver is None:
        solver = EvansSolver(zero_ea_system(prof))
    return solver.evans(lam, frames=frames)


def matrix_unintegrated_heaviside(x, lam, prof: ZeroEaProfile):
    """Unintegrated coefficient on the open half-lines (no point mass).

    On x > 0 the system decouples into pure wave and reaction blocks in the
    (u, u', z, z') ordering.
    """
    p = prof.params
    u = float(prof(x)[0])
    H = 1.0 if x < 0.0 else 0.0
    ux = u_equation_rhs(x, u, p, prof.coeffs, prof.u_minus)
    B = np.zeros((4, 4), dtype=complex)
    B[0, 2] = 1.0
    B[1, 3] = 1.0
    B[2, 0] = lam + ux
    B[2, 1] = -p.q * p.k * H
    B[2, 2] = u - 1.0
    B[3, 1] = (lam + p.k * H) / p.D
    B[3, 3] = -1.0 / p.D
    return B
