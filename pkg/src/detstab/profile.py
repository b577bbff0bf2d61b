"""Traveling-wave connection solver.

The wave profile (u, z, y = z') solves the first-order system

    u' = f(u) - f(u-) - (u - u-) - q (z + D y)
    z' = y
    y' = (-y + k phi(u) z) / D

connecting (u-, 0, 0) at -inf to (u+, 1, 0) at +inf.  The whole-line problem
is truncated to [x_minus, x_plus], closed with projective boundary conditions
built from the end-state linearizations, and pinned by the phase condition
u(0) = u_ig (the ignition point sits at the origin).

The truncated problem is posed as a single two-point BVP by folding both
half-lines onto t in [0, 1] and stacking the two copies of the state; the
interface conditions at t corresponding to x = 0 carry the continuity and
phase constraints.  The collocation engine is scipy's solve_bvp (3-stage
Lobatto IIIA elements, adaptive residual-driven mesh, damped Newton) driven
with analytic Jacobians.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_bvp
from scipy.interpolate import CubicSpline

from . import model
from .errors import (
    DegenerateLinearizationError,
    InvalidParameterError,
    NoProfileError,
    NumericalError,
    SlowDecayError,
)
from .model import ModelParams, burned_states, flux, ignition, ignition_deriv, validate

__all__ = [
    "EndLinearization",
    "ProfileSolution",
    "ContinuationFrontierError",
    "tw_rhs",
    "tw_jac",
    "end_linearizations",
    "analytic_seed",
    "solve_profile",
    "continue_profiles",
    "find_bench",
]

SCHEMA_VERSION = 1

# bench diagnostic thresholds: a stretch of u this close to the
# weak-detonation height, with slope no larger than the passage dynamics
# allow inside that tube, and at least this long flags a bench
BENCH_HEIGHT_TOL = 1e-2
BENCH_SLOPE_TOL = 1e-2
BENCH_MIN_LEN = 5.0

DOMAIN_CAP = 5000.0


def tw_rhs(state, p: ModelParams):
    """Right-hand side of the profile system; state is (3,) or (3, m)."""
    u, z, y = np.asarray(state, dtype=float)
    ends = burned_states(p)
    um = ends.u_minus_strong
    du = flux(u) - flux(um) - (u - um) - p.q * (z + p.D * y)
    dz = y
    dy = (-y + p.k * ignition(u, p) * z) / p.D
    return np.array([du, dz, dy])


def tw_jac(state, p: ModelParams):
    """Jacobian of tw_rhs w.r.t. the state; returns (3, 3) or (3, 3, m)."""
    u, z, y = np.asarray(state, dtype=float)
    phi = ignition(u, p)
    dphi = ignition_deriv(u, p)
    zero = np.zeros_like(u)
    one = np.ones_like(u)
    row0 = [u - 1.0, -p.q * one, -p.q * p.D * one]
    row1 = [zero, zero, one]
    row2 = [p.k * dphi * z / p.D, p.k * phi / p.D, -one / p.D]
    return np.array([row0, row1, row2])


@dataclass(frozen=True)
class EndLinearization:
    """Constant-coefficient linearization of the profile flow at an end state.

    Basis columns are orthonormal; `complement` spans the orthogonal
    complement of the subspace used in the projective boundary condition.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    unstable_dim: int
    stable_dim: int
    center_dim: int
    unstable_basis: np.ndarray
    stable_basis: np.ndarray
    center_basis: np.ndarray
    slowest_rate: float  # decay rate of the profile tail at this end


def _orth(cols):
    a = np.array(cols, dtype=float).T
    if a.size == 0:
        return a.reshape(3, 0)
    q, _ = np.linalg.qr(a)
    return q


def end_linearizations(p: ModelParams) -> tuple[EndLinearization, EndLinearization]:
    """Linearizations at (burned, unburned) rest states with subspace bases.

    The coefficient matrix is block triangular, so eigenvalues come from the
    scalar u-block {a - 1} and the (z, y) block: at the burned state the
    quadratic D mu^2 + mu - k phi(u-) = 0, at the unburned state {0, -1/D}.
    """
    ends = burned_states(p)
    um, up = ends.u_minus_strong, p.u_plus
    am = ends.a_minus - 1.0
    ap = ends.a_plus - 1.0
    if am <= 1e-12:
        raise DegenerateLinearizationError(
            f"burned-state characteristic speed a-=1+{am:.2e}: Chapman-Jouguet degeneracy"
        )
    phim = float(ignition(um, p)) if p.ea > 0 else 1.0
    if phim <= 0:
        raise InvalidParameterError("ignition function vanishes at the burned state")

    def mat(a, phi):
        return np.array([
            [a, -p.q, -p.q * p.D],
            [0.0, 0.0, 1.0],
            [0.0, p.k * phi / p.D, -1.0 / p.D],
        ])

    # burned side: roots of D mu^2 + mu - k phi = 0
    disc = math.sqrt(1.0 + 4.0 * p.D * p.k * phim)
    mu_p = (-1.0 + disc) / (2.0 * p.D)
    mu_m = (-1.0 - disc) / (2.0 * p.D)

    def zy_vec(mu):
        # (z, y) eigenvector (1, mu); u component from the top row
        denom = am - mu
        if abs(denom) < 1e-10:
            raise DegenerateLinearizationError(
                f"burned linearization resonance a- - 1 = mu = {mu:.6g}"
            )
        return np.array([p.q * (1.0 + p.D * mu) / denom, 1.0, mu])

    minus = EndLinearization(
        matrix=mat(am, phim),
        eigenvalues=np.array([am, mu_p, mu_m]),
        unstable_dim=2,
        stable_dim=1,
        center_dim=0,
        unstable_basis=_orth([[1.0, 0.0, 0.0], zy_vec(mu_p)]),
        stable_basis=_orth([zy_vec(mu_m)]),
        center_basis=_orth([]),
        slowest_rate=min(am, mu_p),
    )

    # unburned side: phi = phi' = 0 there, eigenvalues {a+ - 1, 0, -1/D};
    # the stable pair always admits the closed-form basis below, even when
    # a+ - 1 and -1/D coincide
    plus = EndLinearization(
        matrix=mat(ap, 0.0),
        eigenvalues=np.array([ap, 0.0, -1.0 / p.D]),
        unstable_dim=0,
        stable_dim=2,
        center_dim=1,
        unstable_basis=_orth([]),
        stable_basis=_orth([[1.0, 0.0, 0.0], [0.0, 1.0, -1.0 / p.D]]),
        center_basis=_orth([[p.q / ap, 1.0, 0.0]]),
        slowest_rate=min(-ap, 1.0 / p.D),
    )
    return minus, plus


def _complement(basis: np.ndarray) -> np.ndarray:
    """Unit vector orthogonal to the two basis columns (3x2 -> 3,)."""
    n = np.cross(basis[:, 0], basis[:, 1])
    return n / np.linalg.norm(n)


@dataclass
class ProfileSolution:
    """Discretized traveling wave with quality metrics; immutable by convention."""

    params: ModelParams
    x_minus: float
    x_plus: float
    grid: np.ndarray        # strictly increasing, contains 0
    values: np.ndarray      # (3, m): u, z, y
    derivs: np.ndarray      # (3, m): tw_rhs at the grid
    residual_norm: float
    endpoint_error: float
    boundary_residual: float
    decay_rate_minus: float
    decay_rate_plus: float
    newton_rounds: int

    _spline: CubicSpline | None = None

    @property
    def u_minus(self) -> float:
        return burned_states(self.params).u_minus_strong

    @property
    def end_state_minus(self) -> np.ndarray:
        return np.array([self.u_minus, 0.0, 0.0])

    @property
    def end_state_plus(self) -> np.ndarray:
        return np.array([self.params.u_plus, 1.0, 0.0])

    def spline(self) -> CubicSpline:
        if self._spline is None:
            self._spline = CubicSpline(self.grid, self.values, axis=1)
        return self._spline

    def __call__(self, x):
        """State (u, z, y) at x; clamped to end behavior outside the domain."""
        x = np.clip(x, self.grid[0], self.grid[-1])
        return self.spline()(x)

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
            "residual_norm": self.residual_norm,
            "endpoint_error": self.endpoint_error,
            "boundary_residual": self.boundary_residual,
            "decay_rate_minus": self.decay_rate_minus,
            "decay_rate_plus": self.decay_rate_plus,
            "n_mesh": int(self.grid.size),
            "newton_rounds": self.newton_rounds,
            "analytic_z": False,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.meta_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")


def analytic_seed(p: ModelParams, domain=None):
    """tanh-shaped initial guess, phase-aligned so u(0) = u_ig.

    Good enough to start Newton at small q; larger q is reached by
    continuation.
    """
    ends = burned_states(p)
    um, up = ends.u_minus_strong, p.u_plus
    r = (p.u_ig - um) / (up - um)
    r = min(max(r, 1e-12), 1 - 1e-12)
    x0 = -math.atanh(2.0 * r - 1.0)

    def seed(x):
        x = np.asarray(x, dtype=float)
        u = um + (up - um) * 0.5 * (1.0 + np.tanh(x - x0))
        z = 0.5 * (1.0 + np.tanh(x))
        y = 0.5 * (1.0 - np.tanh(x) ** 2)
        return np.array([u, z, y])

    return seed


def find_bench(x, u, du, u_weak, height_tol=BENCH_HEIGHT_TOL,
               slope_tol=BENCH_SLOPE_TOL, min_len=BENCH_MIN_LEN):
    """Longest flat stretch of u at the weak-detonation height, or None.

    Returns (x_lo, x_hi) when the stretch is at least min_len long.
    """
    x = np.asarray(x)
    mask = (np.abs(np.asarray(u) - u_weak) < height_tol) & (np.abs(np.asarray(du)) < slope_tol)
    best = None
    start = None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        if (not m or i == len(mask) - 1) and start is not None:
            stop = i if m else i - 1
            span = x[stop] - x[start]
            if best is None or span > best[1] - best[0]:
                best = (float(x[start]), float(x[stop]))
            start = None
    if best is not None and best[1] - best[0] >= min_len:
        return best
    return None


def _initial_domain(p: ModelParams) -> tuple[float, float]:
    # e^-10 of the tail amplitude comfortably beats the 1e-3 endpoint
    # tolerance; auto-extension backstops unusually large tail constants
    minus, plus = end_linearizations(p)
    x_m = -min(max(10.0 / minus.slowest_rate, 25.0), DOMAIN_CAP)
    x_p = min(max(10.0 / plus.slowest_rate, 25.0), DOMAIN_CAP)
    return x_m, x_p


def _half_mesh(length: float, n_tail: int = 60, n_core: int = 90) -> np.ndarray:
    """Nodes on [0, length] measured from x = 0: dense core, geometric tail."""
    core = min(20.0, 0.5 * length)
    a = np.linspace(0.0, core, n_core, endpoint=False)
    b = np.geomspace(core, length, n_tail)
    return np.concatenate([a, b])


def _evaluate_seed(guess, x):
    if isinstance(guess, ProfileSolution):
        return guess(x)
    return np.asarray(guess(x), dtype=float)


def _fit_decay(x, dev, lo, hi):
    """Slope of log ||state - end state|| over x in [lo, hi]."""
    mask = (x >= lo) & (x <= hi) & (dev > 1e-13)
    if mask.sum() < 6:
        mask = dev > 1e-13  # fall back to the whole half
    if mask.sum() < 2:
        return float("nan")
    coef = np.polyfit(x[mask], np.log(dev[mask]), 1)
    return float(coef[0])


def solve_profile(p: ModelParams, guess=None, domain=None, *,
                  residual_tol=1e-8, endpoint_tol=1e-3,
                  domain_cap=DOMAIN_CAP, max_nodes=90000,
                  auto_extend=True) -> ProfileSolution:
    """Solve the truncated connection problem for a strong detonation.

    The solution at x_minus is constrained to the affine unstable subspace of
    the burned linearization, at x_plus to the affine stable subspace of the
    unburned one, and u(0) = u_ig fixes translation.  The domain is extended
    (doubling the failing side) until the endpoint error is within tolerance.

    Raises NoProfileError (with a bench diagnostic) on Newton failure and
    SlowDecayError when the domain cap is hit first.
    """
    diag = validate(p)
    if not diag.ok:
        raise InvalidParameterError("; ".join(diag.issues))
    if p.ea <= 0:
        raise InvalidParameterError("solve_profile requires ea > 0; use zero_ea.solve_zero_ea_profile")

    minus, plus = end_linearizations(p)
    ends = burned_states(p)
    U_m = np.array([ends.u_minus_strong, 0.0, 0.0])
    U_p = np.array([p.u_plus, 1.0, 0.0])
    n_m = _complement(minus.unstable_basis)
    w_p = _complement(plus.stable_basis)

    if domain is None:
        x_m, x_p = _initial_domain(p)
        if isinstance(guess, ProfileSolution):
            x_m = min(x_m, guess.x_minus)
            x_p = max(x_p, guess.x_plus)
    else:
        x_m, x_p = float(domain[0]), float(domain[1])
    if guess is None:
        guess = analytic_seed(p)

    last_failure = None
    while True:
        mesh_hint = None
        if isinstance(guess, ProfileSolution):
            # the previous solve's mesh is already residual-equidistributed;
            # thin it so continuation meshes reach a stable size instead of
            # ratcheting up, and let the solver re-refine where needed
            mesh_hint = guess.grid
            while mesh_hint.size > 9000:
                mesh_hint = np.unique(np.concatenate([mesh_hint[::2], [0.0, mesh_hint[-1]]]))
        try:
            sol = _solve_on_domain(p, guess, (x_m, x_p), U_m, U_p, n_m, w_p,
                                   residual_tol, max_nodes, mesh_hint=mesh_hint)
        except NoProfileError as err:
            raise err
        if sol.endpoint_error <= endpoint_tol:
            if sol.residual_norm > residual_tol:
                raise NoProfileError(
                    f"collocation residual {sol.residual_norm:.2e} exceeds {residual_tol:.1e}",
                    last_iterate=(sol.grid, sol.values),
                    bench=_bench_of(sol) is not None,
                    bench_interval=_bench_of(sol),
                )
            return sol
        last_failure = sol
        if not auto_extend:
            raise SlowDecayError(
                f"endpoint error {sol.endpoint_error:.2e} > {endpoint_tol:.1e} on fixed domain"
            )
        grew = False
        if np.max(np.abs(sol(x_m) - U_m)) > endpoint_tol and -x_m < domain_cap:
            x_m = -min(2.0 * -x_m, domain_cap)
            grew = True
        if np.max(np.abs(sol(x_p) - U_p)) > endpoint_tol and x_p < domain_cap:
            x_p = min(2.0 * x_p, domain_cap)
            grew = True
        if not grew:
            raise SlowDecayError(
                f"endpoint error {sol.endpoint_error:.2e} > {endpoint_tol:.1e} "
                f"with domain cap |x| <= {domain_cap}: profile decays too slowly"
            )
        guess = sol


def _bench_of(sol: ProfileSolution):
    ends = burned_states(sol.params)
    return find_bench(sol.grid, sol.values[0], sol.derivs[0], ends.u_minus_weak)


def _mesh_from_hint(hint, x_m, x_p):
    """Fold a previous x-space mesh onto the shared t grid, padding any
    newly extended tail geometrically."""
    hint = np.asarray(hint, dtype=float)
    left = -hint[hint <= 0.0]
    right = hint[hint >= 0.0]
    pieces_l = [left]
    pieces_r = [right]
    if -x_m > left.max() * 1.001:
        pieces_l.append(np.geomspace(left.max(), -x_m, 33))
    if x_p > right.max() * 1.001:
        pieces_r.append(np.geomspace(right.max(), x_p, 33))
    t_l = 1.0 - np.concatenate(pieces_l) / -x_m
    t_r = np.concatenate(pieces_r) / x_p
    return _merge_t(np.concatenate([t_l, t_r]))


def _merge_t(t: np.ndarray) -> np.ndarray:
    """Sorted t mesh with near-collisions merged.

    The two half-line grids fold onto one shared t mesh, so unrelated nodes
    can land arbitrarily close; intervals below ~1e-6 put the collocation
    residual at the rounding-noise floor and trigger runaway refinement.
    """
    t = np.unique(np.clip(t, 0.0, 1.0))
    keep = np.concatenate([[True], np.diff(t) > 2e-6])
    t = t[keep]
    t[0], t[-1] = 0.0, 1.0
    return t


def _solve_on_domain(p, guess, domain, U_m, U_p, n_m, w_p, residual_tol, max_nodes,
                     mesh_hint=None):
    x_m, x_p = domain

    def fun(t, y):
        left = -x_m * tw_rhs(y[:3], p)
        right = x_p * tw_rhs(y[3:], p)
        return np.vstack([left, right])

    def fun_jac(t, y):
        m = y.shape[1]
        J = np.zeros((6, 6, m))
        J[:3, :3] = -x_m * tw_jac(y[:3], p)
        J[3:, 3:] = x_p * tw_jac(y[3:], p)
        return J

    def bc(ya, yb):
        return np.array([
            n_m @ (ya[:3] - U_m),
            yb[0] - ya[3],
            yb[1] - ya[4],
            yb[2] - ya[5],
            ya[3] - p.u_ig,
            w_p @ (yb[3:] - U_p),
        ])

    dya = np.zeros((6, 6))
    dyb = np.zeros((6, 6))
    dya[0, :3] = n_m
    dya[1:4, 3:] = -np.eye(3)
    dya[4, 3] = 1.0
    dyb[1:4, :3] = np.eye(3)
    dyb[5, 3:] = w_p

    def bc_jac(ya, yb):
        return dya, dyb

    # mesh measured from x = 0 toward each end, folded to t in [0, 1]
    if mesh_hint is not None:
        t = _mesh_from_hint(mesh_hint, x_m, x_p)
    else:
        mesh_left_x = -_half_mesh(-x_m)      # in [x_m, 0], descending from 0
        mesh_right_x = _half_mesh(x_p)
        t = _merge_t(np.concatenate([1.0 - mesh_left_x / x_m, mesh_right_x / x_p]))
    y0 = np.vstack([
        _evaluate_seed(guess, x_m * (1.0 - t)),
        _evaluate_seed(guess, x_p * t),
    ])

    res = solve_bvp(fun, bc, t, y0, fun_jac=fun_jac, bc_jac=bc_jac,
                    tol=min(residual_tol * 0.1, 1e-9), max_nodes=max_nodes)
    if res.status != 0:
        xg, vals = _unfold(res, x_m, x_p)
        ends = burned_states(p)
        bench = find_bench(xg, vals[0], np.gradient(vals[0], xg), ends.u_minus_weak)
        raise NoProfileError(
            f"profile solve failed at q={p.q}, ea={p.ea}, k={p.k}, D={p.D}: {res.message}",
            last_iterate=(xg, vals),
            bench=bench is not None,
            bench_interval=bench,
        )

    xg, vals = _unfold(res, x_m, x_p)
    derivs = tw_rhs(vals, p)

    # max relative collocation residual, measured in x units between nodes
    resid = 0.0
    tm = 0.5 * (res.x[:-1] + res.x[1:])
    Sm = res.sol(tm)
    Sm_t = res.sol(tm, 1)
    for sl, scale in ((slice(0, 3), -x_m), (slice(3, 6), x_p)):
        f = tw_rhs(Sm[sl], p)
        r = np.abs(Sm_t[sl] / scale - f) / (1.0 + np.abs(f))
        resid = max(resid, float(r.max()))

    endpoint_error = max(
        float(np.max(np.abs(vals[:, 0] - U_m))),
        float(np.max(np.abs(vals[:, -1] - U_p))),
    )
    boundary_residual = float(np.max(np.abs(bc(res.y[:, 0], res.y[:, -1]))))

    dev_m = np.linalg.norm(vals - U_m[:, None], axis=0)
    dev_p = np.linalg.norm(vals - U_p[:, None], axis=0)
    theta_m = _fit_decay(xg[xg <= 0], dev_m[xg <= 0], x_m, 0.75 * x_m)
    theta_p = -_fit_decay(xg[xg >= 0], dev_p[xg >= 0], 0.75 * x_p, x_p)

    return ProfileSolution(
        params=p,
        x_minus=x_m,
        x_plus=x_p,
        grid=xg,
        values=vals,
        derivs=derivs,
        residual_norm=resid,
        endpoint_error=endpoint_error,
        boundary_residual=boundary_residual,
        decay_rate_minus=theta_m,
        decay_rate_plus=theta_p,
        newton_rounds=int(res.niter),
    )


def _unfold(res, x_m, x_p):
    """Stacked two-half solution -> single ascending grid through 0.

    x = x_m (1 - t) sweeps the left half upward as t grows, x = x_p t the
    right half; the duplicated interface node at x = 0 keeps the right copy.
    """
    t = res.x
    x_left = x_m * (1.0 - t)
    x_right = x_p * t
    xs = np.concatenate([x_left[:-1], x_right])
    vals = np.concatenate([res.y[:3, :-1], res.y[3:]], axis=1)
    keep = np.concatenate([[True], np.diff(xs) > 0])
    return xs[keep], vals[:, keep]


class ContinuationFrontierError(NumericalError):
    """Continuation bottomed out; carries the last good point and diagnostics."""

    def __init__(self, message, last_good_params=None, profiles=None, diagnostic=None):
        super().__init__(message)
        self.last_good_params = last_good_params
        self.profiles = profiles or []
        self.diagnostic = diagnostic


def _interp_params(a: ModelParams, b: ModelParams, t: float) -> ModelParams:
    return ModelParams(**{
        k: (1.0 - t) * getattr(a, k) + t * getattr(b, k) for k in model.PARAM_KEYS
    })


def continue_profiles(path, *, bisect_depth=8, **solve_kw):
    """Solve a parameter path sequentially, seeding each solve from the last.

    On failure the parameter step is bisected up to `bisect_depth` before the
    frontier is reported via ContinuationFrontierError.
    """
    path = list(path)
    if not path:
        return []
    out: list[ProfileSolution] = []
    current = solve_profile(path[0], **solve_kw)
    out.append(current)
    for target in path[1:]:
        try:
            current = _continue_step(current, target, bisect_depth, solve_kw)
        except NumericalError as err:
            raise ContinuationFrontierError(
                f"continuation stalled moving toward {target}: {err}",
                last_good_params=current.params,
                profiles=out,
                diagnostic=err,
            ) from err
        out.append(current)
    return out


def _continue_step(current: ProfileSolution, target: ModelParams, depth: int, solve_kw):
    try:
        return solve_profile(target, guess=current, **solve_kw)
    except NumericalError:
        if depth <= 0:
            raise
        mid = _interp_params(current.params, target, 0.5)
        current = _continue_step(current, mid, depth - 1, solve_kw)
        return _continue_step(current, target, depth - 1, solve_kw)
