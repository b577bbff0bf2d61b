"""Eigenvalue ODE systems, high-frequency bound, Kato frames, Evans evaluation.

The eigenvalue problem for the linearized wave is cast as a first-order
system X' = B(x; lam) X.  Two forms are used:

* unintegrated, unknown W = (u, z, u', z'): diagnostics and the
  finite-difference oracle;
* integrated, unknown X = (u, w, z, z') with w' = u + q z: the production
  path (the change of variables removes the translational zero of the Evans
  function).

The Evans function is det of the frame matrix at the matching point x = 0,
with the unstable bundle carried from x_minus and the stable bundle from
x_plus by the polar integrator of :mod:`detstab._polar`; initializing
subspaces are continued analytically in lam by Kato transport of the
spectral projectors of the limit matrices.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.linalg import qr as scipy_qr, schur, solve_sylvester

from . import _polar
from .errors import FrameDegeneracyError, StiffnessError
from .model import ModelParams, burned_states, ignition, ignition_deriv
from .profile import ProfileSolution, tw_rhs

__all__ = [
    "SpectralSystem",
    "HighFreqBound",
    "KatoFrame",
    "EvansTrace",
    "EvansSolver",
    "matrix_unintegrated",
    "matrix_integrated",
    "limit_matrix",
    "hf_bound",
    "spectral_projector",
    "canonical_frame",
    "transport_frame",
    "kato_frames",
    "splitting_counts",
]

SCHEMA_VERSION = 1

GAP_FLOOR = 1e-6
PROJ_TOL = 1e-8


def _profile_state(x, prof: ProfileSolution):
    """(u, z, y) at x, with exact end states beyond the truncated domain."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    vals = prof(x)
    left = x < prof.grid[0]
    right = x > prof.grid[-1]
    if left.any():
        vals[:, left] = prof.end_state_minus[:, None]
    if right.any():
        vals[:, right] = prof.end_state_plus[:, None]
    return vals[:, 0] if scalar else vals


def matrix_unintegrated(x, lam, prof: ProfileSolution):
    """4x4 coefficient of the unintegrated system, unknown (u, z, u', z')."""
    p = prof.params
    u, z, y = _profile_state(x, prof)
    ux = float(tw_rhs(np.array([u, z, y]), p)[0])
    phi = float(ignition(u, p))
    dphi = float(ignition_deriv(u, p))
    B = np.zeros((4, 4), dtype=complex)
    B[0, 2] = 1.0
    B[1, 3] = 1.0
    B[2, 0] = lam + ux - p.q * p.k * dphi * z
    B[2, 1] = -p.q * p.k * phi
    B[2, 2] = u - 1.0
    B[3, 0] = p.k * dphi * z / p.D
    B[3, 1] = (lam + p.k * phi) / p.D
    B[3, 3] = -1.0 / p.D
    return B


def matrix_integrated(x, lam, prof: ProfileSolution):
    """4x4 coefficient of the integrated system, unknown (u, w, z, z')."""
    p = prof.params
    u, z, _ = _profile_state(x, prof)
    phi = float(ignition(u, p))
    dphi = float(ignition_deriv(u, p))
    B = np.zeros((4, 4), dtype=complex)
    B[0, 0] = u - 1.0
    B[0, 1] = lam
    B[0, 2] = -p.q
    B[0, 3] = -p.q * p.D
    B[1, 0] = 1.0
    B[1, 2] = p.q
    B[2, 3] = 1.0
    B[3, 0] = p.k * dphi * z / p.D
    B[3, 2] = (lam + p.k * phi) / p.D
    B[3, 3] = -1.0 / p.D
    return B


def limit_matrix(lam, p: ModelParams, side: str, phi_minus: float | None = None,
                 integrated: bool = True):
    """Constant coefficient matrix at x -> -inf ('minus') or +inf ('plus').

    phi_minus overrides the ignition value at the burned state (the Heaviside
    limit uses 1); at the unburned state the ignition term vanishes.
    """
    ends = burned_states(p)
    if side == "minus":
        u = ends.u_minus_strong
        phi = float(ignition(u, p)) if phi_minus is None else phi_minus
    elif side == "plus":
        u = p.u_plus
        phi = 0.0
    else:
        raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")
    B = np.zeros((4, 4), dtype=complex)
    if integrated:
        B[0, 0] = u - 1.0
        B[0, 1] = lam
        B[0, 2] = -p.q
        B[0, 3] = -p.q * p.D
        B[1, 0] = 1.0
        B[1, 2] = p.q
        B[2, 3] = 1.0
        B[3, 2] = (lam + p.k * phi) / p.D
        B[3, 3] = -1.0 / p.D
    else:
        B[0, 2] = 1.0
        B[1, 3] = 1.0
        B[2, 0] = lam
        B[2, 1] = -p.q * p.k * phi
        B[2, 2] = u - 1.0
        B[3, 1] = (lam + p.k * phi) / p.D
        B[3, 3] = -1.0 / p.D
    return B


@dataclass
class SpectralSystem:
    """Evaluator bundle for one wave: coefficient matrices and their limits.

    kind 0 is the smooth-ignition system backed by the (u, z) profile spline;
    kind 1 is the Heaviside-ignition system with the jump gauge applied on
    x > 0 (built by :mod:`detstab.zero_ea`).
    """

    params: ModelParams
    kind: int
    x_minus: float
    x_plus: float
    bx: np.ndarray          # spline breakpoints
    bc: np.ndarray          # spline coefficients (4, m-1, 2) for (u, z)
    par: np.ndarray         # (q, k, D, ea, u_ig) passed to the jit core
    jump: np.ndarray        # 4x4 gauge for x > 0 (identity for kind 0)
    jump_inv: np.ndarray
    phi_minus: float

    @classmethod
    def from_profile(cls, prof: ProfileSolution) -> "SpectralSystem":
        p = prof.params
        spl = CubicSpline(prof.grid, prof.values[:2], axis=1)
        return cls(
            params=p,
            kind=0,
            x_minus=prof.x_minus,
            x_plus=prof.x_plus,
            bx=np.ascontiguousarray(spl.x),
            bc=np.ascontiguousarray(spl.c),
            par=np.array([p.q, p.k, p.D, p.ea, p.u_ig]),
            jump=np.eye(4, dtype=complex),
            jump_inv=np.eye(4, dtype=complex),
            phi_minus=float(ignition(burned_states(p).u_minus_strong, p)),
        )

    def coef(self, x: float, lam: complex) -> np.ndarray:
        """Reference (non-jit) coefficient matrix; matches the integrator core."""
        out = np.zeros((4, 4), dtype=complex)
        _polar._coef.py_func(float(x), complex(lam), self.kind, self.par,
                             self.bx, self.bc, self.jump, self.jump_inv, out)
        return out

    def limit(self, lam: complex, side: str) -> np.ndarray:
        B = limit_matrix(lam, self.params, side,
                         phi_minus=self.phi_minus if self.kind == 1 else None)
        if self.kind == 1 and side == "plus":
            return self.jump @ B @ self.jump_inv
        return B


@dataclass(frozen=True)
class HighFreqBound:
    """Energy-estimate exclusion radius: eigenvalues with Re >= 0 satisfy
    Re(lam) + |Im(lam)| <= R."""

    L: float
    M: float
    R: float

    def to_json_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "L": self.L, "M": self.M, "R": self.R}


def hf_bound(prof: ProfileSolution) -> HighFreqBound:
    """Suprema L = sup phi'(u) z and M = sup ((1+q) phi'(u) z - phi(u)) and
    the radius R = max(4, 1/(4D) + (1/4 + |D-1|^2/2) k L + k M).

    The suprema are taken on the profile mesh refined 4x everywhere and a
    further 12x across the reaction window where phi' peaks.
    """
    p = prof.params
    g = prof.grid
    xs = [g]
    t = np.linspace(0.0, 1.0, 5, endpoint=False)[1:]
    xs.append((g[:-1, None] + np.diff(g)[:, None] * t[None, :]).ravel())
    u_nodes = prof.values[0]
    lo, hi = p.u_ig, p.u_ig + 3.0 * p.ea
    hot = (np.minimum(u_nodes[:-1], u_nodes[1:]) < hi) & (np.maximum(u_nodes[:-1], u_nodes[1:]) > lo)
    if hot.any():
        t2 = np.linspace(0.0, 1.0, 13, endpoint=False)[1:]
        gh = g[:-1][hot]
        dh = np.diff(g)[hot]
        xs.append((gh[:, None] + dh[:, None] * t2[None, :]).ravel())
    x = np.unique(np.concatenate(xs))
    u, z, _ = prof(x)
    dphi = ignition_deriv(u, p)
    phi = ignition(u, p)
    L = float(np.max(dphi * z))
    M = float(np.max((1.0 + p.q) * dphi * z - phi))
    R = max(4.0, 1.0 / (4.0 * p.D) + (0.25 + 0.5 * abs(p.D - 1.0) ** 2) * p.k * L + p.k * M)
    return HighFreqBound(L=L, M=M, R=R)


def _group_cut(eigs: np.ndarray, side: str) -> tuple[float, float]:
    """Real-part cut separating the tracked pair, and the complex gap."""
    re = np.sort(eigs.real)
    if side == "minus":  # two largest real parts
        cut = 0.5 * (re[1] + re[2])
        sel = eigs[eigs.real > cut]
        uns = eigs[eigs.real <= cut]
    else:  # two smallest real parts
        cut = 0.5 * (re[1] + re[2])
        sel = eigs[eigs.real < cut]
        uns = eigs[eigs.real >= cut]
    if len(sel) != 2:
        raise FrameDegeneracyError(f"cannot split a 2-dimensional group at cut {cut}")
    gap = min(abs(a - b) for a in sel for b in uns)
    return cut, gap


def spectral_projector(B: np.ndarray, side: str):
    """Spectral projector onto the tracked invariant pair of a limit matrix.

    side 'minus': the two eigenvalues of largest real part (unstable bundle);
    side 'plus': the two of smallest real part (stable bundle).  Uses an
    ordered Schur form and a Sylvester solve, so within-group eigenvalue
    collisions are harmless; a cross-group gap below 1e-6 raises.
    """
    eigs = np.linalg.eigvals(B)
    cut, gap = _group_cut(eigs, side)
    if gap < GAP_FLOOR:
        raise FrameDegeneracyError(f"spectral gap {gap:.2e} below {GAP_FLOOR}", lam=None)
    if side == "minus":
        select = lambda w: w.real > cut
    else:
        select = lambda w: w.real < cut
    T, Q, sdim = schur(B, output="complex", sort=select)
    if sdim != 2:
        raise FrameDegeneracyError(f"ordered Schur selected {sdim} eigenvalues, expected 2")
    X = solve_sylvester(T[:2, :2], -T[2:, 2:], T[:2, 2:])
    M = np.zeros((4, 4), dtype=complex)
    M[:2, :2] = np.eye(2)
    M[:2, 2:] = X
    P = Q @ M @ Q.conj().T
    return P, Q[:, :2], gap


def canonical_frame(B: np.ndarray, side: str) -> np.ndarray:
    """Deterministic orthonormal basis of the tracked subspace.

    Built from the orthogonal projector by column-pivoted QR, with each
    column's first significant component made real positive.  The
    construction is equivariant under conjugation of B, which makes direct
    evaluations at conjugate lam pairs produce conjugate Evans values.
    """
    _, Q1, _ = spectral_projector(B, side)
    Porth = Q1 @ Q1.conj().T
    Qp, _, _ = scipy_qr(Porth, pivoting=True)
    F = Qp[:, :2].copy()
    for c in range(2):
        idx = np.argmax(np.abs(F[:, c]) > 1e-8)
        ph = F[idx, c]
        F[:, c] *= np.conj(ph) / abs(ph)
    return F


def splitting_counts(lam, system: SpectralSystem) -> tuple[int, int]:
    """(# eigenvalues of B- with Re > 0, # of B+ with Re < 0)."""
    em = np.linalg.eigvals(system.limit(lam, "minus"))
    ep = np.linalg.eigvals(system.limit(lam, "plus"))
    return int((em.real > 0).sum()), int((ep.real < 0).sum())


def transport_frame(system: SpectralSystem, side: str, lam_a: complex,
                    F_a: np.ndarray, lam_b: complex, *, rtol=1e-11, atol=1e-13):
    """Kato transport of a subspace frame from lam_a to lam_b.

    Integrates v' = P'(lam) P(lam) v along the straight segment; each column
    stays in range(P) and depends analytically on the endpoint, so the
    result is path-independent away from splitting degeneracies.
    """
    if lam_b == lam_a:
        return F_a.copy()
    dlam = lam_b - lam_a
    delta = 1e-4

    def P_of(t: float) -> np.ndarray:
        P, _, _ = spectral_projector(system.limit(lam_a + t * dlam, side), side)
        return P

    def rhs(t, yre):
        y = yre.view(np.complex128).reshape(4, 2)
        Pd = (P_of(t + delta) - P_of(t - delta)) / (2.0 * delta)
        dv = Pd @ (P_of(t) @ y)
        return dv.reshape(-1).view(np.float64)

    y0 = np.ascontiguousarray(F_a, dtype=complex).reshape(-1).view(np.float64)
    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="RK45", rtol=rtol, atol=atol)
    if not sol.success:
        raise FrameDegeneracyError(f"Kato transport failed near lam={lam_b}: {sol.message}", lam=lam_b)
    F = sol.y[:, -1].copy().view(np.complex128).reshape(4, 2)
    # drift control: re-foot inside the subspace (correction is O(transport error))
    P_end, _, _ = spectral_projector(system.limit(lam_b, side), side)
    return P_end @ F


@dataclass
class KatoFrame:
    """Analytically continued initializing frames along a lam path."""

    lams: np.ndarray            # (n,)
    minus: np.ndarray           # (n, 4, 2) unstable-subspace frames of B-
    plus: np.ndarray            # (n, 4, 2) stable-subspace frames of B+
    proj_residual: float        # worst ||P v - v|| / ||v|| before re-footing


def kato_frames(lams, system: SpectralSystem) -> KatoFrame:
    """Frames at every node of a lam path, transported from the first node."""
    lams = np.asarray(lams, dtype=complex)
    n = lams.size
    minus = np.zeros((n, 4, 2), dtype=complex)
    plus = np.zeros((n, 4, 2), dtype=complex)
    minus[0] = canonical_frame(system.limit(lams[0], "minus"), "minus")
    plus[0] = canonical_frame(system.limit(lams[0], "plus"), "plus")
    worst = 0.0
    for j in range(1, n):
        for side, arr in (("minus", minus), ("plus", plus)):
            F = transport_frame(system, side, lams[j - 1], arr[j - 1], lams[j])
            P, _, _ = spectral_projector(system.limit(lams[j], side), side)
            res = np.linalg.norm(P @ F - F) / np.linalg.norm(F)
            worst = max(worst, float(res))
            arr[j] = F
    if worst > PROJ_TOL:
        raise FrameDegeneracyError(f"projector residual {worst:.2e} exceeds {PROJ_TOL}")
    return KatoFrame(lams=lams, minus=minus, plus=plus, proj_residual=worst)


@dataclass(frozen=True)
class EvansValue:
    """One Evans evaluation split into winding-safe channels.

    The true Evans value is tilde * exp(ledger + 1j * im_exponent): `tilde`
    is the frame determinant with the initialization phase (slowly varying
    in lam), `im_exponent` the imaginary part of the radial exponent (fast,
    but continuous and single-valued, so it cancels around closed
    contours), `ledger` the log magnitude.
    """

    tilde: complex
    ledger: float
    im_exponent: float

    @property
    def E(self) -> complex:
        """Unit-magnitude-scale value with the full phase (for plotting)."""
        return self.tilde * cmath.exp(1j * self.im_exponent)


@dataclass
class EvansTrace:
    """Evans values along a closed contour, counterclockwise.

    values carry unit-scale Evans data (full phase); ledgers the
    log-magnitude radial factor (true value = values * exp(ledgers));
    im_exponents the radial phase channel used for alias-safe winding.
    """

    nodes: np.ndarray
    values: np.ndarray
    ledgers: np.ndarray
    im_exponents: np.ndarray | None = None

    @property
    def winding_values(self) -> np.ndarray:
        """Values with the radial phase removed; winding-equivalent on
        closed contours because the removed phase telescopes to zero."""
        if self.im_exponents is None:
            return self.values
        return self.values * np.exp(-1j * self.im_exponents)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("re_lambda,im_lambda,re_E,im_E,log_radial\n")
            for lam, E, g in zip(self.nodes, self.values, self.ledgers):
                fh.write(",".join(repr(float(v)) for v in
                                  (lam.real, lam.imag, E.real, E.imag, g)) + "\n")

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(nodes=data[:, 0] + 1j * data[:, 1],
                   values=data[:, 2] + 1j * data[:, 3],
                   ledgers=data[:, 4])


class EvansSolver:
    """Drives polar-method Evans evaluations for one wave.

    Frames for new lam values are Kato-transported from the nearest already
    evaluated node, so every value along a contour shares one analytic
    normalization fixed at the contour's first node.
    """

    def __init__(self, system: SpectralSystem, rtol: float = 1e-6, atol: float = 1e-8,
                 match_transform: np.ndarray | None = None):
        self.system = system
        self.rtol = rtol
        self.atol = atol
        # applied to the stable-bundle frame at the matching point (used by
        # the Heaviside left-state jump convention)
        self.match_transform = match_transform
        self._frames: dict[complex, tuple[np.ndarray, np.ndarray]] = {}

    # -- frame bookkeeping -------------------------------------------------
    def _init_frames(self, lam: complex):
        sys = self.system
        Fm = canonical_frame(sys.limit(lam, "minus"), "minus")
        Fp = canonical_frame(sys.limit(lam, "plus"), "plus")
        self._frames[complex(lam)] = (Fm, Fp)
        return Fm, Fp

    def frames_at(self, lam: complex, anchor: complex | None = None):
        lam = complex(lam)
        if lam in self._frames:
            return self._frames[lam]
        if anchor is None:
            return self._init_frames(lam)
        Fa_m, Fa_p = self._frames[complex(anchor)]
        Fm = transport_frame(self.system, "minus", anchor, Fa_m, lam)
        Fp = transport_frame(self.system, "plus", anchor, Fa_p, lam)
        self._frames[lam] = (Fm, Fp)
        return Fm, Fp

    def seed_path(self, lams):
        """Kato-continue frames along an ordered path (contour nodes)."""
        frames = kato_frames(lams, self.system)
        for j, lam in enumerate(frames.lams):
            self._frames[complex(lam)] = (frames.minus[j], frames.plus[j])
        return frames

    # -- evaluation ---------------------------------------------------------
    def evans(self, lam: complex, frames=None) -> EvansValue:
        """Evans value at lam split into winding-safe channels."""
        lam = complex(lam)
        if frames is None:
            frames = self.frames_at(lam)
        Fm, Fp = frames
        sys = self.system
        Qm, Rm = np.linalg.qr(Fm)
        Qp, Rp = np.linalg.qr(Fp)
        log_r0 = (cmath.log(Rm[0, 0]) + cmath.log(Rm[1, 1])
                  + cmath.log(Rp[0, 0]) + cmath.log(Rp[1, 1]))
        om_m, g_m, status_m, x_m = _polar.polar_transit(
            sys.x_minus, 0.0, lam, np.ascontiguousarray(Qm, dtype=complex),
            self.rtol, self.atol, sys.kind, sys.par, sys.bx, sys.bc,
            sys.jump, sys.jump_inv)
        if status_m != _polar.OK:
            raise StiffnessError(f"unstable-bundle integration failed (status {status_m}) at x={x_m}", x=x_m)
        om_p, g_p, status_p, x_p = _polar.polar_transit(
            sys.x_plus, 0.0, lam, np.ascontiguousarray(Qp, dtype=complex),
            self.rtol, self.atol, sys.kind, sys.par, sys.bx, sys.bc,
            sys.jump, sys.jump_inv)
        if status_p != _polar.OK:
            raise StiffnessError(f"stable-bundle integration failed (status {status_p}) at x={x_p}", x=x_p)
        if self.match_transform is not None:
            om_p = self.match_transform @ om_p
        det4 = np.linalg.det(np.hstack([om_m, om_p]))
        gamma = g_m + g_p
        tilde = det4 * cmath.exp(1j * log_r0.imag)
        return EvansValue(tilde=tilde,
                          ledger=float(gamma.real + log_r0.real),
                          im_exponent=float(gamma.imag))

    # -- contour driving ----------------------------------------------------
    def trace(self, contour) -> EvansTrace:
        """Evaluate the closed contour; with conjugate symmetry only the
        upper path is integrated and the lower half is reflected."""
        upper = contour.explicit_nodes
        self.seed_path(upper)
        vals: dict[complex, EvansValue] = {}
        for lam in upper:
            vals[complex(lam)] = self.evans(lam)
        nodes = contour.nodes
        values = np.zeros(nodes.size, dtype=complex)
        ledgers = np.zeros(nodes.size)
        imexp = np.zeros(nodes.size)
        for j, lam in enumerate(nodes):
            lam = complex(lam)
            if lam in vals:
                v = vals[lam]
                values[j], ledgers[j], imexp[j] = v.E, v.ledger, v.im_exponent
            else:
                v = vals[complex(np.conj(lam))]
                values[j], ledgers[j], imexp[j] = np.conj(v.E), v.ledger, -v.im_exponent
        return EvansTrace(nodes=nodes.astype(complex), values=values,
                          ledgers=ledgers, im_exponents=imexp)

    def refiner(self, contour):
        """Callback (lam_lo, lam_hi) -> (lam_mid, tilde_mid) for winding
        refinement; returns the radial-phase-free channel that the winding
        count operates on."""

        def refine(lam_lo: complex, lam_hi: complex):
            mid = contour.midpoint(lam_lo, lam_hi)
            key = complex(mid)
            if key.imag < -1e-15:
                up = complex(np.conj(key))
                if up not in self._frames:
                    anchor = complex(np.conj(lam_lo))
                    if anchor not in self._frames:
                        anchor = complex(np.conj(lam_hi))
                    self.frames_at(up, anchor=anchor)
                v = self.evans(up)
                return mid, np.conj(v.tilde)
            if key not in self._frames:
                anchor = complex(lam_lo)
                if anchor not in self._frames:
                    anchor = complex(lam_hi)
                self.frames_at(key, anchor=anchor)
            v = self.evans(key)
            return mid, v.tilde

        return refine
