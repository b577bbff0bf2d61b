"""Finite-difference eigenvalue oracle for the linearized wave operator.

Independent check on the Evans path: discretize the unintegrated linearized
equations

    u_t = u_xx - ((u_hat - 1) u)_x + q k (phi'(u_hat) z_hat u + phi(u_hat) z)
    z_t = D z_xx + z_x - k phi'(u_hat) z_hat u - k phi(u_hat) z

with second-order centered differences and homogeneous Dirichlet conditions
on the profile's truncated domain, and solve the dense eigenvalue problem.
The discrete spectrum contains the translational eigenvalue near zero;
anything with real part above a small discretization allowance would expose
unstable point spectrum that the winding computation must also find.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .model import ignition, ignition_deriv
from .profile import ProfileSolution

__all__ = ["fd_operator", "oracle_spectrum", "oracle_check"]


def fd_operator(prof: ProfileSolution, n: int = 600) -> tuple[np.ndarray, np.ndarray]:
    """Dense 2n x 2n real matrix of the discretized operator and its grid."""
    x = np.linspace(prof.x_minus, prof.x_plus, n + 2)
    h = x[1] - x[0]
    xi = x[1:-1]
    p = prof.params
    u, z, _ = prof(xi)
    phi = ignition(u, p)
    dphi = ignition_deriv(u, p)
    a = u - 1.0

    main = np.ones(n)
    off = np.ones(n - 1)
    d2 = (np.diag(-2.0 * main) + np.diag(off, 1) + np.diag(off, -1)) / h**2
    d1 = (np.diag(off, 1) - np.diag(off, -1)) / (2.0 * h)

    Luu = d2 - d1 @ np.diag(a) + p.q * p.k * np.diag(dphi * z)
    Luz = p.q * p.k * np.diag(phi)
    Lzu = -p.k * np.diag(dphi * z)
    Lzz = p.D * d2 + d1 - p.k * np.diag(phi)
    L = np.block([[Luu, Luz], [Lzu, Lzz]])
    return L, xi


def oracle_spectrum(prof: ProfileSolution, n: int = 600) -> np.ndarray:
    L, _ = fd_operator(prof, n)
    return scipy.linalg.eigvals(L)


def oracle_check(prof: ProfileSolution, R: float, *, n: int = 600,
                 re_floor: float = -0.05, re_tol: float = 1e-3) -> dict:
    """Spectrum summary near the imaginary axis against the exclusion radius.

    Returns the eigenvalues with Re >= re_floor, the worst real part, and
    whether every Re >= 0 eigenvalue obeys Re + |Im| <= R.
    """
    ev = oracle_spectrum(prof, n)
    near = ev[ev.real >= re_floor]
    nonneg = ev[ev.real >= 0.0]
    return {
        "near_axis": near[np.argsort(-near.real)],
        "max_re": float(ev.real.max()),
        "stable": bool(ev.real.max() <= re_tol),
        "bound_respected": bool(np.all(nonneg.real + np.abs(nonneg.imag) <= R)) if nonneg.size else True,
        "n_nonneg": int(nonneg.size),
    }
