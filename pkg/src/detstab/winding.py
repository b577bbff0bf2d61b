"""Semicircular contours and certified winding numbers.

The search region is B(0, R) intersected with {Re lam >= 0}; its boundary is
traversed counterclockwise (imaginary-axis segment downward on the left of
the region, arc from -iR through R to +iR).  The winding number of the Evans
image of that curve equals the number of unstable eigenvalues enclosed.

Argument increments are summed from Im log E between consecutive nodes; any
step larger than 0.2 rad is bisected through a caller-supplied evaluator
until resolved.  Steps below pi/2 guarantee a correct count (no aliasing of
the principal branch), so the 0.2 threshold certifies with a wide margin.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import NearZeroOnContourError, UncertifiedWindingError
from .model import PARAM_KEYS

__all__ = [
    "Contour",
    "WindingResult",
    "build_contour",
    "winding_number",
    "stability_report",
]

SCHEMA_VERSION = 1

ARG_STEP_TOL = 0.2
MAX_REFINE_DEPTH = 12
NEAR_ZERO = 1e-14
RESIDUAL_TOL = 1e-3


@dataclass(frozen=True)
class Contour:
    """Closed node cycle on the boundary of the right-half disk of radius R.

    nodes: the full cycle, counterclockwise, not repeating the start;
    explicit_nodes: the Im >= 0 path (origin -> +iR -> R) actually evaluated
    when conjugate symmetry is used.
    """

    radius: float
    nodes: np.ndarray
    explicit_nodes: np.ndarray
    symmetric: bool

    def midpoint(self, a: complex, b: complex) -> complex:
        """Point on the contour halfway between two adjacent nodes."""
        on_axis = abs(a.real) < 1e-12 * self.radius and abs(b.real) < 1e-12 * self.radius
        if on_axis:
            return complex(0.0, 0.5 * (a.imag + b.imag))
        ta, tb = cmath.phase(a), cmath.phase(b)
        return self.radius * cmath.exp(0.5j * (ta + tb))


def _axis_arc_split(R: float, n: int) -> tuple[int, int]:
    # allocate nodes to the axis segment and the quarter arc by length
    frac_axis = 1.0 / (1.0 + 0.5 * math.pi)
    m_axis = max(3, round(n * frac_axis))
    return m_axis, n - m_axis


def _geometric_grid(n: int, ratio: float = 1.2) -> np.ndarray:
    """n+1 points on [0, 1], spacing growing by `ratio` away from 0."""
    steps = ratio ** np.arange(n)
    g = np.concatenate([[0.0], np.cumsum(steps)])
    return g / g[-1]


def build_contour(R: float, n: int = 120, symmetric: bool = True) -> Contour:
    """Contour with n explicitly evaluated first-quadrant mesh points.

    Axis nodes cluster geometrically (ratio 1.2) toward the origin, where
    Evans images develop noses for near-limiting heat release; arc nodes are
    uniform in angle.  The full cycle after conjugate reflection has 2n
    nodes, with 0, +-iR and R among them.  symmetric=False evaluates every
    node explicitly instead of reflecting the lower half.
    """
    if not R > 0:
        raise ValueError(f"radius must be positive, got {R}")
    if n < 8:
        raise ValueError(f"need at least 8 first-quadrant nodes, got {n}")
    m_axis, m_arc = _axis_arc_split(R, n)
    axis = 1j * R * _geometric_grid(m_axis)                      # 0 .. iR
    theta = np.linspace(0.5 * math.pi, 0.0, m_arc + 1)           # iR .. R
    arc = R * np.exp(1j * theta)
    upper = np.concatenate([axis, arc[1:]])                      # n+1 nodes, 0 .. R
    # counterclockwise cycle: 0, down the axis, around the arc to R, back up
    lower = np.conj(upper)
    cycle = np.concatenate([lower, upper[-2:0:-1]])
    cycle = np.where(np.abs(cycle.real) < 1e-15 * R, 1j * cycle.imag, cycle)
    upper = np.where(np.abs(upper.real) < 1e-15 * R, 1j * upper.imag, upper)
    explicit = upper if symmetric else cycle
    return Contour(radius=float(R), nodes=cycle, explicit_nodes=explicit,
                   symmetric=symmetric)


@dataclass(frozen=True)
class WindingResult:
    winding: int
    max_arg_step: float
    node_count: int
    refinement_rounds: int
    certified: bool
    residual: float


def _arg_steps(values: np.ndarray) -> np.ndarray:
    ratios = np.roll(values, -1) / values
    return np.angle(ratios)


def winding_number(trace, refine=None) -> WindingResult:
    """Certified winding number of a closed Evans trace.

    refine(lam_lo, lam_hi) must return (lam_mid, E_mid) on the contour
    between two adjacent nodes; without it, traces whose argument steps
    exceed 0.2 rad raise UncertifiedWindingError.
    """
    nodes = list(np.asarray(trace.nodes, dtype=complex))
    # use the radial-phase-free channel when available: the removed factor
    # is single-valued per node, hence winding-neutral on a closed cycle,
    # and stripping it keeps argument steps slow enough to resolve
    raw = getattr(trace, "winding_values", None)
    if raw is None:
        raw = trace.values
    values = list(np.asarray(raw, dtype=complex))
    if len(nodes) < 3:
        raise ValueError("winding needs at least 3 contour nodes")
    small = np.abs(np.asarray(values))
    if small.min() < NEAR_ZERO:
        lam_bad = nodes[int(np.argmin(small))]
        raise NearZeroOnContourError(
            f"|E| = {small.min():.2e} at lam = {lam_bad}: zero too close to the contour; "
            "perturb the radius and re-run", lam=lam_bad)

    depths = [0] * len(nodes)
    rounds = 0
    while True:
        vals = np.asarray(values)
        steps = _arg_steps(vals)
        bad = np.where(np.abs(steps) > ARG_STEP_TOL)[0]
        if bad.size == 0:
            break
        if refine is None:
            raise UncertifiedWindingError(
                f"argument step {np.abs(steps).max():.3f} rad exceeds {ARG_STEP_TOL} and no "
                "refinement callback was given",
                segment=(nodes[bad[0]], nodes[(bad[0] + 1) % len(nodes)]))
        rounds += 1
        for i in sorted(bad, reverse=True):
            j = (i + 1) % len(nodes)
            if depths[i] >= MAX_REFINE_DEPTH:
                raise UncertifiedWindingError(
                    f"refinement depth {MAX_REFINE_DEPTH} exhausted on segment "
                    f"({nodes[i]}, {nodes[j]})", segment=(nodes[i], nodes[j]))
            lam_mid, E_mid = refine(nodes[i], nodes[j])
            if abs(E_mid) < NEAR_ZERO:
                raise NearZeroOnContourError(
                    f"|E| = {abs(E_mid):.2e} at refined lam = {lam_mid}", lam=lam_mid)
            d = depths[i] + 1
            nodes.insert(i + 1, lam_mid)
            values.insert(i + 1, E_mid)
            depths[i] = d
            depths.insert(i + 1, d)

    steps = _arg_steps(np.asarray(values))
    total = float(steps.sum())
    w = total / (2.0 * math.pi)
    residual = abs(w - round(w))
    certified = residual <= RESIDUAL_TOL and float(np.abs(steps).max()) <= ARG_STEP_TOL
    return WindingResult(
        winding=int(round(w)),
        max_arg_step=float(np.abs(steps).max()),
        node_count=len(nodes),
        refinement_rounds=rounds,
        certified=certified,
        residual=residual,
    )


def stability_report(params, R: float, result: WindingResult,
                     L: float | None = None, M: float | None = None) -> dict:
    """Machine-readable verdict: winding 0 inside the exclusion radius means
    no unstable spectrum (the translational zero is already removed)."""
    if not result.certified:
        verdict = "inconclusive"
    elif result.winding == 0:
        verdict = "spectrally stable"
    else:
        verdict = f"unstable: {result.winding} eigenvalue(s) in the right half-plane"
    rec = {
        "schema_version": SCHEMA_VERSION,
        "params": {k: getattr(params, k) for k in PARAM_KEYS},
        "R": R,
        "winding": result.winding,
        "max_arg_step": result.max_arg_step,
        "node_count": result.node_count,
        "refinement_rounds": result.refinement_rounds,
        "certified": result.certified,
        "verdict": verdict,
    }
    if L is not None:
        rec["L"] = L
    if M is not None:
        rec["M"] = M
    return rec
