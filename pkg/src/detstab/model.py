"""Parameter algebra for the nondimensionalized scalar detonation model.

After rescaling, the wave speed is 1 and the viscosity of the u-equation is 1,
so a parameter point is (q, k, D, ea, u_plus, u_ig) with Burgers flux
f(u) = u^2/2 and the smooth Arrhenius ignition cutoff

    phi(u) = exp(-ea / (u - u_ig))   for u > u_ig,  0 otherwise.

The burned end states follow from the Rankine-Hugoniot condition
f(u+) - f(u-) = q + (u+ - u-), which with f Burgers gives the two roots
u- = 1 +- sqrt((1 - u+)^2 - 2q).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

__all__ = [
    "ModelParams",
    "EndStates",
    "Diagnostics",
    "InvalidParameterError",
    "BeyondCJError",
    "nondimensionalize",
    "burned_states",
    "q_max",
    "flux",
    "flux_deriv",
    "ignition",
    "ignition_deriv",
    "ignition_deriv_max",
    "validate",
]

PARAM_KEYS = ("q", "k", "D", "ea", "u_plus", "u_ig")


class InvalidParameterError(ValueError):
    """Parameter point violates a hard constraint (nonpositive rate, etc.)."""


class BeyondCJError(InvalidParameterError):
    """Heat release exceeds the Chapman-Jouguet maximum: no detonation end state."""


@dataclass(frozen=True)
class ModelParams:
    """Free parameters of the rescaled model (wave speed = viscosity = 1).

    q: heat release, k: reaction rate, D: species diffusion, ea: activation
    energy (ea = 0 selects the Heaviside ignition limit handled by
    :mod:`detstab.zero_ea`), u_plus: unburned state, u_ig: ignition threshold.
    """

    q: float
    k: float
    D: float
    ea: float
    u_plus: float
    u_ig: float

    def __post_init__(self):
        vals = asdict(self)
        for name, v in vals.items():
            if not math.isfinite(v):
                raise InvalidParameterError(f"{name} must be finite, got {v}")
        if self.k <= 0:
            raise InvalidParameterError(f"reaction rate k must be > 0, got {self.k}")
        if self.D <= 0:
            raise InvalidParameterError(f"diffusion D must be > 0, got {self.D}")
        if self.ea < 0:
            raise InvalidParameterError(f"activation energy ea must be >= 0, got {self.ea}")

    def to_json(self) -> str:
        return json.dumps({k: getattr(self, k) for k in PARAM_KEYS}, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        missing = [k for k in PARAM_KEYS if k not in d]
        if missing:
            # ea in particular must be explicit; no silent defaults
            raise InvalidParameterError(f"missing parameter keys: {missing}")
        extra = [k for k in d if k not in PARAM_KEYS]
        if extra:
            raise InvalidParameterError(f"unknown parameter keys: {extra}")
        return cls(**{k: float(d[k]) for k in PARAM_KEYS})

    @classmethod
    def from_json(cls, s: str) -> "ModelParams":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class EndStates:
    """Burned-state roots of the Rankine-Hugoniot condition and characteristic speeds."""

    u_minus_strong: float
    u_minus_weak: float
    u_minus_cj: float
    a_minus: float
    a_plus: float


def flux(u):
    """Burgers flux f(u) = u^2/2."""
    return 0.5 * np.asarray(u) ** 2 if np.ndim(u) else 0.5 * u * u


def flux_deriv(u):
    """f'(u) = u; convex with f'' = 1 > 0."""
    return u


def nondimensionalize(s: float, B: float, raw: ModelParams) -> ModelParams:
    """Rescale a parameter point with wave speed s and viscosity B to s = B = 1.

    The scalings are k -> kB/s^2, q -> q/s, D -> D/B, u -> u/s (states and
    ignition threshold) and ea -> ea/s, after which the s and B fields are gone.
    """
    if not (s > 0) or not (B > 0):
        raise InvalidParameterError(f"wave speed and viscosity must be positive, got s={s}, B={B}")
    return ModelParams(
        q=raw.q / s,
        k=raw.k * B / s**2,
        D=raw.D / B,
        ea=raw.ea / s,
        u_plus=raw.u_plus / s,
        u_ig=raw.u_ig / s,
    )


def q_max(u_plus: float) -> float:
    """Chapman-Jouguet boundary value of the heat release: (1 - u_plus)^2 / 2."""
    if u_plus < 0:
        raise InvalidParameterError(f"u_plus must be >= 0, got {u_plus}")
    return 0.5 * (1.0 - u_plus) ** 2


def burned_states(p: ModelParams) -> EndStates:
    """Both Rankine-Hugoniot roots for the burned state, symmetric about 1.

    Raises BeyondCJError when the radicand (1 - u_plus)^2 - 2q is negative.
    """
    radicand = (1.0 - p.u_plus) ** 2 - 2.0 * p.q
    if radicand < 0:
        raise BeyondCJError(
            f"q={p.q} exceeds q_max={q_max(p.u_plus)} at u_plus={p.u_plus}: "
            "no detonation end state exists"
        )
    root = math.sqrt(radicand)
    u_strong = 1.0 + root
    return EndStates(
        u_minus_strong=u_strong,
        u_minus_weak=1.0 - root,
        u_minus_cj=1.0,
        a_minus=u_strong,
        a_plus=p.u_plus,
    )


def ignition(u, p: ModelParams):
    """Ignition factor phi(u); vanishes with all derivatives at u = u_ig.

    Requires ea > 0 (the ea = 0 Heaviside limit lives in detstab.zero_ea).
    Accepts scalars or arrays.
    """
    if p.ea <= 0:
        raise InvalidParameterError("ignition() requires ea > 0; use zero_ea for the Heaviside limit")
    u = np.asarray(u, dtype=float)
    du = u - p.u_ig
    out = np.zeros_like(du)
    mask = du > 0
    out[mask] = np.exp(-p.ea / du[mask])
    return out if out.ndim else float(out)


def ignition_deriv(u, p: ModelParams):
    """phi'(u) = (ea / (u - u_ig)^2) * exp(-ea / (u - u_ig)) above threshold, else 0."""
    if p.ea <= 0:
        raise InvalidParameterError("ignition_deriv() requires ea > 0")
    u = np.asarray(u, dtype=float)
    du = u - p.u_ig
    out = np.zeros_like(du)
    mask = du > 0
    out[mask] = (p.ea / du[mask] ** 2) * np.exp(-p.ea / du[mask])
    return out if out.ndim else float(out)


def ignition_deriv_max(p: ModelParams) -> float:
    """sup_u phi'(u) = (4/ea) e^{-2}, attained at u = u_ig + ea/2."""
    return 4.0 / p.ea * math.exp(-2.0)


@dataclass(frozen=True)
class Diagnostics:
    """Outcome of validate(): never raises, reports what failed and the regime."""

    ok: bool
    issues: tuple[str, ...]
    classification: str  # "strong" | "cj" | "beyond-cj"
    cj_margin: float  # q_max - q
    end_states: EndStates | None = None


def validate(p: ModelParams) -> Diagnostics:
    """Check the physical-region and ordering invariants of a parameter point.

    The requested connection is always the strong-detonation one; the weak
    root is reported alongside for bench diagnostics.
    """
    issues: list[str] = []
    qm = q_max(p.u_plus)
    margin = qm - p.q
    if p.q < 0:
        issues.append(f"q={p.q} negative")
    if p.u_plus < 0:
        issues.append(f"u_plus={p.u_plus} negative")
    if margin < 0:
        classification = "beyond-cj"
        issues.append(f"q={p.q} > q_max={qm}: outside the physical region")
        ends = None
    else:
        classification = "cj" if margin == 0.0 else "strong"
        ends = burned_states(p)
        if not (p.u_plus < p.u_ig):
            issues.append(f"ignition threshold must exceed the unburned state: u_ig={p.u_ig} <= u_plus={p.u_plus}")
        if not (p.u_ig < ends.u_minus_strong):
            issues.append(f"ignition threshold must lie below the burned state: u_ig={p.u_ig} >= u_minus={ends.u_minus_strong}")
        if classification == "cj":
            issues.append("q equals q_max (Chapman-Jouguet): profile solving rejects this point")
    return Diagnostics(
        ok=not issues,
        issues=tuple(issues),
        classification=classification,
        cj_margin=margin,
        end_states=ends,
    )
