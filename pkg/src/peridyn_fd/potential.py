"""Double-well bond potential, influence functions and derived constants.

The bond energy profile is ``f(r) = c (1 - exp(-beta r))``: concave, zero at
the origin, with slope ``c beta`` at zero and limit ``c`` at infinity.  The
composite ``F1(S) = f(S**2)`` is convex near zero and concave beyond its
inflection point ``rbar``; every constant used by the error analysis is
computed from ``F1`` and from radial moments of the influence function.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import ConfigError, DomainError

POTENTIAL_KINDS = ("exponential",)
INFLUENCE_KINDS = ("constant", "ramp")

# f decays like exp(-beta r); beyond r = 60/beta every derivative is < 1e-26
_SCAN_POINTS = 4001
_ROOT_RTOL = 1e-12


@dataclass(frozen=True)
class PotentialSpec:
    c: float = 1.0
    beta: float = 1.0
    kind: str = "exponential"

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ConfigError(f"unknown potential kind {self.kind!r}")
        if not (self.c > 0 and self.beta > 0):
            raise ConfigError("potential needs c > 0 and beta > 0")

    @property
    def f_inf(self) -> float:
        return self.c

    @property
    def fprime0(self) -> float:
        return self.c * self.beta

    def f_derivatives(self, r, order: int = 0):
        """Return the ``order``-th derivative of f at r (r may be an array)."""
        r = np.asarray(r, dtype=float)
        e = np.exp(-self.beta * r)
        if order == 0:
            return -self.c * np.expm1(-self.beta * r)
        return self.c * (-1) ** (order + 1) * self.beta**order * e

    @property
    def scan_limit(self) -> float:
        # upper end of the s-axis scan for F1 critical points
        return math.sqrt(60.0 / self.beta)


@dataclass(frozen=True)
class InfluenceSpec:
    kind: str = "constant"
    M: float = 1.0

    def __post_init__(self):
        if self.kind not in INFLUENCE_KINDS:
            raise ConfigError(f"unknown influence kind {self.kind!r}")
        if self.M <= 0:
            raise ConfigError("influence bound M must be positive")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        inside = (r >= 0) & (r <= 1)
        if self.kind == "constant":
            val = np.full_like(r, self.M)
        else:
            val = self.M * (1.0 - r)
        return np.where(inside, val, 0.0)


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def f_value(r, spec: PotentialSpec):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("f is defined for r >= 0 only")
    out = spec.f_derivatives(r, 0)
    return float(out) if out.ndim == 0 else out


def F1_derivatives(s, spec: PotentialSpec, orders=(1, 2, 3)):
    """Derivatives of ``F1(s) = f(s**2)`` by the chain rule.

    Returns a tuple with one entry per requested order (1 to 4).
    """
    s = np.asarray(s, dtype=float)
    r = s * s
    f1, f2, f3, f4 = (spec.f_derivatives(r, k) for k in (1, 2, 3, 4))
    table = {
        1: 2 * s * f1,
        2: 2 * f1 + 4 * r * f2,
        3: 12 * s * f2 + 8 * s * r * f3,
        4: 12 * f2 + 48 * r * f3 + 16 * r * r * f4,
    }
    out = tuple(table[k] for k in orders)
    if s.ndim == 0:
        out = tuple(float(x) for x in out)
    return out


def F1_prime(s, spec: PotentialSpec):
    """First derivative of F1 only; the hot path of the force evaluation."""
    r = s * s
    return 2.0 * spec.c * spec.beta * s * np.exp(-spec.beta * r)


def F1_second(s, spec: PotentialSpec):
    r = s * s
    return 2.0 * spec.c * spec.beta * (1.0 - 2.0 * spec.beta * r) * np.exp(-spec.beta * r)


def _order(spec, k):
    return lambda s: F1_derivatives(s, spec, orders=(k,))[0]


def _positive_roots(g, upper: float) -> list[float]:
    """Roots of g on (0, upper] located by a sign scan and bisection."""
    grid = np.linspace(0.0, upper, _SCAN_POINTS)[1:]
    vals = g(grid)
    roots = []
    for a, b, ga, gb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if ga == 0.0:
            roots.append(float(a))
        elif ga * gb < 0:
            roots.append(optimize.bisect(g, a, b, xtol=1e-300, rtol=_ROOT_RTOL, maxiter=400))
    return roots


def inflection_point(spec: PotentialSpec, numeric: bool = False) -> float:
    """Positive root of ``f'(r^2) + 2 r^2 f''(r^2) = 0``."""
    if spec.kind == "exponential" and not numeric:
        return 1.0 / math.sqrt(2.0 * spec.beta)
    roots = _positive_roots(_order(spec, 2), spec.scan_limit)
    if not roots:
        raise ConfigError("inflection point not bracketed in (0, R_max)")
    return roots[0]


def critical_strain(bond_length, spec: PotentialSpec):
    bond_length = np.asarray(bond_length, dtype=float)
    if np.any(bond_length <= 0):
        raise DomainError("bond length must be positive")
    out = inflection_point(spec) / np.sqrt(bond_length)
    return float(out) if out.ndim == 0 else out


def derivative_bounds(spec: PotentialSpec) -> tuple[float, float, float]:
    """Return (C1, C2, C3), the suprema of |F1'|, |F1''| and |F1'''|."""
    C1 = abs(F1_derivatives(inflection_point(spec), spec, orders=(1,))[0])
    upper = spec.scan_limit
    f2, f3 = _order(spec, 2), _order(spec, 3)
    # extrema of F1'' sit at zeros of F1''', extrema of F1''' at zeros of F1''''
    cands2 = [abs(f2(0.0))] + [abs(f2(u)) for u in _positive_roots(f3, upper)]
    cands3 = [abs(f3(0.0))] + [abs(f3(u)) for u in _positive_roots(_order(spec, 4), upper)]
    return C1, max(cands2), max(cands3)


def influence_moment(alpha: float, d: int, influence: InfluenceSpec) -> float:
    """Normalised moment ``(1/omega_d) int_{H1} J(|xi|) |xi|^-alpha dxi``.

    In polar form this is ``d * int_0^1 J(r) r^(d-1-alpha) dr``; the power is
    handled as a quadrature weight so the endpoint singularity is exact.
    """
    if alpha >= d:
        raise DomainError(f"moment diverges for alpha={alpha} >= d={d}")
    p = d - 1 - alpha
    val, _ = integrate.quad(
        lambda r: float(influence(r)), 0.0, 1.0, weight="alg", wvar=(p, 0.0),
        epsabs=0.0, epsrel=1e-12, limit=200,
    )
    return d * val


def lattice_moment(alpha: float, d: int, influence: InfluenceSpec, h_over_eps: float) -> float:
    """Midpoint-lattice counterpart of :func:`influence_moment`.

    Finite for every alpha; used where the continuum moment diverges (d=1).
    """
    m = int(math.floor(1.0 / h_over_eps + 1e-9))
    axes = [np.arange(-m, m + 1)] * d
    k = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    r = np.linalg.norm(k, axis=1) * h_over_eps
    keep = (r > 0) & (r <= 1 + 1e-12)
    r = r[keep]
    return float(np.sum(h_over_eps**d * influence(r) * r**-alpha) / unit_ball_volume(d))


def cbar(spec: PotentialSpec, influence: InfluenceSpec, d: int, h_over_eps: float | None = None) -> float:
    """``C2 * Jbar_1``, the L2 Lipschitz scale of the force.

    For d=1 the continuum moment diverges; pass ``h_over_eps`` to use the
    lattice moment of the discrete stencil instead.
    """
    C2 = derivative_bounds(spec)[1]
    if d > 1:
        return C2 * influence_moment(1.0, d, influence)
    if h_over_eps is None:
        raise DomainError("Jbar_1 diverges in d=1; pass h_over_eps for the lattice value")
    return C2 * lattice_moment(1.0, d, influence, h_over_eps)


def lefm_constants(spec: PotentialSpec, influence: InfluenceSpec, d: int) -> tuple[float, float, float]:
    """Lame moduli and fracture energy of the vanishing-horizon limit."""
    if d not in (2, 3):
        raise DomainError("LEFM constants are only defined for d = 2, 3")
    mom, _ = integrate.quad(lambda r: r**d * float(influence(r)), 0.0, 1.0, epsabs=0.0, epsrel=1e-13)
    mu = spec.fprime0 * mom / 5.0
    Gc = 1.5 * spec.f_inf * mom
    return mu, mu, Gc


def jbar_exponents(gamma: float) -> list[float]:
    return [0.5, 1.0 - gamma, 1.0, 1.5 - gamma]


def _alpha_key(a: float) -> str:
    return f"{a:g}"


@dataclass
class ConstantsReport:
    rbar: float
    C1: float
    C2: float
    C3: float
    Jbar: dict[str, float]
    Cbar: float
    mu: float | None = None
    lam: float | None = None
    Gc: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "rbar": self.rbar, "C1": self.C1, "C2": self.C2, "C3": self.C3,
            "Jbar": dict(self.Jbar), "Cbar": self.Cbar,
        }
        if self.mu is not None:
            out.update(mu=self.mu, **{"lambda": self.lam}, Gc=self.Gc)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_float17)


def _float17(x):
    return float(f"{x:.17g}")


def constants_report(spec: PotentialSpec, influence: InfluenceSpec, d: int,
                     gamma: float = 1.0, h_over_eps: float | None = None) -> ConstantsReport:
    C1, C2, C3 = derivative_bounds(spec)
    notes = [f"potential profile: {spec.kind} f(r) = c(1 - exp(-beta r)), c={spec.c}, beta={spec.beta}"]
    jbar = {}
    for a in jbar_exponents(gamma):
        key = _alpha_key(a)
        if key in jbar:
            continue
        if a < d:
            jbar[key] = influence_moment(a, d, influence)
        elif h_over_eps is not None:
            jbar[key] = lattice_moment(a, d, influence, h_over_eps)
            notes.append(f"Jbar[{key}] diverges for d={d}; lattice value at h/eps={h_over_eps:g} reported")
        else:
            jbar[key] = math.inf
    Cb = C2 * jbar[_alpha_key(1.0)]
    report = ConstantsReport(inflection_point(spec), C1, C2, C3, jbar, Cb, notes=notes)
    if d in (2, 3):
        report.mu, report.lam, report.Gc = lefm_constants(spec, influence, d)
    else:
        notes.append(f"LEFM constants undefined for d={d}")
    return report
