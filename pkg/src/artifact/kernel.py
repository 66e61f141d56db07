"""Collision kernel, σ-geometry, angular constants and pointwise inequality checks.

The collision kernel is ``B(v - v*, σ) = |v - v*|^γ b(cos θ)`` with ``b``
supported on ``0 <= θ <= π/2``.  The angular profile belongs to the pinched
family

    sin θ · b(cos θ) = θ^(-1-2s) · (1 + κ θ),   κ = 2 (K - 1) / π,

so that ``K⁻¹ θ^(-1-2s) <= sin θ b(cos θ) <= K θ^(-1-2s)`` holds on
``(0, π/2]`` with the upper bound attained at ``θ = π/2``.  ``K = 1`` gives the
pure power profile ``b(cos θ) = θ^(-1-2s) / sin θ``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import roots_jacobi, roots_legendre

from .errors import (
    CalibrationError,
    ConfigurationError,
    DivergenceError,
    DomainError,
    QuadratureError,
)

if TYPE_CHECKING:  # pragma: no cover
    from .operators import Operators

EPS_MAX = math.sqrt(2.0) / 2.0
_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class KernelConfig:
    """Physical and model parameters of the collision kernel.

    Attributes
    ----------
    gamma : float
        Exponent of the kinetic factor ``|v - v*|^γ`` (``0 < γ <= 2``).
    s : float
        Angular singularity exponent (``0 < s < 1``).
    K : float
        Pinching constant of the angular profile (``K >= 1``).
    theta_min : float
        Polar floor (radians) for node-based angular quadratures.
    Lambda : float or None
        Landau strength constant.  ``None`` means "calibrate on first use".
    """

    gamma: float = 1.0
    s: float = 0.5
    K: float = 1.0
    theta_min: float = 1e-4
    Lambda: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma <= 2.0):
            raise DomainError(f"gamma must satisfy 0 < gamma <= 2, got {self.gamma}")
        if not (0.0 < self.s < 1.0):
            raise DomainError(f"s must satisfy 0 < s < 1, got {self.s}")
        if not (self.K >= 1.0) or not math.isfinite(self.K):
            raise DomainError(f"K must be >= 1, got {self.K}")
        if not (0.0 < self.theta_min < math.pi / 2):
            raise DomainError(f"theta_min must lie in (0, pi/2), got {self.theta_min}")
        if self.Lambda is not None and not (self.Lambda > 0.0 and math.isfinite(self.Lambda)):
            raise DomainError(f"Lambda must be positive, got {self.Lambda}")

    @property
    def kappa(self) -> float:
        """Skew coefficient of the profile, ``2 (K - 1) / π``."""
        return 2.0 * (self.K - 1.0) / math.pi

    def with_lambda(self, value: float | None) -> "KernelConfig":
        return KernelConfig(self.gamma, self.s, self.K, self.theta_min, value)


def theta_of_eps(eps: float) -> float:
    """Deviation angle at the cutoff, ``θ_ε = 2 arcsin ε``."""
    return min(2.0 * math.asin(eps), math.pi / 2)  # clamp the rounding at eps = sqrt(2)/2


def check_eps(eps: float) -> float:
    eps = float(eps)
    if not (0.0 < eps <= EPS_MAX + 1e-15):
        raise DomainError(f"eps must lie in (0, sqrt(2)/2], got {eps}")
    return min(eps, EPS_MAX)


def sin_b(theta: np.ndarray | float, cfg: KernelConfig) -> np.ndarray | float:
    """``sin θ · b(cos θ)`` for the pinched profile (no support check)."""
    return theta ** (-1.0 - 2.0 * cfg.s) * (1.0 + cfg.kappa * theta)


def angular_profile(
    theta: np.ndarray | float,
    cfg: KernelConfig,
    variant: str = "full",
    eps: float | None = None,
) -> np.ndarray | float:
    """Evaluate ``b(cos θ)`` or its cutoff / grazing parts.

    ``variant="cutoff"`` keeps ``sin(θ/2) >= ε`` and ``variant="grazing"`` keeps
    ``sin(θ/2) <= ε``.
    """
    th = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(th)) or np.any(th <= 0.0) or np.any(th > math.pi / 2 + 1e-15):
        raise DomainError("theta must lie in (0, pi/2]")
    b = sin_b(th, cfg) / np.sin(th)
    if variant == "full":
        out = b
    elif variant in ("cutoff", "grazing"):
        if eps is None:
            raise DomainError(f"variant {variant!r} needs eps")
        eps = check_eps(eps)
        half = np.sin(th / 2.0)
        keep = half >= eps if variant == "cutoff" else half <= eps
        out = np.where(keep, b, 0.0)
    else:
        raise DomainError(f"unknown variant {variant!r}")
    return float(out) if np.ndim(theta) == 0 else out


@dataclass(frozen=True)
class AngularConstants:
    """Angular integrals over the unit sphere (see :func:`angular_constants`)."""

    A2: float
    A_eps: float
    A2_eps_full: float
    A2_eps_half: float


def _sphere_integral(cfg: KernelConfig, weight, lo: float, hi: float) -> float:
    """``2π ∫_lo^hi sinθ b(cosθ) weight(θ) dθ`` by adaptive quadrature."""
    if hi <= lo:
        return 0.0
    s = cfg.s
    kap = cfg.kappa
    if lo == 0.0:
        # the weight vanishes like θ²; factor θ^(1-2s) out as an algebraic weight
        def smooth(t: float) -> float:
            return (1.0 + kap * t) * weight(t) / (t * t) if t > 0 else (1.0 + kap * t) * _w0(weight)

        val, _ = integrate.quad(
            smooth, 0.0, hi, weight="alg", wvar=(1.0 - 2.0 * s, 0.0), epsabs=0.0, epsrel=1e-12, limit=200
        )
    else:
        val, _ = integrate.quad(
            lambda t: sin_b(t, cfg) * weight(t), lo, hi, epsabs=0.0, epsrel=1e-12, limit=200
        )
    return 2.0 * math.pi * val


def _w0(weight) -> float:
    t = 1e-6
    return weight(t) / (t * t)


def angular_constants(eps: float | None, cfg: KernelConfig) -> AngularConstants:
    """Angular constants ``A2``, ``A_eps``, ``A2_eps_full`` and ``A2_eps_half``.

    ``A2 = ∫ b sin²θ dσ``; ``A_eps = ∫ b^ε dσ``; ``A2_eps_full = ∫ b^ε sin²θ dσ``
    and ``A2_eps_half = ∫ b^ε sin²(θ/2) dσ``.  With ``eps=None`` only ``A2`` is
    finite and the other entries are ``nan``.
    """
    a2 = _a2_cached(cfg.gamma, cfg.s, cfg.K)
    if eps is None:
        return AngularConstants(a2, math.nan, math.nan, math.nan)
    if eps <= 0.0:
        raise DivergenceError("A_eps diverges for eps <= 0 (non-integrable angular singularity)")
    eps = check_eps(eps)
    th = theta_of_eps(eps)
    hi = math.pi / 2
    a_eps = _sphere_integral(cfg, lambda t: 1.0, th, hi)
    full = _sphere_integral(cfg, lambda t: math.sin(t) ** 2, th, hi)
    half = _sphere_integral(cfg, lambda t: math.sin(t / 2.0) ** 2, th, hi)
    return AngularConstants(a2, a_eps, full, half)


@lru_cache(maxsize=64)
def _a2_cached(gamma: float, s: float, K: float) -> float:
    cfg = KernelConfig(gamma=gamma, s=s, K=K)
    return _sphere_integral(cfg, lambda t: math.sin(t) ** 2, 0.0, math.pi / 2)


def grazing_lambda(cfg: KernelConfig) -> float:
    """Leading-order Landau constant of the grazing limit, ``π 2^(-2s) / (4 (1 - s))``.

    Matching the weak form of the grazing part ``Q_ε`` with the Landau operator
    gives ``Λ ε^(2-2s) ≈ (1/16) ∫ b_ε sin²θ dσ``; the stated value is the
    ``ε → 0`` limit of that ratio for the pinched profile.
    """
    s = cfg.s
    return math.pi * 2.0 ** (-2.0 * s) / (4.0 * (1.0 - s))


def legendre_coefficients(
    cfg: KernelConfig,
    theta_lo: float,
    theta_hi: float,
    nmax: int,
    *,
    subtract: bool = True,
) -> np.ndarray:
    """Legendre moments of the angular profile over a polar band.

    Returns ``c[n] = 2π ∫_lo^hi sinθ b(cosθ) (P_n(cosθ) - δ) dθ`` for
    ``n = 0..nmax`` with ``δ = 1`` when ``subtract`` else ``0``.  The subtracted
    form is finite down to ``θ = 0``; it is integrated with a Gauss–Jacobi rule
    carrying the exact ``θ^(1-2s)`` weight.
    """
    if theta_hi < theta_lo:
        raise DomainError("theta_hi must be >= theta_lo")
    nq = 2 * nmax + 120
    if not subtract:
        if theta_lo <= 0.0:
            raise DivergenceError("unsubtracted moments diverge at theta = 0")
        x, w = roots_legendre(nq)
        th = theta_lo + (theta_hi - theta_lo) * (x + 1.0) / 2.0
        w = w * (theta_hi - theta_lo) / 2.0
        P = _legendre_table(np.cos(th), nmax)
        return 2.0 * math.pi * P @ (w * sin_b(th, cfg))

    def part(a: float) -> np.ndarray:
        if a <= 0.0:
            return np.zeros(nmax + 1)
        x, w = roots_jacobi(nq, 0.0, 1.0 - 2.0 * cfg.s)
        th = a * (x + 1.0) / 2.0
        w = w * (a / 2.0) ** (2.0 - 2.0 * cfg.s)
        D = _legendre_minus_one(th, nmax)
        return 2.0 * math.pi * D @ (w * (1.0 + cfg.kappa * th) / th**2)

    return part(theta_hi) - part(theta_lo)


def _legendre_table(x: np.ndarray, nmax: int) -> np.ndarray:
    P = np.empty((nmax + 1, x.size))
    P[0] = 1.0
    if nmax >= 1:
        P[1] = x
    for n in range(1, nmax):
        P[n + 1] = ((2 * n + 1) * x * P[n] - n * P[n - 1]) / (n + 1)
    return P


def _legendre_minus_one(theta: np.ndarray, nmax: int) -> np.ndarray:
    """``P_n(cos θ) - 1`` via a cancellation-free recurrence."""
    x = np.cos(theta)
    xm1 = -2.0 * np.sin(theta / 2.0) ** 2
    D = np.empty((nmax + 1, theta.size))
    D[0] = 0.0
    if nmax >= 1:
        D[1] = xm1
    for n in range(1, nmax):
        D[n + 1] = ((2 * n + 1) * x * D[n] - n * D[n - 1] + (2 * n + 1) * xm1) / (n + 1)
    return D


@dataclass(frozen=True)
class AngularQuadrature:
    """Product rule on the half sphere ``θ ∈ (0, π/2]``.

    ``theta_weights`` integrate ``θ^(1-2s) u(θ)`` over ``[0, π/2]`` (Gauss–Jacobi),
    which absorbs the grazing singularity of ``b`` once the integrand vanishes
    like ``θ²``; azimuthal nodes are equispaced (trapezoid rule).
    """

    theta_nodes: np.ndarray
    theta_weights: np.ndarray
    n_azimuth: int

    def __post_init__(self) -> None:
        if np.any(self.theta_weights <= 0):
            raise DomainError("theta weights must be positive")
        if self.n_azimuth < 1:
            raise DomainError("n_azimuth must be positive")

    @property
    def azimuths(self) -> np.ndarray:
        return 2.0 * math.pi * np.arange(self.n_azimuth) / self.n_azimuth


def angular_quadrature(cfg: KernelConfig, n_theta: int = 48, n_azimuth: int = 32) -> AngularQuadrature:
    x, w = roots_jacobi(n_theta, 0.0, 1.0 - 2.0 * cfg.s)
    a = math.pi / 2
    th = a * (x + 1.0) / 2.0
    w = w * (a / 2.0) ** (2.0 - 2.0 * cfg.s)
    if th[0] < cfg.theta_min:
        raise ConfigurationError(
            f"{n_theta} polar nodes put the first node below theta_min={cfg.theta_min}; use fewer nodes"
        )
    return AngularQuadrature(th, w, n_azimuth)


# ----------------------------------------------------------------------------
# collision geometry
# ----------------------------------------------------------------------------


def post_collision(v, v_star, sigma) -> tuple[np.ndarray, np.ndarray]:
    """Post-collisional velocities in the σ-representation.

    ``v' = (v+v*)/2 + |v-v*| σ / 2`` and ``v*' = (v+v*)/2 - |v-v*| σ / 2``.
    Accepts single 3-vectors or stacks of shape ``(..., 3)``.
    """
    v = np.asarray(v, dtype=float)
    vs = np.asarray(v_star, dtype=float)
    sg = np.asarray(sigma, dtype=float)
    norm = np.linalg.norm(sg, axis=-1)
    if np.any(np.abs(norm - 1.0) > _UNIT_TOL):
        raise DomainError("sigma must be a unit vector")
    c = 0.5 * (v + vs)
    r = 0.5 * np.linalg.norm(v - vs, axis=-1)[..., None]
    return c + r * sg, c - r * sg


def _any_perpendicular(n: np.ndarray) -> np.ndarray:
    a = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e = a - (a @ n) * n
    return e / np.linalg.norm(e)


def _bracket2(v: np.ndarray) -> np.ndarray:
    """``⟨v⟩² = 1 + |v|²``."""
    return 1.0 + np.sum(np.asarray(v) ** 2, axis=-1)


@dataclass(frozen=True)
class CollisionGeometry:
    """Geometric data attached to one collision ``(v, v*, σ)``."""

    v: np.ndarray
    v_star: np.ndarray
    sigma: np.ndarray
    theta: float
    n: np.ndarray
    omega: np.ndarray
    E_theta: float
    h: float
    j: np.ndarray

    @property
    def v_prime(self) -> np.ndarray:
        return post_collision(self.v, self.v_star, self.sigma)[0]

    def identity_residual(self) -> float:
        """``E(θ) + h (j·ω) sinθ - ⟨v'⟩²`` (zero up to round-off)."""
        lhs = self.E_theta + self.h * float(self.j @ self.omega) * math.sin(self.theta)
        return lhs - float(_bracket2(self.v_prime))


def collision_geometry(v, v_star, sigma) -> CollisionGeometry:
    v = np.asarray(v, dtype=float)
    vs = np.asarray(v_star, dtype=float)
    sg = np.asarray(sigma, dtype=float)
    if abs(np.linalg.norm(sg) - 1.0) > _UNIT_TOL:
        raise DomainError("sigma must be a unit vector")
    q = v - vs
    qn = np.linalg.norm(q)
    if qn == 0.0:
        raise DomainError("v and v_star coincide; the collision direction is undefined")
    n = q / qn
    cos_t = float(np.clip(sg @ n, -1.0, 1.0))
    theta = math.acos(cos_t)
    perp = sg - cos_t * n
    perp -= (perp @ n) * n  # second Gram-Schmidt pass for nearly grazing σ
    pn = np.linalg.norm(perp)
    omega = perp / pn if pn > 1e-14 else _any_perpendicular(n)
    vv = float(v @ v)
    ss = float(vs @ vs)
    E = (1.0 + vv) * math.cos(theta / 2) ** 2 + (1.0 + ss) * math.sin(theta / 2) ** 2
    h = float(np.linalg.norm(np.cross(v, vs)))  # = sqrt(|v|²|v*|² - (v·v*)²) without cancellation
    u = v + vs
    un = np.linalg.norm(u)
    j = None
    if un > 1e-14:
        u = u / un
        ju = u - (u @ n) * n
        jn = np.linalg.norm(ju)
        if jn > 1e-14:
            j = ju / jn
    if j is None:
        j = _any_perpendicular(n)
    return CollisionGeometry(v, vs, sg, theta, n, omega, E, h, j)


def primededuct_sides(geom: CollisionGeometry, p: float) -> tuple[float, float]:
    """Left and right sides of the ``⟨v'⟩^{2p}`` increment bound."""
    if p < 2.0:
        raise DomainError("the increment bound requires p >= 2")
    bv = float(_bracket2(geom.v))
    bs = float(_bracket2(geom.v_star))
    bvp = float(_bracket2(geom.v_prime))
    th = geom.theta
    c2 = math.cos(th / 2) ** 2
    s2 = math.sin(th / 2) ** 2
    lhs = bvp**p - bv**p
    coef = 0.5 * max(2.0 ** (p - 3.0), 1.0) * p * (p - 1.0) + 2.0 ** (p - 1.0)
    rhs = (
        -(bv**p) * (1.0 - c2**p)
        + bs**p * s2**p
        + p * geom.E_theta ** (p - 1.0) * geom.h * float(geom.j @ geom.omega) * math.sin(th)
        + coef * bs ** (p - 1.0) * bv ** (p - 1.0) * math.sin(th) ** 2
    )
    return lhs, rhs


def check_primededuct(geom: CollisionGeometry, p: float) -> bool:
    """True iff the ``⟨v'⟩^{2p} - ⟨v⟩^{2p}`` upper bound holds (up to round-off)."""
    lhs, rhs = primededuct_sides(geom, p)
    scale = float(_bracket2(geom.v)) ** p + float(_bracket2(geom.v_star)) ** p
    return lhs <= rhs + 1e-12 * scale


def random_geometries(
    n: int, rng: np.random.Generator, vmax: float = 5.0
) -> Iterable[CollisionGeometry]:
    """Random collisions with ``|v|, |v*| <= vmax`` and ``θ`` uniform on ``[0, π/2]``."""
    for _ in range(n):
        v = _ball_point(rng, vmax)
        vs = _ball_point(rng, vmax)
        q = v - vs
        if np.linalg.norm(q) < 1e-9:
            vs = vs + 1e-3
            q = v - vs
        nn = q / np.linalg.norm(q)
        th = rng.uniform(0.0, math.pi / 2)
        e1 = _any_perpendicular(nn)
        e2 = np.cross(nn, e1)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        sg = math.cos(th) * nn + math.sin(th) * (math.cos(phi) * e1 + math.sin(phi) * e2)
        sg /= np.linalg.norm(sg)
        yield collision_geometry(v, vs, sg)


def _ball_point(rng: np.random.Generator, radius: float) -> np.ndarray:
    d = rng.standard_normal(3)
    d /= np.linalg.norm(d)
    return d * radius * rng.uniform() ** (1.0 / 3.0)


# ----------------------------------------------------------------------------
# moment functional Θ(v, v*)
# ----------------------------------------------------------------------------


def theta_functional(
    v,
    v_star,
    p: float,
    cfg: KernelConfig,
    quad: AngularQuadrature | None = None,
    *,
    chunk: int = 256,
) -> np.ndarray:
    """``Θ(v,v*) = ∫ b |v-v*|^γ (⟨v'⟩^{2p} + ⟨v*'⟩^{2p} - ⟨v⟩^{2p} - ⟨v*⟩^{2p}) dσ``.

    Vectorised over leading dimensions of ``v`` and ``v_star`` (shape ``(M, 3)``).
    """
    quad = quad or angular_quadrature(cfg)
    v = np.atleast_2d(np.asarray(v, dtype=float))
    vs = np.atleast_2d(np.asarray(v_star, dtype=float))
    out = np.empty(v.shape[0])
    th = quad.theta_nodes
    phi = quad.azimuths
    ct, st = np.cos(th), np.sin(th)
    cp, sp = np.cos(phi), np.sin(phi)
    wt = quad.theta_weights * (1.0 + cfg.kappa * th) / th**2
    for a in range(0, v.shape[0], chunk):
        vb, sb = v[a : a + chunk], vs[a : a + chunk]
        q = vb - sb
        qn = np.linalg.norm(q, axis=1)
        safe = np.where(qn > 0, qn, 1.0)
        n = q / safe[:, None]
        e1 = np.where(np.abs(n[:, :1]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
        e1 = e1 - np.sum(e1 * n, axis=1, keepdims=True) * n
        e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
        e2 = np.cross(n, e1)
        # σ[m, i, j, :] for polar node i and azimuth j
        ring = cp[None, None, :, None] * e1[:, None, None, :] + sp[None, None, :, None] * e2[:, None, None, :]
        sig = ct[None, :, None, None] * n[:, None, None, :] + st[None, :, None, None] * ring
        c = 0.5 * (vb + sb)[:, None, None, :]
        r = 0.5 * qn[:, None, None, None]
        bp = _bracket2(c + r * sig) ** p
        bsp = _bracket2(c - r * sig) ** p
        base = (_bracket2(vb) ** p + _bracket2(sb) ** p)[:, None]
        fbar = (bp + bsp).mean(axis=2) - base
        out[a : a + chunk] = 2.0 * math.pi * qn**cfg.gamma * (fbar @ wt)
    return out


def theta_bound_sides(v, v_star, p: float, cfg: KernelConfig) -> tuple[np.ndarray, np.ndarray]:
    """``(Θ, bound)`` arrays; raises :class:`QuadratureError` if the rule is unconverged."""
    if p < 3.0:
        raise DomainError("the Θ bound requires p >= 3")
    v = np.atleast_2d(np.asarray(v, dtype=float))
    vs = np.atleast_2d(np.asarray(v_star, dtype=float))
    q1 = angular_quadrature(cfg, 40, 32)
    q2 = angular_quadrature(cfg, 56, 48)
    t1 = theta_functional(v, vs, p, cfg, q1)
    t2 = theta_functional(v, vs, p, cfg, q2)
    a2 = angular_constants(None, cfg).A2
    bv = _bracket2(v) ** 0.5
    bs = _bracket2(vs) ** 0.5
    scale = np.linalg.norm(v - vs, axis=1) ** cfg.gamma * a2 * (bv ** (2 * p) + bs ** (2 * p))
    if np.any(np.abs(t1 - t2) > 1e-8 * scale + 1e-300):
        raise QuadratureError("Θ quadrature did not converge")
    rhs = -0.25 * a2 * (bv ** (2 * p + cfg.gamma) + bs ** (2 * p + cfg.gamma)) + 2.0 ** (
        2 * p + 1
    ) * a2 * bv ** (2 * p) * bs ** (2 * p)
    return t2, rhs


def check_theta_bound(v, v_star, p: float, cfg: KernelConfig) -> bool | np.ndarray:
    """True iff ``Θ <= -A₂/4 (⟨v⟩^{2p+γ} + ⟨v*⟩^{2p+γ}) + 2^{2p+1} A₂ ⟨v⟩^{2p} ⟨v*⟩^{2p}``."""
    single = np.ndim(v) == 1
    theta, rhs = theta_bound_sides(v, v_star, p, cfg)
    ok = theta <= rhs + 1e-12 * np.abs(rhs)
    return bool(ok[0]) if single else ok


# ----------------------------------------------------------------------------
# Landau-constant calibration
# ----------------------------------------------------------------------------


@dataclass
class CalibrationResult:
    """Outcome of :func:`calibrate_lambda`."""

    Lambda: float
    eps: list[float]
    per_eps: list[float]
    residuals: list[float]
    extrapolated: bool
    stable: bool
    pair_deviation: float
    notes: list[str] = field(default_factory=list)


def calibrate_lambda(
    eps_list: Sequence[float],
    family: Sequence[np.ndarray],
    *,
    ops: "Operators",
    use_cutoff_part: bool = False,
    raise_on_unstable: bool = True,
) -> CalibrationResult:
    """Fit ``Λ`` so that ``ε^(2-2s) Λ Q_L(f,f)`` matches the grazing part ``Q_ε(f,f)``.

    For each ε the scalar ``Λ(ε)`` minimises ``Σ_f ‖ε^(2-2s) Λ Q_L¹(f,f) - Q_ε(f,f)‖²_{L¹}``
    (``Q_L¹`` is the Landau operator with unit constant).  Fits at consecutive
    ``ε`` values must agree within 5 %; when they drift by more than 1 % the
    returned constant is the linear-in-ε extrapolation to ``ε = 0``.

    ``use_cutoff_part=True`` substitutes ``Q^ε`` for ``Q_ε`` (negative control).
    """
    from scipy.optimize import minimize_scalar

    eps_arr = [check_eps(e) for e in eps_list]
    if len(eps_arr) < 2 or any(b >= a for a, b in zip(eps_arr, eps_arr[1:])):
        raise ConfigurationError("eps_list must hold at least two strictly decreasing values")
    if any(e > 0.3 + 1e-12 for e in eps_arr):
        raise ConfigurationError("calibration eps values must be <= 0.3")
    if len(family) == 0:
        raise ConfigurationError("calibration family is empty")
    s = ops.cfg.s
    unit = [ops.q_landau(f, f, backend=ops.calibration_backend, Lambda=1.0) for f in family]
    per, res = [], []
    for e in eps_arr:
        if use_cutoff_part:
            targets = [ops.q_cutoff(f, f, e) for f in family]
        else:
            targets = [ops.q_grazing(f, f, e) for f in family]
        scale = e ** (2.0 - 2.0 * s)
        xs = [scale * u for u in unit]

        def loss(lam: float) -> float:
            return sum(ops.grid.l1(lam * x - y) ** 2 for x, y in zip(xs, targets))

        # least-squares (L²) start value, then the L¹ objective
        num = sum(float(np.sum(x * y)) for x, y in zip(xs, targets))
        den = sum(float(np.sum(x * x)) for x in xs)
        lam0 = num / den if den > 0 else 1.0
        width = max(abs(lam0), 1e-3)
        opt = minimize_scalar(loss, bracket=(lam0 - 0.1 * width, lam0 + 0.1 * width), tol=1e-10)
        lam = float(opt.x)
        norm = math.sqrt(sum(ops.grid.l1(y) ** 2 for y in targets))
        per.append(lam)
        res.append(math.sqrt(max(float(opt.fun), 0.0)) / norm if norm > 0 else math.inf)
    notes: list[str] = []
    devs = [abs(a - b) / abs(b) if b != 0 else math.inf for a, b in zip(per, per[1:])]
    pair_dev = max(devs)
    residual_ok = all(b < a for a, b in zip(res, res[1:]))
    stable = pair_dev <= 0.05 and residual_ok and all(p > 0 for p in per)
    extrapolated = pair_dev > 0.01
    if extrapolated:
        A = np.vstack([np.ones(len(eps_arr)), np.asarray(eps_arr)]).T
        coef, *_ = np.linalg.lstsq(A, np.asarray(per), rcond=None)
        lam_final = float(coef[0])
        notes.append("fits drift with eps; returning the linear extrapolation to eps = 0")
    else:
        lam_final = per[-1]
    if not residual_ok:
        notes.append("relative fit residual does not decrease as eps decreases")
    if not stable and raise_on_unstable:
        raise CalibrationError(
            f"Lambda calibration unstable: per-eps values {per}, relative residuals {res}"
        )
    return CalibrationResult(lam_final, eps_arr, per, res, extrapolated, stable, pair_dev, notes)
