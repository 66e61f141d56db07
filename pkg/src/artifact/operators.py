"""Discrete collision operators on a :class:`~artifact.vgrid.VelocityGrid`.

:class:`Operators` bundles the cutoff Boltzmann operator ``Q^ε`` (and its
gain/loss split), the grazing part ``Q_ε``, the full non-cutoff operator, the
Landau operator ``Q_L`` (three backends), the compensated operator
``M^ε = Q^ε + ε^{2-2s} Q_L`` and the defect ``Υ``.

All operators are bilinear; arguments may be :class:`GridField` objects or
plain ``(N, N, N)`` arrays and results are plain arrays.  Boltzmann-type
operators and the ``"sigma"`` Landau backend use the Funk–Hecke spectral
engine of :mod:`artifact._spectral`; the relative speed is truncated at
``settings.R`` in every backend.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import fft as sfft
from scipy.special import roots_jacobi, roots_legendre, spherical_jn

from ._spectral import KernelSet, OperatorSettings, SpectralEngine, SpectralLandau, direction_rule
from .errors import ConfigurationError, DomainError, UnsupportedCombinationError
from .kernel import (
    AngularQuadrature,
    KernelConfig,
    angular_constants,
    angular_quadrature,
    check_eps,
    grazing_lambda,
    legendre_coefficients,
    sin_b,
    theta_of_eps,
)
from .vgrid import GridField, VelocityGrid, interpolate

__all__ = [
    "LandauCoefficients",
    "OperatorSettings",
    "Operators",
    "QuadratureTable",
]

LANDAU_BACKENDS = ("A", "B", "sigma")


def _arr(f) -> np.ndarray:
    return f.values if isinstance(f, GridField) else np.asarray(f, dtype=float)


@dataclass(frozen=True)
class LandauCoefficients:
    """``a(z) = Λ|z|^{γ+2}(I - ẑ⊗ẑ)``, ``b(z) = -2Λ|z|^γ z``, ``c(z) = -2Λ(γ+3)|z|^γ``."""

    Lambda: float
    gamma: float

    def a(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        r2 = np.sum(z * z, axis=-1)[..., None, None]
        outer = z[..., :, None] * z[..., None, :]
        eye = np.eye(3)
        r = np.sqrt(r2)
        return self.Lambda * (r ** (self.gamma + 2.0) * eye - r**self.gamma * outer)

    def b(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        r = np.linalg.norm(z, axis=-1)[..., None]
        return -2.0 * self.Lambda * r**self.gamma * z

    def c(self, z) -> np.ndarray | float:
        z = np.asarray(z, dtype=float)
        return -2.0 * self.Lambda * (self.gamma + 3.0) * np.linalg.norm(z, axis=-1) ** self.gamma


@dataclass(frozen=True)
class QuadratureTable:
    """Collision quadrature used by the operators.

    ``sigma_nodes``/``sigma_weights`` is the full Lebedev direction rule (the
    spectral engine keeps one node of each antipodal pair), ``rho_*`` the
    radial Gauss–Jacobi rule with weight ``ρ^{2+γ}`` on ``[0, R]`` and
    ``angular`` the polar/azimuthal product rule used by pointwise checks.
    """

    angular: AngularQuadrature
    sigma_nodes: np.ndarray
    sigma_weights: np.ndarray
    rho_nodes: np.ndarray
    rho_weights: np.ndarray


def _conv_offsets(N: int, h: float) -> np.ndarray:
    """Lattice offsets ``m h`` on the doubled periodic box, shape ``(3, 2N, 2N, 2N)``."""
    m = np.fft.fftfreq(2 * N, 1.0 / (2 * N)) * h
    return np.stack(np.meshgrid(m, m, m, indexing="ij"))


class _Convolver:
    """Exact aperiodic lattice convolutions ``(k * f)(v_i) = h³ Σ_j k(v_i - v_j) f(v_j)``."""

    def __init__(self, grid: VelocityGrid):
        self.N = grid.N
        self.vol = grid.cell_volume
        self.Z = _conv_offsets(grid.N, grid.h)
        self.s = (2 * grid.N,) * 3

    def transform_kernel(self, k: np.ndarray) -> np.ndarray:
        return sfft.rfftn(k) * self.vol

    def transform(self, f: np.ndarray) -> np.ndarray:
        return sfft.rfftn(f, s=self.s)

    def apply(self, Khat: np.ndarray, Fhat: np.ndarray) -> np.ndarray:
        N = self.N
        return sfft.irfftn(Khat * Fhat, s=self.s)[:N, :N, :N]


def _fd_matrix(N: int, h: float) -> np.ndarray:
    """Fourth-order first-derivative matrix with one-sided end stencils."""
    D = np.zeros((N, N))
    for i in range(2, N - 2):
        D[i, i - 2 : i + 3] = [1.0, -8.0, 0.0, 8.0, -1.0]
    D[0, :5] = [-25.0, 48.0, -36.0, 16.0, -3.0]
    D[1, :5] = [-3.0, -10.0, 18.0, -6.0, 1.0]
    D[N - 1, N - 5 :] = [3.0, -16.0, 36.0, -48.0, 25.0]
    D[N - 2, N - 5 :] = [-1.0, 6.0, -18.0, 10.0, 3.0]
    return D / (12.0 * h)


def _deriv(D: np.ndarray, f: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(D, f, axes=(1, axis)), 0, axis)


class Operators:
    """Collision operators for one grid, kernel and discretisation.

    Parameters
    ----------
    grid : VelocityGrid
    cfg : KernelConfig
        ``cfg.Lambda=None`` selects the leading-order grazing constant
        :func:`artifact.kernel.grazing_lambda`; pass an explicit value (for
        instance the output of :func:`artifact.kernel.calibrate_lambda`) to
        override it.
    settings : OperatorSettings
    """

    calibration_backend = "A"

    def __init__(self, grid: VelocityGrid, cfg: KernelConfig, settings: OperatorSettings | None = None):
        self.grid = grid
        self.cfg = cfg
        self.settings = settings or OperatorSettings()
        self.engine = SpectralEngine(grid, cfg.gamma, self.settings)
        self._landau_a: SpectralLandau | None = None
        self._landau_b: tuple | None = None
        self._conv: _Convolver | None = None
        self._loss_spec: np.ndarray | None = None
        self._kernels: OrderedDict[tuple, KernelSet] = OrderedDict()
        self._coeffs: dict[tuple, np.ndarray] = {}

    # ------------------------------------------------------------------
    @property
    def Lambda(self) -> float:
        return self.cfg.Lambda if self.cfg.Lambda is not None else grazing_lambda(self.cfg)

    def with_lambda(self, value: float) -> "Operators":
        """Same discretisation with a different Landau constant (shares caches)."""
        other = object.__new__(Operators)
        other.__dict__.update(self.__dict__)
        other.cfg = self.cfg.with_lambda(value)
        return other

    @property
    def landau_coefficients(self) -> LandauCoefficients:
        return LandauCoefficients(self.Lambda, self.cfg.gamma)

    def quadrature_table(self, n_theta: int = 48, n_azimuth: int = 32) -> QuadratureTable:
        pts, w = direction_rule(self.settings.sigma_degree)
        e = self.engine
        return QuadratureTable(angular_quadrature(self.cfg, n_theta, n_azimuth), pts, w, e.rho, e.w_rho)

    # ------------------------------------------------------------------
    # Legendre sequences
    # ------------------------------------------------------------------
    def coefficients(self, kind: str, eps: float | None = None) -> np.ndarray:
        """Legendre sequence ``c_n`` of an operator (``n = 0 .. n_max``).

        ``kind`` is ``"cutoff"``, ``"grazing"``, ``"full"``, ``"gain"`` or
        ``"landau"`` (unit Landau constant).
        """
        key = (kind, None if eps is None else float(eps))
        if key in self._coeffs:
            return self._coeffs[key]
        nmax = self.engine.n_max
        half = math.pi / 2
        if kind == "landau":
            n = np.arange(nmax + 1)
            c = -4.0 * n * (n + 1.0)
        elif kind == "full":
            c = legendre_coefficients(self.cfg, 0.0, half, nmax)
        else:
            e = check_eps(eps)
            th = theta_of_eps(e)
            if kind == "cutoff":
                c = legendre_coefficients(self.cfg, th, half, nmax)
            elif kind == "grazing":
                c = legendre_coefficients(self.cfg, 0.0, th, nmax)
            elif kind == "gain":
                c = legendre_coefficients(self.cfg, th, half, nmax, subtract=False)
            else:
                raise DomainError(f"unknown operator kind {kind!r}")
        self._coeffs[key] = c
        return c

    def _run(self, key: tuple, c: np.ndarray, g, h) -> np.ndarray:
        general = not (h is None or h is g)
        gv = _arr(g)
        hv = _arr(h) if general else None
        kkey = key + (general,)
        ks = self._kernels.get(kkey)
        if ks is None:
            if self.engine.kernel_bytes(general) <= self.settings.cache_bytes:
                ks = self.engine.build(c, general)
                self._kernels[kkey] = ks
                self._evict()
        else:
            self._kernels.move_to_end(kkey)
        return self.engine.apply(c, gv, hv, kernels=ks)

    def _evict(self) -> None:
        total = sum(k.nbytes for k in self._kernels.values())
        while total > self.settings.cache_bytes and len(self._kernels) > 1:
            _, old = self._kernels.popitem(last=False)
            total -= old.nbytes

    def clear_cache(self) -> None:
        self._kernels.clear()

    # ------------------------------------------------------------------
    # Boltzmann-type operators
    # ------------------------------------------------------------------
    def q_cutoff(self, g, h=None, eps: float = 0.1) -> np.ndarray:
        """``Q^ε(g, h)`` (kernel ``b 1_{sin(θ/2) >= ε}``); ``h=None`` means ``h=g``."""
        eps = check_eps(eps)
        return self._run(("cutoff", eps), self.coefficients("cutoff", eps), g, h)

    def q_grazing(self, g, h=None, eps: float = 0.1) -> np.ndarray:
        """``Q_ε(g, h)`` (kernel ``b 1_{sin(θ/2) <= ε}``)."""
        eps = check_eps(eps)
        if eps <= math.sin(self.cfg.theta_min / 2.0):
            raise ConfigurationError("eps is below the resolvable grazing band (sin(theta_min/2))")
        return self._run(("grazing", eps), self.coefficients("grazing", eps), g, h)

    def q_full(self, g, h=None) -> np.ndarray:
        """Non-cutoff operator ``Q = Q^ε + Q_ε``."""
        return self._run(("full", None), self.coefficients("full"), g, h)

    def q_gain(self, g, h=None, eps: float = 0.1) -> np.ndarray:
        """Gain term ``Q^{ε+}(g, h)``."""
        eps = check_eps(eps)
        return self._run(("gain", eps), self.coefficients("gain", eps), g, h)

    def q_loss_coefficient(self, g, eps: float, method: str = "spectral") -> np.ndarray:
        """``L(g)(v) = A_ε ∫_{|q| <= R} |q|^γ g(v - q) dq``.

        ``method="spectral"`` multiplies by the exact transform of the
        truncated kernel (radial Gauss–Jacobi), consistent with the spectral
        gain so that gain and loss balance in mass; ``method="lattice"`` is the
        direct sum ``h³ Σ_{v*} |v - v*|^γ 1_{|v-v*| <= R} g(v*)``.
        """
        eps = check_eps(eps)
        a_eps = angular_constants(eps, self.cfg).A_eps
        if method == "spectral":
            e = self.engine
            if self._loss_spec is None:
                x, w = roots_jacobi(self.settings.landau_radial, 0.0, 2.0 + self.cfg.gamma)
                R = self.settings.R
                rho = R * (x + 1.0) / 2.0
                w = w * (R / 2.0) ** (3.0 + self.cfg.gamma)
                self._loss_spec = 4.0 * math.pi * sum(ww * spherical_jn(0, rr * e.kabs) for rr, ww in zip(rho, w))
            return a_eps * e.backward(self._loss_spec * e.forward(_arr(g)))
        if method == "lattice":
            conv = self._convolver()
            return a_eps * conv.apply(self._loss_hat, conv.transform(_arr(g)))
        raise DomainError(f"unknown loss method {method!r}")

    def q_loss(self, g, h=None, eps: float = 0.1, method: str = "spectral") -> np.ndarray:
        """Loss term ``Q^{ε-}(g, h) = L(g) h``."""
        hv = _arr(g) if h is None else _arr(h)
        return self.q_loss_coefficient(g, eps, method) * hv

    def q_gain_direct(
        self,
        g,
        h=None,
        eps: float = 0.1,
        cells: Sequence[tuple[int, int, int]] | None = None,
        n_theta: int = 12,
        n_azimuth: int = 12,
    ) -> np.ndarray:
        """Gain term by direct summation over ``v*`` and σ with trilinear interpolation.

        ``O(N⁶ n_θ n_φ)``; intended for small grids or a few output ``cells``.
        Polar nodes are Gauss–Legendre on ``[θ_ε, π/2]``, azimuths equispaced,
        measured around ``(v - v*)/|v - v*|``.
        """
        eps = check_eps(eps)
        grid = self.grid
        gv = _arr(g)
        hv = gv if h is None else _arr(h)
        th_lo = theta_of_eps(eps)
        x, w = roots_legendre(n_theta)
        th = th_lo + (math.pi / 2 - th_lo) * (x + 1.0) / 2.0
        wth = w * (math.pi / 2 - th_lo) / 2.0 * sin_b(th, self.cfg)
        phi = 2.0 * math.pi * np.arange(n_azimuth) / n_azimuth
        wphi = 2.0 * math.pi / n_azimuth
        V = grid.mesh.reshape(3, -1).T
        R = self.settings.R
        if cells is None:
            idx = list(np.ndindex(*grid.shape))
        else:
            idx = [tuple(c) for c in cells]
        out = np.zeros(grid.shape) if cells is None else np.zeros(len(idx))
        ct, st = np.cos(th), np.sin(th)
        cp, sp = np.cos(phi), np.sin(phi)
        for m, cell in enumerate(idx):
            v = grid.mesh[(slice(None),) + tuple(cell)]
            q = v[None, :] - V
            qn = np.linalg.norm(q, axis=1)
            keep = (qn > 0) & (qn <= R)
            q, qn, vs = q[keep], qn[keep], V[keep]
            n = q / qn[:, None]
            a = np.where(np.abs(n[:, :1]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
            e1 = a - np.sum(a * n, axis=1, keepdims=True) * n
            e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
            e2 = np.cross(n, e1)
            ring = cp[None, None, :, None] * e1[:, None, None, :] + sp[None, None, :, None] * e2[:, None, None, :]
            sig = ct[None, :, None, None] * n[:, None, None, :] + st[None, :, None, None] * ring
            c = 0.5 * (v[None, :] + vs)[:, None, None, :]
            r = 0.5 * qn[:, None, None, None]
            vp = c + r * sig
            vsp = c - r * sig
            val = interpolate(gv, vsp, grid) * interpolate(hv, vp, grid)
            tot = np.einsum("mij,i->m", val, wth) * wphi
            res = grid.cell_volume * float(np.sum(qn**self.cfg.gamma * tot))
            if cells is None:
                out[cell] = res
            else:
                out[m] = res
        return out

    # ------------------------------------------------------------------
    # Landau
    # ------------------------------------------------------------------
    def q_landau(self, g, h=None, backend: str = "A", Lambda: float | None = None) -> np.ndarray:
        """Landau operator ``Q_L(g, h)``.

        Backends: ``"A"`` convolution form with spectral coefficients and
        derivatives (bilinear); ``"B"`` conservative weak form (``g = h``
        only; conserves mass, momentum and energy to round-off); ``"sigma"``
        the grazing limit of the spectral Boltzmann engine with Legendre
        sequence ``-4Λ n(n+1)``.
        """
        lam = self.Lambda if Lambda is None else float(Lambda)
        if backend == "A":
            if self._landau_a is None:
                self._landau_a = SpectralLandau(self.engine, self.settings.landau_radial, self.settings.R)
            gv = _arr(g)
            return self._landau_a.apply(gv, None if h is None else _arr(h), lam)
        if backend == "B":
            if h is not None and not (h is g or np.array_equal(_arr(h), _arr(g))):
                raise UnsupportedCombinationError("Landau backend B supports g = h only")
            return lam * self._landau_weak(_arr(g))
        if backend == "sigma":
            return lam * self._run(("landau", None), self.coefficients("landau"), g, h)
        raise DomainError(f"unknown Landau backend {backend!r}; choose from {LANDAU_BACKENDS}")

    def _convolver(self) -> _Convolver:
        if self._conv is None:
            conv = _Convolver(self.grid)
            Z = conv.Z
            r = np.sqrt(np.sum(Z**2, axis=0))
            inside = r <= self.settings.R
            self._loss_hat = conv.transform_kernel(np.where(inside, r**self.cfg.gamma, 0.0))
            self._conv = conv
        return self._conv

    def _landau_weak_setup(self):
        if self._landau_b is None:
            conv = self._convolver()
            Z = conv.Z
            lc = LandauCoefficients(1.0, self.cfg.gamma)
            r = np.sqrt(np.sum(Z**2, axis=0))
            inside = (r <= self.settings.R)[..., None, None]
            A = np.where(inside, lc.a(np.moveaxis(Z, 0, -1)), 0.0)
            Ahat = {(i, j): conv.transform_kernel(A[..., i, j]) for i in range(3) for j in range(i, 3)}
            self._landau_b = (Ahat, _fd_matrix(self.grid.N, self.grid.h))
        return self._landau_b

    def _landau_weak(self, f: np.ndarray) -> np.ndarray:
        """``Q = -Dᵀ J`` with ``J_i = h³ Σ a_ij(v - v*) [f* D_j f - f (D_j f)*]``."""
        Ahat, D = self._landau_weak_setup()
        conv = self._convolver()
        a = lambda i, j: Ahat[(i, j) if i <= j else (j, i)]
        Df = [_deriv(D, f, ax) for ax in range(3)]
        F = conv.transform(f)
        DF = [conv.transform(d) for d in Df]
        out = np.zeros_like(f)
        for i in range(3):
            af = sum(conv.apply(a(i, j), F) * Df[j] for j in range(3))
            adf = conv.apply(a(i, 0) * DF[0] + a(i, 1) * DF[1] + a(i, 2) * DF[2], 1.0)
            J = af - f * adf
            out -= _deriv(D.T, J, i)
        return out

    def landau_moment_sides(self, f, p: float, Lambda: float = 1.0) -> tuple[float, float]:
        """``(⟨Q_L(f,f), ⟨v⟩^p⟩, bound)`` for the Landau moment inequality.

        The left side uses the weak form
        ``∫∫ f f* [a_ij(v-v*) ∂_ij φ(v) + 2 b_i(v-v*) ∂_i φ(v)]`` with the
        untruncated coefficients as an exact lattice double sum.  The bound is
        ``-Λp ‖f‖_{L¹} ‖f‖_{L¹_{p+γ}} + Λp(4p+2) ‖f‖_{L¹_2} ‖f‖_{L¹_p}``.
        """
        if p <= 2:
            raise DomainError("the Landau moment inequality needs p > 2")
        from .vgrid import weighted_l1

        grid = self.grid
        fv = _arr(f)
        conv = _Convolver(grid)
        Z = np.moveaxis(conv.Z, 0, -1)
        lc = LandauCoefficients(Lambda, self.cfg.gamma)
        A = lc.a(Z)
        B = lc.b(Z)
        F = conv.transform(fv)
        V = grid.mesh
        w = 1.0 + grid.speed2
        # φ = ⟨v⟩^p: ∂_i φ = p w^{p/2-1} v_i; ∂_ij φ = p w^{p/2-1} δ_ij + p(p-2) w^{p/2-2} v_i v_j
        g1 = p * w ** (p / 2 - 1)
        g2 = p * (p - 2.0) * w ** (p / 2 - 2)
        total = np.zeros(grid.shape)
        for i in range(3):
            for j in range(3):
                hess = g2 * V[i] * V[j] + (g1 if i == j else 0.0)
                total += hess * conv.apply(conv.transform_kernel(A[..., i, j]), F)
            total += 2.0 * g1 * V[i] * conv.apply(conv.transform_kernel(B[..., i]), F)
        lhs = float(np.sum(total * fv) * grid.cell_volume)
        g = self.cfg.gamma
        rhs = -Lambda * p * weighted_l1(fv, 0, grid) * weighted_l1(fv, p + g, grid) + Lambda * p * (
            4 * p + 2
        ) * weighted_l1(fv, 2, grid) * weighted_l1(fv, p, grid)
        return lhs, rhs

    # ------------------------------------------------------------------
    # compensated operator and defect
    # ------------------------------------------------------------------
    def m_eps(self, g, h=None, eps: float = 0.1, landau: str = "sigma") -> np.ndarray:
        """``M^ε(g, h) = Q^ε(g, h) + ε^{2-2s} Q_L(g, h)``.

        With ``landau="sigma"`` both parts share one spectral pass with the
        Legendre sequence ``c^ε_n - 4Λ ε^{2-2s} n(n+1)``.
        """
        eps = check_eps(eps)
        scale = eps ** (2.0 - 2.0 * self.cfg.s)
        if landau == "sigma":
            lam = self.Lambda
            c = self.coefficients("cutoff", eps) + lam * scale * self.coefficients("landau")
            return self._run(("meps", eps, lam), c, g, h)
        return self.q_cutoff(g, h, eps) + scale * self.q_landau(g, h, backend=landau)

    def upsilon(self, f, eps: float, landau: str = "sigma") -> np.ndarray:
        """``Υ(f) = (1/ε) [Q_L(f,f) - ε^{2s-2} Q_ε(f,f)]``."""
        eps = check_eps(eps)
        ql = self.q_landau(f, backend=landau)
        qe = self.q_grazing(f, eps=eps)
        return (ql - eps ** (2.0 * self.cfg.s - 2.0) * qe) / eps

    def rhs(self, mode: str, eps: float | None, landau: str = "sigma"):
        """Right-hand side closure ``f -> Op(f, f)`` for a solver mode."""
        if mode == "compensated":
            return lambda f: self.m_eps(f, None, eps, landau)
        if mode == "cutoff-only":
            return lambda f: self.q_cutoff(f, None, eps)
        if mode == "grazing-reference":
            return lambda f: self.q_full(f)
        raise ConfigurationError(f"unknown mode {mode!r}")
