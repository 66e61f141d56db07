"""Spectral evaluation of σ-representation collision operators.

Every operator handled here has the form

    Q_c(g, h)(v) = ∫_0^R ρ^{2+γ} ∫_{S²} ∫_{S²} b̃(q̂·σ) [g(v*') h(v') - g(v*) h(v)] dσ dq̂ dρ

with ``q = v - v* = ρ q̂``.  Writing ``x = (v + v*)/2`` the gain integrand is
``P_{ρσ}(x) = g(x - ρσ/2) h(x + ρσ/2)`` and the change of variables to ``v``
turns the ``q̂`` integral into a Funk–Hecke multiplier:

    Q̂_c(k) = Σ_{ρ,σ} w_ρ w_σ  K_{ρσ}(k) P̂_{ρσ}(k),
    K_{ρσ}(k) = Σ_n (2n+1) (-i)^n c_n j_n(ρ|k|/2) P_n(σ·k̂),

where ``c_n = 2π ∫ sinθ b(cosθ) (P_n(cosθ) - 1) dθ``.  The subtraction of 1
puts gain and loss into a single cancellation-free kernel, so the same engine
evaluates cutoff, grazing, full and Landau-limit (``c_n ∝ n(n+1)``)
operators.  Unsubtracted moments (``c_0 ≠ 0``) give the gain term alone.

Radial nodes are Gauss–Jacobi with the exact ``ρ^{2+γ}`` weight; directions
use a Lebedev rule.  Lebedev rules are antipodally symmetric, so only one
direction of each ``±σ`` pair is kept and the kernel is folded accordingly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy.integrate import lebedev_rule
from scipy.special import roots_jacobi, spherical_jn

from .errors import ConfigurationError, UnsupportedCombinationError
from .vgrid import VelocityGrid


@dataclass(frozen=True)
class OperatorSettings:
    """Discretisation parameters of the collision operators.

    Attributes
    ----------
    R : float
        Truncation radius of the relative speed ``|v - v*|``.
    n_rho : int
        Radial Gauss–Jacobi nodes on ``[0, R]``.
    sigma_degree : int
        Exactness degree of the Lebedev direction rule.
    pad : float
        FFT grid is ``round(pad N)`` points per axis (1 = no padding).
    n_max : int or None
        Highest Legendre order; default ``R k_max / 2 + 10``.
    landau_radial : int
        Radial nodes of the spectral Landau coefficients.
    cache_bytes : int
        Memory budget for cached operator kernels.
    """

    R: float = 6.0
    n_rho: int = 8
    sigma_degree: int = 15
    pad: float = 1.0
    n_max: int | None = None
    landau_radial: int = 200
    cache_bytes: int = 768 * 2**20

    def __post_init__(self) -> None:
        if not self.R > 0:
            raise ConfigurationError("R must be positive")
        if self.n_rho < 2:
            raise ConfigurationError("n_rho must be >= 2")
        if self.pad < 1.0:
            raise ConfigurationError("pad must be >= 1")
        if self.n_max is not None and self.n_max < 2:
            raise ConfigurationError("n_max must be >= 2")


def _paired_directions(degree: int) -> tuple[np.ndarray, np.ndarray]:
    pts, w = direction_rule(degree)
    lead = np.where(
        np.abs(pts[:, 0]) > 1e-12,
        pts[:, 0],
        np.where(np.abs(pts[:, 1]) > 1e-12, pts[:, 1], pts[:, 2]),
    )
    keep = lead > 0
    return pts[keep], w[keep]


def direction_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Full Lebedev rule (unit vectors ``(n, 3)`` and weights summing to 4π)."""
    try:
        pts, w = lebedev_rule(degree)
    except (ValueError, NotImplementedError) as exc:
        raise ConfigurationError(f"no Lebedev rule of degree {degree}") from exc
    return pts.T.copy(), w.copy()


class SpectralEngine:
    """Batched FFT evaluation of ``Q_c`` on a (possibly padded) periodic box."""

    def __init__(self, grid: VelocityGrid, gamma: float, settings: OperatorSettings, batch: int = 16):
        self.grid = grid
        self.gamma = float(gamma)
        self.settings = settings
        N = grid.N
        Np = int(round(settings.pad * N))
        Np += (Np - N) % 2
        self.Np = Np
        self.offset = (Np - N) // 2
        h = grid.h
        self.h = h
        self.Lp = 0.5 * Np * h
        k1 = 2.0 * math.pi * np.fft.fftfreq(Np, h)
        kr = 2.0 * math.pi * np.fft.rfftfreq(Np, h)
        self.k1, self.kr = k1, kr
        self.K = np.stack(np.meshgrid(k1, k1, kr, indexing="ij"))
        self.kabs = np.sqrt(np.sum(self.K**2, axis=0))
        self.khat = self.K / np.where(self.kabs > 0, self.kabs, 1.0)
        mask = np.ones(self.kabs.shape)
        mask[Np // 2, :, :] = 0.0
        mask[:, Np // 2, :] = 0.0
        mask[:, :, Np // 2] = 0.0
        self.mask = mask
        R = settings.R
        x, w = roots_jacobi(settings.n_rho, 0.0, 2.0 + self.gamma)
        self.rho = R * (x + 1.0) / 2.0
        self.w_rho = w * (R / 2.0) ** (3.0 + self.gamma)
        self.sigma, self.w_sigma = _paired_directions(settings.sigma_degree)
        kmax = float(self.kabs.max())
        self.n_max = settings.n_max or int(R * kmax / 2.0 + 10)
        self.batch = batch
        self.spec_shape = self.kabs.shape

    # ------------------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return self.rho.size * self.sigma.shape[0]

    def kernel_bytes(self, general: bool) -> int:
        return self.n_nodes * self.kabs.size * 8 * (2 if general else 1)

    def forward(self, f: np.ndarray) -> np.ndarray:
        """Zero-pad to the FFT box, transform and drop Nyquist modes."""
        N, o, Np = self.grid.N, self.offset, self.Np
        if o:
            fp = np.zeros((Np, Np, Np))
            fp[o : o + N, o : o + N, o : o + N] = f
        else:
            fp = np.asarray(f, dtype=float)
        return sfft.rfftn(fp) * self.mask

    def backward(self, F: np.ndarray) -> np.ndarray:
        N, o, Np = self.grid.N, self.offset, self.Np
        out = sfft.irfftn(F * self.mask, s=(Np, Np, Np))
        return out[o : o + N, o : o + N, o : o + N] if o else out

    def _phases(self, r: int, j: int) -> np.ndarray:
        a = 0.5 * self.rho[r] * self.sigma[j]
        px = np.exp(-1j * self.k1 * a[0])
        py = np.exp(-1j * self.k1 * a[1])
        pz = np.exp(-1j * self.kr * a[2])
        return px[:, None, None] * py[None, :, None] * pz[None, None, :]

    def _node_kernels(self, c: np.ndarray, r: int, jb: range, general: bool):
        """Even (and odd) kernels of the nodes ``(r, j)``, ``j`` in ``jb``."""
        nmax = self.n_max
        if c.size < nmax + 1:
            c = np.concatenate([c, np.zeros(nmax + 1 - c.size)])
        x = 0.5 * self.rho[r] * self.kabs
        jn = [None] * (nmax + 1)
        for n in range(nmax + 1):
            if c[n] != 0.0 and (general or n % 2 == 0):
                jn[n] = spherical_jn(n, x)
        even, odd = [], []
        for j in jb:
            ct = np.einsum("d,d...->...", self.sigma[j], self.khat)
            Pm, P = np.zeros_like(ct), np.ones_like(ct)
            e = np.zeros_like(ct)
            o = np.zeros_like(ct) if general else None
            for n in range(nmax + 1):
                if n >= 1:
                    Pm, P = P, ((2 * n - 1) * ct * P - (n - 1) * Pm) / n
                if jn[n] is None:
                    continue
                if n % 2 == 0:
                    e += ((-1) ** (n // 2) * (2 * n + 1) * c[n]) * jn[n] * P
                else:
                    o += ((-1) ** ((n - 1) // 2) * (2 * n + 1) * c[n]) * jn[n] * P
            wgt = self.w_rho[r] * self.w_sigma[j]
            if general:
                even.append(wgt * e * self.mask)
                odd.append(-wgt * o * self.mask)
            else:
                even.append(2.0 * wgt * e * self.mask)
        return even, odd

    def build(self, c: np.ndarray, general: bool) -> "KernelSet":
        """Precompute all node kernels for the Legendre sequence ``c``."""
        even, odd = [], []
        ns = self.sigma.shape[0]
        for r in range(self.rho.size):
            e, o = self._node_kernels(np.asarray(c, dtype=float), r, range(ns), general)
            even.extend(e)
            odd.extend(o)
        return KernelSet(np.array(even), np.array(odd) if general else None)

    # ------------------------------------------------------------------
    def apply(self, c: np.ndarray, g: np.ndarray, h: np.ndarray | None = None, kernels: "KernelSet | None" = None) -> np.ndarray:
        """``Q_c(g, h)`` on the grid; ``h=None`` means ``h = g``."""
        general = h is not None
        if kernels is not None and general and kernels.odd is None:
            raise UnsupportedCombinationError("kernel set was built for the symmetric case only")
        G = self.forward(g)
        H = self.forward(h) if general else G
        Np = self.Np
        shape = (Np, Np, Np)
        out = np.zeros(self.spec_shape, dtype=complex)
        ns = self.sigma.shape[0]
        c = np.asarray(c, dtype=float)
        idx = 0
        for r in range(self.rho.size):
            for j0 in range(0, ns, self.batch):
                jb = range(j0, min(j0 + self.batch, ns))
                if kernels is None:
                    ke, ko = self._node_kernels(c, r, jb, general)
                else:
                    ke = kernels.even[idx : idx + len(jb)]
                    ko = kernels.odd[idx : idx + len(jb)] if general else None
                idx += len(jb)
                ph = np.array([self._phases(r, j) for j in jb])
                gm = sfft.irfftn(G[None] * ph, s=shape, axes=(1, 2, 3))
                hp = sfft.irfftn(H[None] * ph.conj(), s=shape, axes=(1, 2, 3))
                if not general:
                    Pp = sfft.rfftn(gm * hp, axes=(1, 2, 3))
                    out += np.einsum("b...,b...->...", np.asarray(ke), Pp)
                    continue
                gp = sfft.irfftn(G[None] * ph.conj(), s=shape, axes=(1, 2, 3))
                hm = sfft.irfftn(H[None] * ph, s=shape, axes=(1, 2, 3))
                Pp = sfft.rfftn(gm * hp, axes=(1, 2, 3))
                Pm = sfft.rfftn(gp * hm, axes=(1, 2, 3))
                out += np.einsum("b...,b...->...", np.asarray(ke), Pp + Pm)
                out += 1j * np.einsum("b...,b...->...", np.asarray(ko), Pp - Pm)
        return self.backward(out)


@dataclass
class KernelSet:
    even: np.ndarray
    odd: np.ndarray | None

    @property
    def nbytes(self) -> int:
        return self.even.nbytes + (0 if self.odd is None else self.odd.nbytes)


class SpectralLandau:
    """Landau operator in convolution form with spectral coefficients.

    ``Q_L(g, h) = ∂_i [ (a_ij * g) ∂_j h - (b_i * g) h ]`` where the truncated
    coefficients ``a_ij(z) 1_{|z| <= R}`` and ``b_i = ∂_j a_ij`` are
    transformed analytically by a radial Gauss–Jacobi rule; derivatives are
    spectral.  Bilinear in ``(g, h)`` and exactly mass conserving.
    """

    def __init__(self, engine: SpectralEngine, n_radial: int, R: float):
        self.engine = engine
        gamma = engine.gamma
        x, w = roots_jacobi(n_radial, 0.0, 4.0 + gamma)
        rho = R * (x + 1.0) / 2.0
        w = w * (R / 2.0) ** (5.0 + gamma)
        k = engine.kabs
        I1 = np.zeros(k.shape)
        I2 = np.zeros(k.shape)
        for rr, ww in zip(rho, w):
            xx = rr * k
            safe = np.where(xx > 0, xx, 1.0)
            j1x = np.where(xx > 0, spherical_jn(1, xx) / safe, 1.0 / 3.0)
            I1 += ww * (spherical_jn(0, xx) - j1x)
            I2 += ww * spherical_jn(2, xx)
        I1 *= 4.0 * math.pi
        I2 *= 4.0 * math.pi
        kh = engine.khat
        a = np.empty((3, 3) + k.shape)
        for i in range(3):
            for j in range(3):
                a[i, j] = I1 * (i == j) + I2 * kh[i] * kh[j]
        self.a_hat = a
        self.b_hat = np.einsum("j...,ij...->i...", 1j * engine.K, a)

    def apply(self, g: np.ndarray, h: np.ndarray | None = None, Lambda: float = 1.0) -> np.ndarray:
        e = self.engine
        Np = e.Np
        shape = (Np, Np, Np)
        G = e.forward(g)
        H = G if h is None else e.forward(h)
        inv = lambda X: sfft.irfftn(X * e.mask, s=shape)
        hh = inv(H)
        A = np.empty((3, 3) + shape)
        for i in range(3):
            for j in range(i, 3):
                A[i, j] = A[j, i] = inv(self.a_hat[i, j] * G)
        D = [inv(1j * e.K[i] * H) for i in range(3)]
        out = np.zeros(e.spec_shape, dtype=complex)
        for i in range(3):
            flux = A[i, 0] * D[0] + A[i, 1] * D[1] + A[i, 2] * D[2] - inv(self.b_hat[i] * G) * hh
            out += 1j * e.K[i] * sfft.rfftn(flux)
        return Lambda * e.backward(out)
