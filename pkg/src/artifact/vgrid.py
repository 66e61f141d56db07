"""Truncated uniform velocity grid, fields, moments, norms and field I/O.

Nodes are cell-centred, ``v_i = -L + (i + 1/2) h`` with ``h = 2L/N``, and all
velocity integrals use the midpoint rule ``∫ u dv ≈ h³ Σ u``.  Field arrays
have shape ``(N, N, N)`` indexed ``[ix, iy, iz]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Sequence, Union

import numpy as np
from numpy.lib.mixins import NDArrayOperatorsMixin

from .errors import ConfigurationError, DomainError

TOL_NEG = 1e-12


@dataclass(frozen=True)
class VelocityGrid:
    """Cube ``[-L, L]³`` with ``N`` cell-centred nodes per axis."""

    N: int
    L: float

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 8 or self.N % 2:
            raise ConfigurationError(f"N must be an even integer >= 8, got {self.N}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ConfigurationError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.N, self.N, self.N)

    @cached_property
    def nodes(self) -> np.ndarray:
        """1-D node coordinates."""
        return -self.L + (np.arange(self.N) + 0.5) * self.h

    @cached_property
    def mesh(self) -> np.ndarray:
        """Velocity components, shape ``(3, N, N, N)``."""
        x = self.nodes
        return np.stack(np.meshgrid(x, x, x, indexing="ij"))

    @cached_property
    def speed2(self) -> np.ndarray:
        """``|v|²`` at the nodes."""
        return np.sum(self.mesh**2, axis=0)

    def bracket(self, q: float) -> np.ndarray:
        """``⟨v⟩^q = (1 + |v|²)^(q/2)`` at the nodes."""
        return (1.0 + self.speed2) ** (0.5 * q)

    def integrate(self, values) -> float:
        return float(np.sum(_values(values)) * self.cell_volume)

    def l1(self, values) -> float:
        return float(np.sum(np.abs(_values(values))) * self.cell_volume)

    def zeros(self) -> "GridField":
        return GridField(self, np.zeros(self.shape))


class GridField(NDArrayOperatorsMixin):
    """Real-valued function sampled on a :class:`VelocityGrid`.

    Supports numpy arithmetic; results of ufuncs with another field or a
    scalar are again :class:`GridField` objects on the same grid.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: VelocityGrid, values) -> None:
        arr = np.asarray(values, dtype=float)
        if arr.shape != grid.shape:
            raise DomainError(f"field shape {arr.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("field values must be finite")
        self.grid = grid
        self.values = arr

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        grid = self.grid
        args = []
        for x in inputs:
            if isinstance(x, GridField):
                if x.grid != grid:
                    raise DomainError("fields live on different grids")
                args.append(x.values)
            else:
                args.append(x)
        out = getattr(ufunc, method)(*args, **kwargs)
        if isinstance(out, np.ndarray) and out.shape == grid.shape and out.dtype.kind == "f":
            return GridField(grid, out)
        return out

    def __repr__(self) -> str:
        return f"{type(self).__name__}(N={self.grid.N}, L={self.grid.L})"

    def copy(self) -> "GridField":
        return type(self)(self.grid, self.values.copy())


class Distribution(GridField):
    """Non-negative (up to ``-1e-12``) field with positive mass."""

    __slots__ = ()

    def __init__(self, grid: VelocityGrid, values) -> None:
        super().__init__(grid, values)
        if self.values.min() < -TOL_NEG:
            raise DomainError(f"distribution has negative values (min {self.values.min():.3e})")
        if np.sum(self.values) <= 0.0:
            raise DomainError("distribution must have positive mass")


FieldLike = Union[GridField, np.ndarray]


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, GridField) else np.asarray(f, dtype=float)


def _grid_of(f, grid: VelocityGrid | None) -> VelocityGrid:
    if isinstance(f, GridField):
        return f.grid
    if grid is None:
        raise DomainError("a grid is required for plain arrays")
    return grid


# ----------------------------------------------------------------------------
# standard fields
# ----------------------------------------------------------------------------


def maxwellian(grid: VelocityGrid, rho: float = 1.0, u: Sequence[float] = (0.0, 0.0, 0.0), T: float = 1.0) -> Distribution:
    """``rho (2πT)^(-3/2) exp(-|v-u|²/(2T))`` at the nodes."""
    return gaussian(grid, rho, u, (T, T, T))


def gaussian(
    grid: VelocityGrid,
    rho: float = 1.0,
    u: Sequence[float] = (0.0, 0.0, 0.0),
    T: Sequence[float] = (1.0, 1.0, 1.0),
) -> Distribution:
    """Axis-aligned (possibly anisotropic) Gaussian with temperatures ``T``."""
    u = np.asarray(u, dtype=float)
    T = np.asarray(T, dtype=float)
    if not rho > 0:
        raise DomainError("rho must be positive")
    if u.shape != (3,) or T.shape != (3,) or np.any(T <= 0):
        raise DomainError("u must be a 3-vector and T three positive temperatures")
    if np.linalg.norm(u) + 4.0 * math.sqrt(T.max()) >= grid.L:
        raise ConfigurationError("Gaussian support (|u| + 4 sqrt(T)) does not fit the box")
    V = grid.mesh
    r = sum((V[i] - u[i]) ** 2 / T[i] for i in range(3))
    vals = rho * np.exp(-0.5 * r) / ((2.0 * math.pi) ** 1.5 * math.sqrt(T.prod()))
    return Distribution(grid, vals)


def gaussian_mixture(grid: VelocityGrid) -> Distribution:
    """Two-bump test distribution used by the order studies."""
    a = maxwellian(grid, 0.5, (-1.0, 0.5, 0.0), 0.8)
    b = maxwellian(grid, 0.5, (1.0, -0.3, 0.4), 1.1)
    return Distribution(grid, a.values + b.values)


def anisotropic_gaussian(grid: VelocityGrid, T: Sequence[float] = (1.4, 0.8, 0.8)) -> Distribution:
    """Centred Gaussian with unequal axis temperatures (relaxation test datum)."""
    return gaussian(grid, 1.0, (0.0, 0.0, 0.0), T)


# ----------------------------------------------------------------------------
# moments and norms
# ----------------------------------------------------------------------------


class Moments(NamedTuple):
    mass: float
    momentum: np.ndarray
    energy: float


def moments(field: FieldLike, grid: VelocityGrid | None = None) -> Moments:
    """Midpoint-rule mass, momentum and energy ``∫ f (1, v, |v|²)``."""
    g = _grid_of(field, grid)
    f = _values(field)
    w = g.cell_volume
    mass = float(np.sum(f) * w)
    mom = np.array([np.sum(f * g.mesh[i]) * w for i in range(3)])
    energy = float(np.sum(f * g.speed2) * w)
    return Moments(mass, mom, energy)


def weighted_l1(field: FieldLike, q: float = 0.0, grid: VelocityGrid | None = None) -> float:
    """``‖f‖_{L¹_q} = ∫ |f| ⟨v⟩^q``."""
    g = _grid_of(field, grid)
    return float(np.sum(np.abs(_values(field)) * g.bracket(q)) * g.cell_volume)


def weighted_l2(field: FieldLike, l: float = 0.0, grid: VelocityGrid | None = None) -> float:
    """``‖f‖_{L²_l} = (∫ f² ⟨v⟩^{2l})^{1/2}``."""
    g = _grid_of(field, grid)
    return math.sqrt(float(np.sum(_values(field) ** 2 * g.bracket(2.0 * l)) * g.cell_volume))


def llogl(field: FieldLike, grid: VelocityGrid | None = None) -> float:
    """``∫ |f| log(1 + |f|)``."""
    g = _grid_of(field, grid)
    a = np.abs(_values(field))
    return float(np.sum(a * np.log1p(a)) * g.cell_volume)


def entropy(field: FieldLike, grid: VelocityGrid | None = None) -> float:
    """``H(f) = ∫ f log f`` over nodes with ``f > 0`` (``0 log 0 = 0``)."""
    g = _grid_of(field, grid)
    f = _values(field)
    pos = f > 0
    return float(np.sum(f[pos] * np.log(f[pos])) * g.cell_volume)


def _padded_spectrum(field: FieldLike, l: float, grid: VelocityGrid | None) -> tuple[np.ndarray, np.ndarray, VelocityGrid]:
    """|DFT|² of the zero-extended weighted field and the matching |ξ|."""
    g = _grid_of(field, grid)
    w = _values(field) * g.bracket(l)
    M = 2 * g.N
    spec = np.fft.fftn(w, s=(M, M, M), axes=(0, 1, 2))
    xi = 2.0 * math.pi * np.fft.fftfreq(M, g.h)
    k2 = xi[:, None, None] ** 2 + xi[None, :, None] ** 2 + xi[None, None, :] ** 2
    return np.abs(spec) ** 2 * (g.cell_volume / M**3), np.sqrt(k2), g


def sobolev_norm(field: FieldLike, m: float, l: float = 0.0, grid: VelocityGrid | None = None) -> float:
    """Discrete ``‖f‖_{H^m_l} = ‖⟨ξ⟩^m (f⟨v⟩^l)^‖`` on the doubled, zero-extended box."""
    if m < 0:
        raise DomainError("m must be >= 0")
    p, k, _ = _padded_spectrum(field, l, grid)
    return math.sqrt(float(np.sum(p * (1.0 + k**2) ** m)))


def eps_norm(field: FieldLike, eps: float, m: float, l: float, s: float, grid: VelocityGrid | None = None) -> float:
    """``‖f‖²_{ε,m,l} = ‖f‖²_{H^{m+s}_l} + ε^{2-2s} ‖f‖²_{H^{m+1}_l}``."""
    a = sobolev_norm(field, m + s, l, grid)
    b = sobolev_norm(field, m + 1.0, l, grid)
    return math.sqrt(a * a + eps ** (2.0 - 2.0 * s) * b * b)


def weps_symbol(xi, eps: float, s: float) -> np.ndarray | float:
    """``W^ε(ξ) = ⟨ξ⟩^s`` for ``|ξ| <= 1/ε`` and ``ε^{-s}`` beyond."""
    a = np.abs(np.asarray(xi, dtype=float))
    out = np.where(a <= 1.0 / eps, (1.0 + a * a) ** (0.5 * s), eps ** (-s))
    return float(out) if np.ndim(xi) == 0 else out


def weps_l2(field: FieldLike, eps: float, l: float, s: float, grid: VelocityGrid | None = None) -> float:
    """``‖W^ε(D) (f⟨v⟩^l)‖_{L²}``."""
    p, k, _ = _padded_spectrum(field, l, grid)
    return math.sqrt(float(np.sum(p * weps_symbol(k, eps, s) ** 2)))


def interp_inequality_sides(field: FieldLike, lam: float, s: float, grid: VelocityGrid | None = None) -> tuple[float, float]:
    """``(‖f‖²_{L²}, λ‖f‖²_{H^s} + (4π/3) λ^{-3/(2s)} ‖f‖²_{L¹})``."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    lhs = weighted_l2(field, 0.0, grid) ** 2
    rhs = lam * sobolev_norm(field, s, 0.0, grid) ** 2 + (4.0 * math.pi / 3.0) * lam ** (
        -3.0 / (2.0 * s)
    ) * weighted_l1(field, 0.0, grid) ** 2
    return lhs, rhs


def interp_inequality_check(field: FieldLike, lam: float, s: float = 0.5, grid: VelocityGrid | None = None) -> bool:
    """True iff ``‖f‖²_{L²} <= λ‖f‖²_{H^s} + (4π/3) λ^{-3/(2s)} ‖f‖²_{L¹}``."""
    lhs, rhs = interp_inequality_sides(field, lam, s, grid)
    return lhs <= rhs * (1.0 + 1e-12)


# ----------------------------------------------------------------------------
# interpolation
# ----------------------------------------------------------------------------


def interpolate(field: FieldLike, points, grid: VelocityGrid | None = None) -> np.ndarray | float:
    """Trilinear interpolation with zero extension outside ``[-L, L]³``.

    Between the outermost nodes and the box faces the field is blended
    linearly towards zero at virtual nodes one half-cell outside the box.
    ``points`` has shape ``(3,)`` or ``(..., 3)``.
    """
    g = _grid_of(field, grid)
    f = np.pad(_values(field), 1)  # virtual zero layer
    P = np.asarray(points, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    # continuous index in the padded array; node i of the grid sits at i + 1
    t = (P + g.L) / g.h + 0.5
    inside = np.all((P >= -g.L) & (P <= g.L), axis=-1)
    t = np.clip(t, 0.0, g.N + 1.0 - 1e-12)
    i0 = np.floor(t).astype(int)
    fr = t - i0
    out = np.zeros(P.shape[:-1])
    for dx in (0, 1):
        wx = fr[..., 0] if dx else 1.0 - fr[..., 0]
        for dy in (0, 1):
            wy = fr[..., 1] if dy else 1.0 - fr[..., 1]
            for dz in (0, 1):
                wz = fr[..., 2] if dz else 1.0 - fr[..., 2]
                out += wx * wy * wz * f[i0[..., 0] + dx, i0[..., 1] + dy, i0[..., 2] + dz]
    out = np.where(inside, out, 0.0)
    return float(out[0]) if single else out


# ----------------------------------------------------------------------------
# field dumps
# ----------------------------------------------------------------------------

_ORDER = "row-major-x-fastest"


def dump_field(field: GridField, path: str | Path, binary: bool = False) -> None:
    """Write a field: header lines ``N=``, ``L=``, ``order=`` then the values."""
    g = field.grid
    flat = np.asarray(field.values, dtype="<f8").ravel(order="F")
    header = f"N={g.N}\nL={g.L!r}\norder={_ORDER}\n"
    path = Path(path)
    if binary:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(flat.tobytes())
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header)
            for a in range(0, flat.size, 8):
                fh.write(" ".join(f"{x:.17g}" for x in flat[a : a + 8]) + "\n")


def load_field(path: str | Path) -> GridField:
    """Read a field written by :func:`dump_field` (text or binary)."""
    raw = Path(path).read_bytes()
    head = []
    pos = 0
    for _ in range(3):
        end = raw.index(b"\n", pos)
        head.append(raw[pos:end].decode("ascii"))
        pos = end + 1
    kv = dict(line.split("=", 1) for line in head)
    if set(kv) != {"N", "L", "order"} or kv["order"] != _ORDER:
        raise ConfigurationError(f"bad field header in {path}")
    grid = VelocityGrid(int(kv["N"]), float(kv["L"]))
    n = grid.N**3
    body = raw[pos:]
    if len(body) == 8 * n:
        try:
            vals = np.frombuffer(body, dtype="<f8")
        except ValueError:  # pragma: no cover
            vals = None
        if vals is not None and _looks_binary(body):
            return GridField(grid, vals.reshape(grid.shape, order="F"))
    vals = np.array(body.decode("ascii").split(), dtype=float)
    if vals.size != n:
        raise ConfigurationError(f"{path}: expected {n} values, found {vals.size}")
    return GridField(grid, vals.reshape(grid.shape, order="F"))


def _looks_binary(body: bytes) -> bool:
    try:
        body.decode("ascii")
    except UnicodeDecodeError:
        return True
    # decodable bytes of exactly 8n length: binary only if it does not parse as text
    try:
        [float(t) for t in body.split()]
    except ValueError:
        return True
    return False
