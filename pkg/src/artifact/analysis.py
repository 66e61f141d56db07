"""Weight bookkeeping, theorem side conditions and convergence-order studies."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, SignalUnderflowError
from .kernel import KernelConfig, angular_constants, check_eps
from .solver import SolverConfig, simulate
from .vgrid import GridField, weighted_l1

# ----------------------------------------------------------------------------
# weight functions
# ----------------------------------------------------------------------------


def x_fn(l: float, s: float, gamma: float) -> float:
    return (2 * l + 7) / s - (1 - s) / s * (l + gamma / 2)


def y_fn(l: float, s: float, gamma: float) -> float:
    return (3 * x_fn(l, s, gamma) - (s + 2) * l) / (1 - s)


def z_fn(l: float, s: float) -> float:
    return 2 * l + 7 + (l + 7) / s


def u_fn(m: int, l: float, s: float) -> float:
    return (m + 2) * z_fn(l, s) - (m + 1) * l


def phi(m, l: float, s: float, gamma: float) -> float:
    """Moment order ``φ(m, l)``; ``m`` is ``0``, ``"s"`` or an integer ``>= 1``."""
    if isinstance(m, str):
        if m != "s":
            raise DomainError(f"m must be 0, 's' or a positive integer, got {m!r}")
        return ((2 * l + 4) * (2 + s) - 2 * l) / s
    if int(m) != m or m < 0:
        raise DomainError(f"m must be 0, 's' or a positive integer, got {m!r}")
    m = int(m)
    if m == 0:
        return 2 * l + 5
    if m == 1:
        return max(phi("s", x_fn(l, s, gamma), s, gamma), y_fn(l, s, gamma))
    return max(u_fn(m, l, s), phi(m - 1, z_fn(l, s), s, gamma))


def psi(m: int, l: float, gamma: float) -> float:
    if m < 0 or int(m) != m:
        raise DomainError("m must be a non-negative integer")
    return 2 * l + gamma + 17 if m == 0 else l + gamma + 10


def rho(m: int, l: float, s: float, gamma: float) -> float:
    if m < 1 or int(m) != m:
        raise DomainError("rho needs an integer m >= 1")
    return (m + 7) * psi(m - 1, z_fn(l, s), gamma) - (m + 6) * (l + gamma + 10)


def varphi(m: int, l: float, s: float, gamma: float) -> float:
    if m < 0 or int(m) != m:
        raise DomainError("m must be a non-negative integer")
    if m == 0:
        return phi(5, 2 * l + gamma + 17, s, gamma)
    return max(varphi(m - 1, z_fn(l, s), s, gamma), rho(m, l, s, gamma))


# ----------------------------------------------------------------------------
# theorem side conditions
# ----------------------------------------------------------------------------


def theorem_conditions(l: float, which: str, cfg: KernelConfig) -> dict:
    """Check the two hypotheses on the weight ``l`` of the error theorems.

    ``which="main3"`` (L¹ error estimate) or ``"main4"`` (Sobolev error
    estimate).  ``details`` lists both sides of each condition.
    """
    s, g, K = cfg.s, cfg.gamma, cfg.K
    a2 = angular_constants(None, cfg).A2
    if which == "main3":
        e = 2 * l - 2 * s
        lhs1 = (4 / math.pi) ** e * (l - s)
        rhs1 = 2 ** (4 - 2 * s) * math.pi * K / a2
        lhs2 = 2 * l
    elif which == "main4":
        e = 2 * l + 5 - 2 * s
        lhs1 = (4 / math.pi) ** e * e
        rhs1 = 2 ** (5 - 2 * s) * math.pi * K / a2
        lhs2 = 2 * l + 5
    else:
        raise DomainError("which must be 'main3' or 'main4'")
    rhs2 = s / (1 - s) * (g + 2) + g
    c1 = lhs1 >= rhs1
    c2 = lhs2 >= rhs2
    return {
        "ok": bool(c1 and c2),
        "details": {
            "coercivity": {"lhs": lhs1, "rhs": rhs1, "ok": bool(c1)},
            "weight": {"lhs": lhs2, "rhs": rhs2, "ok": bool(c2)},
            "A2": a2,
        },
    }


def minimal_l(which: str, cfg: KernelConfig, step: float = 0.25, l_max: float = 100.0) -> float | None:
    """Smallest ``l`` on a ``step`` grid satisfying both conditions (``None`` if none up to ``l_max``)."""
    for l in np.arange(0.0, l_max + step / 2, step):
        if theorem_conditions(float(l), which, cfg)["ok"]:
            return float(l)
    return None


# ----------------------------------------------------------------------------
# order studies
# ----------------------------------------------------------------------------


def slope_fit(points: Iterable[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares line through ``(log ε, log e)``: ``(slope, intercept, max |residual|)``."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise DomainError("slope_fit needs at least two points")
    if np.any(pts <= 0):
        raise DomainError("slope_fit needs positive eps and errors")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    slope, icpt = np.polyfit(x, y, 1)
    res = float(np.max(np.abs(y - (slope * x + icpt))))
    return float(slope), float(icpt), res


def error_function(f_eps, f_ref, eps: float, s: float) -> np.ndarray:
    """``F^ε_R = (f^ε - f_ref) / ε^{3-2s}``."""
    a = f_eps.values if isinstance(f_eps, GridField) else np.asarray(f_eps, dtype=float)
    b = f_ref.values if isinstance(f_ref, GridField) else np.asarray(f_ref, dtype=float)
    return (a - b) / eps ** (3.0 - 2.0 * s)


@dataclass
class StudyReport:
    """Errors over an ε sweep and the fitted log–log slope."""

    eps: list[float]
    errors: list[float]
    slope: float
    intercept: float
    max_residual: float
    expected_slope: float
    tolerance: float
    mode: str
    reference: str
    residual_limit: float = math.inf
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return abs(self.slope - self.expected_slope) <= self.tolerance and self.max_residual < self.residual_limit

    def summary(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "max_residual": self.max_residual,
            "expected_slope": self.expected_slope,
            "pass": self.passed,
        }

    def csv_rows(self) -> list[str]:
        return [f"{e:.17g},{v:.17g},{self.mode}" for e, v in zip(self.eps, self.errors)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = self.passed
        return d


def _make_report(eps, errs, expected, tol, mode, ref, residual_limit=math.inf, **extra) -> StudyReport:
    slope, icpt, res = slope_fit(zip(eps, errs))
    return StudyReport(list(map(float, eps)), list(map(float, errs)), slope, icpt, res, expected, tol, mode, ref, residual_limit, dict(extra))


def _check_sweep(eps_list: Sequence[float]) -> list[float]:
    eps = [check_eps(e) for e in eps_list]
    if len(eps) < 4:
        raise ConfigurationError("an order study needs at least 4 eps values")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigurationError("eps values must be strictly decreasing")
    return eps


def grazing_order_study(ops, f, eps_list: Sequence[float], landau: str = "sigma") -> StudyReport:
    """Slope of ``e(ε) = ‖ε^{2-2s} Q_L(f,f) - Q_ε(f,f)‖_{L¹}``.

    ``landau="sigma"`` evaluates the difference in one spectral pass (its
    Legendre sequence is ``-4Λε^{2-2s} n(n+1) - c^{graz}_n``); any other
    value subtracts separately computed ``Q_L`` (that backend) and ``Q_ε``.
    """
    eps = _check_sweep(eps_list)
    if eps[0] > 0.4 + 1e-12 or eps[-1] < 0.05 - 1e-12:
        raise ConfigurationError("grazing study eps values must lie in [0.05, 0.4]")
    ratios = np.array(eps[1:]) / np.array(eps[:-1])
    if np.ptp(ratios) > 0.05 * ratios.mean():
        raise ConfigurationError("grazing study eps values must form a geometric sequence")
    fv = f.values if isinstance(f, GridField) else np.asarray(f, dtype=float)
    s = ops.cfg.s
    lam = ops.Lambda
    errs = []
    ql = None if landau == "sigma" else ops.q_landau(fv, backend=landau)
    for e in eps:
        scale = e ** (2.0 - 2.0 * s)
        if landau == "sigma":
            c = lam * scale * ops.coefficients("landau") - ops.coefficients("grazing", e)
            d = ops.engine.apply(c, fv)
            ref = ops.grid.l1(ops.engine.apply(ops.coefficients("grazing", e), fv))
        else:
            qe = ops.q_grazing(fv, eps=e)
            d = scale * ql - qe
            ref = ops.grid.l1(qe)
        err = ops.grid.l1(d)
        if err < 1e3 * np.finfo(float).eps * max(ref, 1e-300):
            raise SignalUnderflowError(f"error {err:.3e} at eps={e} is at round-off level; refine the grid")
        errs.append(err)
    return _make_report(
        eps, errs, 3.0 - 2.0 * s, 0.3, "grazing", f"Landau backend {landau}, Lambda={lam:.17g}", residual_limit=0.2
    )


def solution_order_study(
    ops,
    f0,
    T: float,
    eps_list: Sequence[float],
    eps_ref: float,
    modes: Sequence[str] = ("compensated", "cutoff-only"),
    l: float = 2.0,
    dt: float = 5e-3,
    scheme: str = "rk4",
    landau: str = "sigma",
) -> dict[str, StudyReport]:
    """Solution-level ε sweep against the compensated run at ``eps_ref``.

    Errors are ``‖f^ε(T) - f_ref(T)‖_{L¹_{2l}}`` with identical grid, ``dt`` and
    ``T`` for every run.  Expected slopes: ``3 - 2s`` (compensated) and
    ``2 - 2s`` (cutoff-only), tolerance 0.4.
    """
    eps = _check_sweep(eps_list)
    if eps_ref > eps[-1] / 4 + 1e-15:
        raise ConfigurationError("eps_ref must be <= min(eps_list) / 4")
    s = ops.cfg.s

    def run(e: float, mode: str) -> np.ndarray:
        cfg = SolverConfig(scheme=scheme, dt=dt, T=T, eps=e, mode=mode, landau=landau, record_every=max(1, int(round(T / dt))))
        out = simulate(f0, cfg, ops).final
        ops.clear_cache()
        return out

    f_ref = run(eps_ref, "compensated")
    expected = {"compensated": 3.0 - 2.0 * s, "cutoff-only": 2.0 - 2.0 * s}
    reports = {}
    for mode in modes:
        if mode not in expected:
            raise ConfigurationError(f"unsupported study mode {mode!r}")
        errs = [weighted_l1(run(e, mode) - f_ref, 2 * l, ops.grid) for e in eps]
        reports[mode] = _make_report(
            eps,
            errs,
            expected[mode],
            0.4,
            mode,
            f"compensated run at eps_ref={eps_ref} (same grid, dt={dt}, T={T}); error norm L1 weight 2l={2 * l}",
            eps_ref=eps_ref,
            T=T,
            dt=dt,
        )
    if "compensated" in reports and "cutoff-only" in reports:
        below = all(a < b for a, b in zip(reports["compensated"].errors, reports["cutoff-only"].errors))
        for r in reports.values():
            r.extra["compensated_below_cutoff"] = below
    return reports


def write_study(reports: dict[str, StudyReport] | StudyReport, out_dir: str | Path, stem: str) -> dict:
    """Write ``<stem>.csv`` (``eps,error,mode``) and ``<stem>.json``; return the JSON payload."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(reports, StudyReport):
        reports = {reports.mode: reports}
    with open(out / f"{stem}.csv", "w", encoding="utf-8") as fh:
        fh.write("eps,error,mode\n")
        for r in reports.values():
            for row in r.csv_rows():
                fh.write(row + "\n")
    payload: dict = {m: r.summary() for m, r in reports.items()}
    ok = all(r.passed for r in reports.values())
    extra = next(iter(reports.values())).extra
    if "compensated_below_cutoff" in extra:
        payload["compensated_below_cutoff"] = extra["compensated_below_cutoff"]
        ok = ok and extra["compensated_below_cutoff"]
    payload["pass"] = ok
    with open(out / f"{stem}.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_float)
    return payload


def _json_float(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(type(x))
