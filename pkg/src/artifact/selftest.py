"""Fast built-in property checks run by ``artifact selftest``."""

from __future__ import annotations

import math
import sys
from typing import Callable

import numpy as np

from . import analysis
from .kernel import KernelConfig, check_primededuct, check_theta_bound, post_collision, random_geometries
from .solver import step
from .vgrid import VelocityGrid, interp_inequality_check, maxwellian, moments


def _bookkeeping(rng) -> bool:
    s, g = 0.5, 1.0
    cfg = KernelConfig(gamma=g, s=s)
    checks = [
        analysis.phi(0, 3, s, g) == 11,
        analysis.phi("s", 2, s, g) == 32,
        analysis.x_fn(2, s, g) == 19.5,
        analysis.z_fn(2, s) == 29,
        analysis.u_fn(2, 2, s) == 110,
        analysis.psi(0, 1, g) == 20,
        analysis.psi(3, 7, g) == 18,
        analysis.rho(1, 2, s, g) == 517,
        analysis.theorem_conditions(2.0, "main3", cfg)["details"]["weight"]["ok"],
        not analysis.theorem_conditions(1.75, "main3", cfg)["details"]["weight"]["ok"],
    ]
    return all(checks)


def _post_collision(rng) -> bool:
    v = rng.uniform(-5, 5, (10000, 3))
    vs = rng.uniform(-5, 5, (10000, 3))
    sg = rng.standard_normal((10000, 3))
    sg /= np.linalg.norm(sg, axis=1, keepdims=True)
    vp, vsp = post_collision(v, vs, sg)
    e = np.sum(vp**2 + vsp**2, axis=1) - np.sum(v**2 + vs**2, axis=1)
    m = vp + vsp - v - vs
    return bool(np.max(np.abs(e)) < 1e-12 * 100 and np.max(np.abs(m)) < 1e-12)


def _primededuct(rng) -> bool:
    geoms = list(random_geometries(3000, rng))
    return all(check_primededuct(gm, p) for gm in geoms for p in (2.0, 3.0, 4.5))


def _theta_bound(rng) -> bool:
    cfg = KernelConfig(gamma=1.0, s=0.5)
    v = rng.uniform(-1, 1, (100, 3)) * 5 / math.sqrt(3)
    vs = rng.uniform(-1, 1, (100, 3)) * 5 / math.sqrt(3)
    return all(bool(np.all(check_theta_bound(v, vs, p, cfg))) for p in (3.0, 4.0))


def _landau_conservation(rng) -> bool:
    from .operators import Operators

    grid = VelocityGrid(12, 5.0)
    ops = Operators(grid, KernelConfig(gamma=1.0, s=0.5, Lambda=1.0))
    f = maxwellian(grid, 1.0, (0.3, -0.2, 0.1), 0.9).values * (1 + 0.2 * rng.uniform(size=grid.shape))
    q = ops.q_landau(f, backend="B")
    m = moments(q, grid)
    scale = grid.l1(q) * (1 + grid.L**2)
    return max(abs(m.mass), *np.abs(m.momentum), abs(m.energy)) < 1e-12 * scale


def _interpolation_inequality(rng) -> bool:
    grid = VelocityGrid(12, 6.0)
    ok = True
    for _ in range(10):
        f = maxwellian(grid, 1.0, rng.uniform(-0.5, 0.5, 3), rng.uniform(0.4, 1.0)).values
        ok &= all(interp_inequality_check(f, lam, 0.5, grid) for lam in (0.1, 1.0, 10.0))
    return bool(ok)


def _maxwellian_moments(rng) -> bool:
    grid = VelocityGrid(32, 8.0)
    m = moments(maxwellian(grid, 1.0, (1.0, 0.0, 0.0), 1.0))
    return abs(m.mass - 1) < 1e-9 and abs(m.momentum[0] - 1) < 1e-8 and abs(m.energy - 4) < 1e-8


def _rk4(rng) -> bool:
    # one RK4 step reproduces the quartic Taylor polynomial of exp(-dt)
    dt = 0.1
    f = step(np.ones(3), dt, lambda x: -x, "rk4")
    taylor = 1 - dt + dt**2 / 2 - dt**3 / 6 + dt**4 / 24
    return bool(np.all(np.abs(f - taylor) < 1e-15) and np.all(np.abs(f - math.exp(-dt)) < 1e-7))


CHECKS: list[tuple[str, Callable]] = [
    ("bookkeeping oracle", _bookkeeping),
    ("post-collision invariants", _post_collision),
    ("<v'>^{2p} increment bound", _primededuct),
    ("Theta moment bound", _theta_bound),
    ("Landau backend B conservation", _landau_conservation),
    ("interpolation inequality", _interpolation_inequality),
    ("Maxwellian moments", _maxwellian_moments),
    ("RK4 linear decay", _rk4),
]


def run_selftest(seed: int = 0, out=sys.stdout) -> bool:
    ok = True
    for name, fn in CHECKS:
        rng = np.random.default_rng(seed)
        try:
            passed = bool(fn(rng))
        except Exception as exc:  # report and continue
            print(f"FAIL {name}: {type(exc).__name__}: {exc}", file=out)
            ok = False
            continue
        print(f"{'PASS' if passed else 'FAIL'} {name}", file=out)
        ok &= passed
    return ok
