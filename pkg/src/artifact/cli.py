"""Command-line interface: ``artifact <subcommand> [config] [--set section.key=value ...]``.

Configuration files hold ``section.key = value`` lines (``#`` starts a
comment).  Unknown keys are rejected.  Exit codes: 0 success, 1 validation
failure, 2 numerical failure, 3 acceptance criterion failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import analysis
from ._spectral import OperatorSettings
from .errors import ArtifactError, ConfigurationError, NumericalError, ValidationError
from .kernel import KernelConfig, calibrate_lambda, grazing_lambda
from .solver import PicardConfig, SolverConfig, picard_solve, simulate
from .vgrid import GridField, VelocityGrid, anisotropic_gaussian, dump_field, gaussian, gaussian_mixture, maxwellian

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 1, 2, 3


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _lambda_value(text: str):
    t = text.strip().lower()
    if t in ("calibrate", "analytic"):
        return t
    v = float(text)
    if not v > 0:
        raise ValueError("lambda must be positive")
    return v


def _opt_int(text: str):
    return None if text.strip().lower() in ("none", "auto") else int(text)


def _opt_float(text: str):
    return None if text.strip().lower() in ("none", "auto") else float(text)


def _str(text: str) -> str:
    return text.strip()


# key -> (parser, default)
SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "kernel.gamma": (float, 1.0),
    "kernel.s": (float, 0.5),
    "kernel.K": (float, 1.0),
    "kernel.theta_min": (float, 1e-4),
    "kernel.lambda": (_lambda_value, "analytic"),
    "grid.N": (int, 16),
    "grid.L": (float, 7.5),
    "operator.R": (float, 6.0),
    "operator.n_rho": (int, 8),
    "operator.sigma_degree": (int, 15),
    "operator.pad": (float, 1.0),
    "operator.n_max": (_opt_int, None),
    "operator.landau": (_str, "sigma"),
    "initial.kind": (_str, "anisotropic"),
    "initial.T": (_float_list, [1.4, 0.8, 0.8]),
    "initial.u": (_float_list, [0.0, 0.0, 0.0]),
    "solver.scheme": (_str, "rk4"),
    "solver.dt": (float, 5e-3),
    "solver.T": (float, 0.5),
    "solver.eps": (float, 0.1),
    "solver.mode": (_str, "compensated"),
    "solver.record_every": (int, 1),
    "solver.q": (float, 4.0),
    "solver.l": (float, 0.0),
    "solver.clamp": (_bool, False),
    "picard.outer_iters": (int, 12),
    "picard.inner_dt": (_opt_float, None),
    "picard.tol_l1": (float, 1e-6),
    "picard.lagged_gain": (_bool, False),
    "picard.landau": (_str, "A"),
    "study.eps_list": (_float_list, [0.4, 0.283, 0.2, 0.141, 0.1]),
    "study.eps_ref": (float, 0.025),
    "study.l": (float, 2.0),
    "study.T": (float, 0.5),
    "study.dt": (float, 5e-3),
    "study.f0": (_str, "anisotropic"),
    "calibrate.eps_list": (_float_list, [0.2, 0.1]),
    "hypothesis.N": (int, 0),
    "hypothesis.l": (float, 3.0),
    "io.output_dir": (_str, "artifact_out"),
    "io.snapshot_every": (int, 0),
    "io.binary": (_bool, False),
    "seed": (int, 0),
}


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(repr(float(v)) for v in value)
    if value is None:
        return "auto"
    return str(value)


@dataclass
class RunConfig:
    """Parsed configuration: explicitly given values plus schema defaults."""

    values: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        if key not in SCHEMA:
            raise KeyError(key)
        return self.values.get(key, SCHEMA[key][1])

    def set(self, key: str, raw: str) -> None:
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        try:
            self.values[key] = SCHEMA[key][0](raw.strip())
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {key}: {raw.strip()!r} ({exc})") from exc

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        cfg = cls()
        for n, line in enumerate(text.splitlines(), 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigurationError(f"line {n}: expected 'section.key = value'")
            k, v = body.split("=", 1)
            if k.strip() in cfg.values:
                raise ConfigurationError(f"line {n}: duplicate key {k.strip()!r}")
            cfg.set(k, v)
        return cfg

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls()
        p = Path(path)
        if not p.is_file():
            raise ConfigurationError(f"config file not found: {p}")
        return cls.parse(p.read_text(encoding="utf-8"))

    def dumps(self) -> str:
        return "".join(f"{k} = {_format(self.values[k])}\n" for k in sorted(self.values))

    # ---- builders ----------------------------------------------------
    def kernel(self, lam: float | None = None) -> KernelConfig:
        return KernelConfig(self["kernel.gamma"], self["kernel.s"], self["kernel.K"], self["kernel.theta_min"], lam)

    def grid(self) -> VelocityGrid:
        return VelocityGrid(self["grid.N"], self["grid.L"])

    def settings(self) -> OperatorSettings:
        return OperatorSettings(
            R=self["operator.R"],
            n_rho=self["operator.n_rho"],
            sigma_degree=self["operator.sigma_degree"],
            pad=self["operator.pad"],
            n_max=self["operator.n_max"],
        )

    def solver(self) -> SolverConfig:
        pc = PicardConfig(self["picard.outer_iters"], self["picard.inner_dt"], self["picard.tol_l1"], self["picard.lagged_gain"], self["picard.landau"])
        return SolverConfig(
            scheme=self["solver.scheme"],
            dt=self["solver.dt"],
            T=self["solver.T"],
            eps=self["solver.eps"],
            mode=self["solver.mode"],
            picard=pc,
            record_every=self["solver.record_every"],
            landau=self["operator.landau"],
            q=self["solver.q"],
            l=self["solver.l"],
            snapshot_every=self["io.snapshot_every"],
            clamp=self["solver.clamp"],
        )


def initial_field(kind: str, grid: VelocityGrid, T=(1.4, 0.8, 0.8), u=(0.0, 0.0, 0.0)) -> GridField:
    if kind == "anisotropic":
        return gaussian(grid, 1.0, u, T)
    if kind == "maxwellian":
        return maxwellian(grid, 1.0, u, float(np.mean(T)))
    if kind == "mixture":
        return gaussian_mixture(grid)
    raise ConfigurationError(f"unknown initial kind {kind!r}; use anisotropic, maxwellian or mixture")


def calibration_family(grid: VelocityGrid) -> list[np.ndarray]:
    """Isotropic Gaussians and Gaussian mixtures used to fit ``Λ``."""
    m1 = maxwellian(grid, 1.0, (0.0, 0.0, 0.0), 0.9).values
    m2 = gaussian_mixture(grid).values
    m3 = 0.6 * maxwellian(grid, 1.0, (0.0, 0.8, -0.4), 0.7).values + 0.4 * maxwellian(grid, 1.0, (0.3, -1.0, 0.5), 1.0).values
    return [m1, m2, m3]


def build_operators(cfg: RunConfig, out=sys.stdout):
    from .operators import Operators

    grid = cfg.grid()
    lam = cfg["kernel.lambda"]
    base = Operators(grid, cfg.kernel(None), cfg.settings())
    if lam == "calibrate":
        res = calibrate_lambda(cfg["calibrate.eps_list"], calibration_family(grid), ops=base)
        print(f"calibrated Lambda = {res.Lambda:.17g}", file=out)
        return base.with_lambda(res.Lambda)
    if lam == "analytic":
        return base
    return base.with_lambda(float(lam))


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------


def _outdir(cfg: RunConfig) -> Path:
    p = Path(cfg["io.output_dir"])
    p.mkdir(parents=True, exist_ok=True)
    return p


def _dump_final(grid: VelocityGrid, f: np.ndarray, cfg: RunConfig, out: Path) -> Path:
    binary = cfg["io.binary"]
    path = out / ("final_field.bin" if binary else "final_field.txt")
    dump_field(GridField(grid, f), path, binary=binary)
    return path


def cmd_simulate(cfg: RunConfig, out=sys.stdout) -> int:
    ops = build_operators(cfg, out)
    sc = cfg.solver()
    f0 = initial_field(cfg["initial.kind"], ops.grid, cfg["initial.T"], cfg["initial.u"])
    traj = simulate(f0, sc, ops)
    d = _outdir(cfg)
    traj.write_csv(d / "diagnostics.csv")
    path = _dump_final(ops.grid, traj.final, cfg, d)
    print(f"mass drift {traj.drift('mass'):.17g}", file=out)
    print(f"energy drift {traj.drift('energy'):.17g}", file=out)
    print(f"wrote {d / 'diagnostics.csv'} and {path}", file=out)
    return EXIT_OK


def cmd_picard(cfg: RunConfig, out=sys.stdout) -> int:
    ops = build_operators(cfg, out)
    sc = cfg.solver()
    f0 = initial_field(cfg["initial.kind"], ops.grid, cfg["initial.T"], cfg["initial.u"])
    traj, gaps = picard_solve(f0, sc, ops)
    d = _outdir(cfg)
    traj.write_csv(d / "diagnostics.csv")
    with open(d / "picard_gaps.csv", "w", encoding="utf-8") as fh:
        fh.write("iteration,gap\n")
        for i, g in enumerate(gaps, 1):
            fh.write(f"{i},{g:.17g}\n")
    _dump_final(ops.grid, traj.final, cfg, d)
    for i, g in enumerate(gaps, 1):
        print(f"iteration {i}: gap {g:.17g}", file=out)
    return EXIT_OK


def cmd_grazing_order(cfg: RunConfig, out=sys.stdout) -> int:
    ops = build_operators(cfg, out)
    f = initial_field(cfg["study.f0"], ops.grid, cfg["initial.T"], cfg["initial.u"])
    rep = analysis.grazing_order_study(ops, f, cfg["study.eps_list"], landau=cfg["operator.landau"])
    payload = analysis.write_study(rep, _outdir(cfg), "grazing_order")
    print(json.dumps(payload, sort_keys=True), file=out)
    return EXIT_OK if payload["pass"] else EXIT_ACCEPTANCE


def cmd_solution_order(cfg: RunConfig, out=sys.stdout) -> int:
    ops = build_operators(cfg, out)
    f0 = initial_field(cfg["study.f0"], ops.grid, cfg["initial.T"], cfg["initial.u"])
    reps = analysis.solution_order_study(
        ops,
        f0,
        cfg["study.T"],
        cfg["study.eps_list"],
        cfg["study.eps_ref"],
        l=cfg["study.l"],
        dt=cfg["study.dt"],
        scheme="rk4" if cfg["solver.scheme"] == "picard" else cfg["solver.scheme"],
        landau=cfg["operator.landau"],
    )
    payload = analysis.write_study(reps, _outdir(cfg), "solution_order")
    print(json.dumps(payload, sort_keys=True), file=out)
    return EXIT_OK if payload["pass"] else EXIT_ACCEPTANCE


def cmd_calibrate(cfg: RunConfig, out=sys.stdout) -> int:
    from .operators import Operators

    grid = cfg.grid()
    ops = Operators(grid, cfg.kernel(None), cfg.settings())
    res = calibrate_lambda(cfg["calibrate.eps_list"], calibration_family(grid), ops=ops)
    print(f"Lambda = {res.Lambda:.17g}", file=out)
    print(f"analytic leading-order Lambda = {grazing_lambda(ops.cfg):.17g}", file=out)
    for e, lam, r in zip(res.eps, res.per_eps, res.residuals):
        print(f"eps = {e:.17g}: Lambda = {lam:.17g}, relative residual = {r:.17g}", file=out)
    print(f"max relative deviation between consecutive eps: {res.pair_deviation:.17g}", file=out)
    print(f"stable = {str(res.stable).lower()}, extrapolated = {str(res.extrapolated).lower()}", file=out)
    for note in res.notes:
        print(f"note: {note}", file=out)
    return EXIT_OK


def cmd_hypothesis(cfg: RunConfig, out=sys.stdout) -> int:
    kc = cfg.kernel(None)
    s, g = kc.s, kc.gamma
    Nq, l = cfg["hypothesis.N"], cfg["hypothesis.l"]
    print(f"s = {s!r}, gamma = {g!r}, N = {Nq}, l = {l!r}", file=out)
    print("function,m,l,value", file=out)
    print(f"phi,{Nq},{l!r},{analysis.phi(Nq, l, s, g):.17g}", file=out)
    print(f"phi,s,{l!r},{analysis.phi('s', l, s, g):.17g}", file=out)
    print(f"psi,{Nq},{l!r},{analysis.psi(Nq, l, g):.17g}", file=out)
    print(f"varphi,{Nq},{l!r},{analysis.varphi(Nq, l, s, g):.17g}", file=out)
    if Nq >= 1:
        print(f"rho,{Nq},{l!r},{analysis.rho(Nq, l, s, g):.17g}", file=out)
    print(f"x,,{l!r},{analysis.x_fn(l, s, g):.17g}", file=out)
    print(f"y,,{l!r},{analysis.y_fn(l, s, g):.17g}", file=out)
    print(f"z,,{l!r},{analysis.z_fn(l, s):.17g}", file=out)
    print(f"u,{max(Nq, 2)},{l!r},{analysis.u_fn(max(Nq, 2), l, s):.17g}", file=out)
    print("theorem,condition,lhs,rhs,ok", file=out)
    for which in ("main3", "main4"):
        r = analysis.theorem_conditions(l, which, kc)
        for name in ("coercivity", "weight"):
            d = r["details"][name]
            print(f"{which},{name},{d['lhs']:.17g},{d['rhs']:.17g},{str(d['ok']).lower()}", file=out)
        ml = analysis.minimal_l(which, kc)
        print(f"{which},minimal_l,{'none' if ml is None else repr(ml)},,", file=out)
    return EXIT_OK


def cmd_selftest(cfg: RunConfig, out=sys.stdout) -> int:
    from .selftest import run_selftest

    ok = run_selftest(seed=cfg["seed"], out=out)
    return EXIT_OK if ok else EXIT_ACCEPTANCE


COMMANDS = {
    "simulate": cmd_simulate,
    "picard": cmd_picard,
    "grazing-order": cmd_grazing_order,
    "solution-order": cmd_solution_order,
    "calibrate-lambda": cmd_calibrate,
    "hypothesis": cmd_hypothesis,
    "selftest": cmd_selftest,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # validation failures exit with 1
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="artifact", description="Compensated cutoff Boltzmann solver and order studies.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("config", nargs="?", help="configuration file with 'section.key = value' lines")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override a configuration key")
    p.add_argument("--output-dir", help="shortcut for --set io.output_dir=DIR")
    p.add_argument("--N", type=int, help="hypothesis: regularity order N")
    p.add_argument("--l", type=float, help="hypothesis: weight l")
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        for item in args.overrides:
            if "=" not in item:
                raise ConfigurationError(f"override {item!r} is not KEY=VALUE")
            k, v = item.split("=", 1)
            cfg.set(k, v)
        if args.output_dir:
            cfg.set("io.output_dir", args.output_dir)
        if args.N is not None:
            cfg.set("hypothesis.N", str(args.N))
        if args.l is not None:
            cfg.set("hypothesis.l", repr(args.l))
        np.random.seed(cfg["seed"])
        return COMMANDS[args.command](cfg, sys.stdout)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ArtifactError as exc:  # pragma: no cover
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
