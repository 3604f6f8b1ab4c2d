"""Command-line entry point: ``robinlab trace | minimize | verify <check>``.

Exit codes: 0 success, 2 configuration error, 3 numerical instability,
4 step budget exhausted, 5 verification failure.

Random ensembles use numpy's PCG64 generator (a 128-bit permuted linear
congruential generator with XSL-RR output), seeded with ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .conformal import (mu_flat, random_band_limited, random_log_normal, trace_conformal,
                        write_factor_csv, read_factor_csv)
from .errors import ConfigError, InequalityViolated, NumericalInstability, RobinLabError
from .extremal import (DEFAULT_SCHEDULE, minimize, mobius_jacobian, verify_duality,
                       verify_sharp_hls)
from .geometry import SurfaceSpec, surface_from_mapping
from .green_mass import anomaly_constant, robin_mass_field, trace_robin, verify_appendix_identity
from .spectral import dump_spectrum_csv, model_for, zeta_residue

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BUDGET, EXIT_VERIFY = 0, 2, 3, 4, 5

CHECKS = ("hls", "duality", "appendix", "conformal-identity", "scale-invariance")
STARTS = ("uniform", "random", "perturbed")


@dataclass(frozen=True)
class RunConfig:
    surface: str = "sphere"
    n: int = 2
    volume: float | None = None
    basis: tuple | None = None
    truncation: int | None = None
    resolution: int | None = None
    eps_schedule: tuple = DEFAULT_SCHEDULE
    tol: float = 1e-6
    budget: int = 500
    seed: int = 0
    samples: int = 200
    start: str = "random"
    out: str | None = None

    def surface_spec(self) -> SurfaceSpec:
        cfg = {"surface": self.surface, "n": self.n, "volume": self.volume,
               "basis": None if self.basis is None else [list(r) for r in self.basis]}
        return surface_from_mapping(cfg)

    def validate(self) -> "RunConfig":
        self.surface_spec()
        for name in ("truncation", "resolution"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 1):
                raise ConfigError(f"field '{name}' must be a positive integer")
        if not (isinstance(self.budget, int) and self.budget >= 0):
            raise ConfigError("field 'budget' must be a nonnegative integer")
        if not (isinstance(self.samples, int) and self.samples >= 1):
            raise ConfigError("field 'samples' must be a positive integer")
        if not (self.tol > 0):
            raise ConfigError("field 'tol' must be positive")
        sched = self.eps_schedule
        if (not sched or any(not 0 <= e <= 0.5 for e in sched)
                or any(b > a for a, b in zip(sched, sched[1:]))):
            raise ConfigError("field 'eps_schedule' must be decreasing values in [0, 0.5]")
        if not (self.start in STARTS or self.start.startswith("file:")):
            raise ConfigError(f"field 'start' must be one of {STARTS} or file:PATH")
        return self


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ConfigError("non-finite value in configuration")
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize {v!r}")


def emit_config(cfg: RunConfig) -> str:
    """TOML text; ``parse_config(emit_config(c)) == c`` and re-emission is identical."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        lines.append(f"{f.name} = {_toml_value(v)}")
    return "\n".join(lines) + "\n"


def _coerce(name, value):
    kinds = {f.name: f for f in fields(RunConfig)}
    if name not in kinds:
        raise ConfigError(f"unknown field '{name}'")
    try:
        if name in ("n", "truncation", "resolution", "budget", "seed", "samples"):
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError
            return int(value)
        if name in ("volume", "tol"):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            return float(value)
        if name == "basis":
            rows = tuple(tuple(float(x) for x in r) for r in value)
            if len(rows) != 2 or any(len(r) != 2 for r in rows):
                raise TypeError
            return rows
        if name == "eps_schedule":
            return tuple(float(x) for x in value)
        if name in ("surface", "start", "out"):
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"field '{name}' has an invalid value: {value!r}") from None
    return value


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"configuration is not valid TOML: {exc}") from exc
    return RunConfig(**{k: _coerce(k, v) for k, v in data.items()})


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _dump_json(obj, indent=0) -> str:
    """JSON writer that prints every float with 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_dump_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_dump_json(v, indent + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _dump_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if math.isfinite(obj):
            return format(obj, ".17g")
        return json.dumps(str(obj))
    return json.dumps(obj)


def _config_echo(cfg: RunConfig) -> dict:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is not None:
            out[f.name] = _plain(v)
    return out


def _emit_report(cfg: RunConfig, command: str, results: dict, diagnostics: dict, t0: float) -> str:
    report = {"command": command, "config": _config_echo(cfg), "results": _plain(results),
              "diagnostics": _plain(diagnostics), "wall_time": time.perf_counter() - t0}
    text = _dump_json(report) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def _witness_path(cfg: RunConfig, check: str) -> str:
    base = os.path.dirname(os.path.abspath(cfg.out)) if cfg.out else os.getcwd()
    return os.path.join(base, f"witness_{check}.csv")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _model(cfg: RunConfig):
    return model_for(cfg.surface_spec(), cfg.truncation, cfg.resolution)


def cmd_trace(cfg: RunConfig, dump_mass: str | None = None, dump_spectrum: str | None = None):
    t0 = time.perf_counter()
    model = _model(cfg)
    rep = verify_appendix_identity(model)
    results = {"trace_robin": rep.trace_robin, "trace_zeta": rep.trace_zeta,
               "zeta_error": rep.zeta_error, "residue": zeta_residue(model.surface),
               "anomaly_constant": anomaly_constant(model.surface.n).c_n,
               "anomaly_times_volume": rep.anomaly_volume, "defect": rep.defect}
    diag = {}
    if model.grid is not None:
        field_ = robin_mass_field(model)
        diag["mass_spread"] = field_.spread
        if dump_mass:
            write_factor_csv(dump_mass, field_.values)
    if dump_spectrum:
        dump_spectrum_csv(model, dump_spectrum)
    return _emit_report(cfg, "trace", results, diag, t0), EXIT_OK


def _start_field(cfg: RunConfig, model, rng):
    if cfg.start == "uniform":
        return np.ones(model.grid.size)
    if cfg.start == "random":
        return random_log_normal(model, rng, amplitude=0.3, band=4)
    if cfg.start == "perturbed":
        return 1.0 + 0.3 * random_band_limited(model, rng, band=1) / 3.0
    return read_factor_csv(cfg.start[len("file:"):], model)


def cmd_minimize(cfg: RunConfig, dump_field: str | None = None):
    t0 = time.perf_counter()
    model = _model(cfg)
    rng = np.random.default_rng(cfg.seed)
    mf = robin_mass_field(model)
    F0 = _start_field(cfg, model, rng)
    state = minimize(model, mf, F0, cfg.eps_schedule, cfg.tol, cfg.budget)
    ref = trace_robin(model, mf)
    results = {"mu": state.report.mu, "epsilon": state.epsilon, "residual_norm": state.residual_norm,
               "mass_std": state.mass_std, "robin_trace": ref, "mu_minus_robin_trace": state.report.mu - ref,
               "concentration": [{"delta": c.delta, "fraction": c.best_mass_fraction}
                                 for c in state.concentration],
               "regime": state.regime, "steps": state.steps, "history": list(state.history)}
    diag = {"converged": state.converged, "budget_exhausted": state.budget_exhausted}
    if dump_field:
        write_factor_csv(dump_field, state.F)
    code = EXIT_OK if state.converged else EXIT_BUDGET
    return _emit_report(cfg, "minimize", results, diag, t0), code


def _verify_hls(cfg, rng):
    model = _model(cfg)
    mf = robin_mass_field(model)
    ens = [random_log_normal(model, rng, amplitude=rng.uniform(0.05, 1.5), band=int(rng.integers(1, 9)))
           for _ in range(cfg.samples)]
    rep = verify_sharp_hls(model, mf, ens)
    return {"robin_trace": rep.trace, "min_gap": rep.min_gap, "members": len(ens),
            "dilation_taus": list(rep.mobius_taus), "dilation_gaps": list(rep.mobius_gaps)}


def _verify_duality(cfg, rng):
    model = _model(cfg)
    ens = []
    for _ in range(cfg.samples):
        u = random_band_limited(model, rng, band=int(rng.integers(1, 9)))
        rms = math.sqrt(model.inner(u, u) / model.volume)
        ens.append(u * rng.uniform(0.05, 3.0) / rms)
    rep = verify_duality(model, ens)
    return {"min_gap": rep.min_gap, "members": len(ens), "jensen_defect": rep.jensen_defect,
            "pairing_defect": rep.pairing_defect, "dilation_gaps": list(rep.mobius_gaps)}


def _verify_appendix(cfg, rng):
    model = _model(cfg)
    rep = verify_appendix_identity(model)
    if rep.defect >= 1e-3:
        raise InequalityViolated(f"appendix identity defect {rep.defect:.3e} >= 1e-3")
    return {"trace_robin": rep.trace_robin, "trace_zeta": rep.trace_zeta,
            "anomaly_times_volume": rep.anomaly_volume, "defect": rep.defect}


def _verify_conformal(cfg, rng):
    model = _model(cfg)
    mf = robin_mass_field(model)
    worst = 0.0
    for _ in range(cfg.samples):
        F = random_log_normal(model, rng, amplitude=rng.uniform(0.05, 1.5), band=int(rng.integers(1, 9)))
        try:
            lhs, rhs = trace_conformal(model, mf, F)
        except AssertionError as exc:
            raise InequalityViolated(str(exc), witness=F) from exc
        worst = max(worst, abs(lhs - rhs) / (1.0 + abs(rhs)))
    return {"members": cfg.samples, "max_relative_defect": worst}


def _verify_scale(cfg, rng):
    worst_mu, worst_v = 0.0, 0.0
    for _ in range(cfg.samples):
        k = int(rng.integers(8, 24))
        f = np.zeros((k + 4, k + 4))
        f[2:-2, 2:-2] = rng.random((k, k)) * (rng.random((k, k)) < 0.8)
        f[2 + k // 2, 2 + k // 2] += 1.0
        h = float(rng.uniform(0.01, 1.0))
        lam = float(2.0 ** rng.integers(-3, 4))
        g = f / lam ** 2
        Vf, Vg = h * h * f.sum(), (lam * h) ** 2 * g.sum()
        a, b = mu_flat(f, h), mu_flat(g, lam * h)
        worst_v = max(worst_v, abs(Vf - Vg) / Vf)
        dmu = abs(a - b)
        worst_mu = max(worst_mu, dmu)
        if abs(Vf - Vg) > 1e-12 * Vf or dmu > 1e-6:
            raise InequalityViolated(f"scale invariance broken: dV={abs(Vf - Vg):.3e}, dmu={dmu:.3e}",
                                     witness=f.ravel())
    return {"members": cfg.samples, "max_volume_change": worst_v, "max_mu_change": worst_mu}


_VERIFY = {"hls": _verify_hls, "duality": _verify_duality, "appendix": _verify_appendix,
           "conformal-identity": _verify_conformal, "scale-invariance": _verify_scale}


def cmd_verify(cfg: RunConfig, which: str):
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    try:
        results = _VERIFY[which](cfg, rng)
        results["passed"] = True
        code = EXIT_OK
    except InequalityViolated as exc:
        results = {"passed": False, "failing_case": which, "message": str(exc)}
        if exc.witness is not None:
            path = _witness_path(cfg, which)
            write_factor_csv(path, exc.witness)
            results["witness_csv"] = path
        code = EXIT_VERIFY
    return _emit_report(cfg, f"verify {which}", results, {}, t0), code


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration")
    common.add_argument("--surface", choices=("sphere", "torus"))
    common.add_argument("--n", type=int)
    common.add_argument("--volume", type=float)
    common.add_argument("--basis", metavar="a,b,c,d", help="lattice matrix [[a, b], [c, d]], columns generate")
    common.add_argument("--truncation", type=int)
    common.add_argument("--resolution", type=int)
    common.add_argument("--eps-schedule", metavar="CSV")
    common.add_argument("--tol", type=float)
    common.add_argument("--budget", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--start", help="uniform | random | perturbed | file:PATH")
    common.add_argument("--out", metavar="PATH", help="write the JSON report here instead of stdout")

    p = argparse.ArgumentParser(prog="robinlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("trace", parents=[common], help="Robin trace, zeta trace and their difference")
    t.add_argument("--dump-mass", metavar="CSV")
    t.add_argument("--dump-spectrum", metavar="CSV")
    m = sub.add_parser("minimize", parents=[common], help="minimize the log-HLS functional")
    m.add_argument("--dump-field", metavar="CSV")
    v = sub.add_parser("verify", parents=[common], help="run one verification")
    v.add_argument("check", choices=CHECKS)
    return p


def _config_from_args(args) -> RunConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = parse_config(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    else:
        cfg = RunConfig()
    upd = {}
    for name in ("surface", "n", "volume", "truncation", "resolution", "tol", "budget", "seed",
                 "samples", "start", "out"):
        v = getattr(args, name)
        if v is not None:
            upd[name] = v
    if args.basis is not None:
        try:
            a, b, c, d = (float(x) for x in args.basis.split(","))
        except ValueError:
            raise ConfigError(f"field 'basis' must be four comma-separated numbers, got {args.basis!r}") from None
        upd["basis"] = ((a, b), (c, d))
        upd.setdefault("surface", "torus")
    if args.eps_schedule is not None:
        try:
            upd["eps_schedule"] = tuple(float(x) for x in args.eps_schedule.split(","))
        except ValueError:
            raise ConfigError("field 'eps_schedule' must be comma-separated numbers") from None
    cfg = replace(cfg, **upd)
    if cfg.surface == "torus" and cfg.basis is None:
        cfg = replace(cfg, basis=((1.0, 0.0), (0.0, 1.0)))
    return cfg.validate()


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "trace":
            _, code = cmd_trace(cfg, args.dump_mass, args.dump_spectrum)
        elif args.command == "minimize":
            _, code = cmd_minimize(cfg, args.dump_field)
        else:
            _, code = cmd_verify(cfg, args.check)
        return code
    except ConfigError as exc:
        print(f"robinlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalInstability as exc:
        print(f"robinlab: numerical instability: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except RobinLabError as exc:
        # remaining library errors stem from inputs (dimension, lattice, grid size)
        print(f"robinlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
