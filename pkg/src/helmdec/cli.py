"""Experiment driver: reproducible commands over the toolkit.

Subcommands: mesh, decompose, sweep, battery, hx.  Configuration is a flat
key=value file with [experiment] and [hx] sections; unknown keys are
rejected.  All outputs embed the config hash and are byte-identical across
re-runs with the same config and seed (wall-clock timings go to stderr).

Exit codes: 0 success, 2 config error, 3 precondition violation,
4 compatibility-functional violation.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fem, hx, verify
from .decompose import (CompatibilityViolation, decompose as _dispatch,
                        gradient_field, incompatible_field,
                        random_admissible_field)
from .geometry import GeometryError, catalog_names
from .mesh import build_complex, mesh_to_text
from .operators import PreconditionError
from .trace import TraceError, tag_trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_COMPATIBILITY = 4

_EXPERIMENT_KEYS = {
    "geometry", "trace", "route", "levels", "samples", "seed", "input",
    "ratio", "tol_f",
}
_HX_KEYS = {"alpha", "beta", "jumps", "tol", "maxit"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    geometry: str = "unit_cube"
    trace: tuple = ()
    route: str = "auto"
    levels: tuple = (1, 2, 3)
    samples: int = 5
    seed: int = 0
    input: str = "random"
    ratio: str = "w_h1"
    tol_f: float = 1e-10
    alpha: float = 1.0
    beta: float = 1.0
    jumps: tuple = (1.0, 1e2, 1e4, 1e6)
    hx_tol: float = 1e-8
    hx_maxit: int = 2000
    raw_lines: tuple = ()

    @property
    def hash(self) -> str:
        payload = "\n".join(self.raw_lines) + f"\nseed={self.seed}"
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _parse_levels(s: str):
    return tuple(int(x) for x in s.replace(" ", "").split(",") if x)


def load_config(path: str, seed_override=None) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    cfg = ExperimentConfig()
    lines = []
    for section in cp.sections():
        if section not in ("experiment", "hx"):
            raise ConfigError(f"unknown config section [{section}]")
        allowed = _EXPERIMENT_KEYS if section == "experiment" else _HX_KEYS
        for key, val in cp.items(section):
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            lines.append(f"{section}.{key}={val}")
    cfg.raw_lines = tuple(sorted(lines))
    e = cp["experiment"] if cp.has_section("experiment") else {}
    cfg.geometry = e.get("geometry", cfg.geometry)
    if cfg.geometry not in catalog_names(include_internal=True):
        raise ConfigError(f"unknown geometry {cfg.geometry!r}")
    cfg.trace = tuple(t.strip() for t in e.get("trace", "").split(";") if t.strip())
    cfg.route = e.get("route", cfg.route)
    if "levels" in e:
        cfg.levels = _parse_levels(e["levels"])
    try:
        cfg.samples = int(e.get("samples", cfg.samples))
        cfg.seed = int(e.get("seed", cfg.seed))
        cfg.tol_f = float(e.get("tol_f", cfg.tol_f))
    except ValueError as ex:
        raise ConfigError(str(ex)) from None
    cfg.input = e.get("input", cfg.input)
    if cfg.input not in ("random", "gradient", "perturbed"):
        raise ConfigError(f"unknown input kind {cfg.input!r}")
    cfg.ratio = e.get("ratio", cfg.ratio)
    if cp.has_section("hx"):
        h = cp["hx"]
        try:
            cfg.alpha = float(h.get("alpha", cfg.alpha))
            cfg.beta = float(h.get("beta", cfg.beta))
            if "jumps" in h:
                cfg.jumps = tuple(float(x) for x in h["jumps"].split(","))
            cfg.hx_tol = float(h.get("tol", cfg.hx_tol))
            cfg.hx_maxit = int(h.get("maxit", cfg.hx_maxit))
        except ValueError as ex:
            raise ConfigError(str(ex)) from None
    if seed_override is not None:
        cfg.seed = seed_override
    return cfg


def _slug(parts) -> str:
    out = []
    for p in parts:
        out.append("".join(c if c.isalnum() else "-" for c in str(p)).strip("-"))
    return "__".join(x for x in out if x)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _json_dump(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=1) + "\n"


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_mesh(cfg: ExperimentConfig, out: Path) -> int:
    for k in cfg.levels:
        mesh = build_complex(cfg.geometry, 1.0 / (1 << k))
        if cfg.trace:
            tag_trace(mesh, cfg.trace)  # validates the names
        text = f"# config={cfg.hash}\n" + mesh_to_text(mesh, list(cfg.trace))
        _write(out / f"{cfg.geometry}_L{k}.mesh.txt", text)
    print(f"wrote {len(cfg.levels)} mesh file(s) to {out}")
    return EXIT_OK


def _field_text(values: np.ndarray, cfg_hash: str) -> str:
    lines = [f"# config={cfg_hash}"]
    flat = values.reshape(len(values), -1)
    for i in range(len(flat)):
        lines.append(f"{i} " + " ".join(repr(float(x)) for x in flat[i]))
    return "\n".join(lines) + "\n"


def cmd_decompose(cfg: ExperimentConfig, out: Path) -> int:
    k = cfg.levels[0]
    mesh = build_complex(cfg.geometry, 1.0 / (1 << k))
    trace = tag_trace(mesh, cfg.trace)
    if cfg.input == "gradient":
        v, _ = gradient_field(mesh, trace, cfg.seed)
    elif cfg.input == "perturbed":
        v = incompatible_field(mesh, trace, cfg.seed)
    else:
        v = random_admissible_field(mesh, trace, cfg.seed)
    result = _dispatch(v, trace) if cfg.route == "auto" else \
        verify._route_call(cfg.route)(v, trace)
    if isinstance(result, CompatibilityViolation):
        print(result.message, file=sys.stderr)
        print("functionals: " + " ".join(repr(float(x)) for x in result.functionals))
        return EXIT_COMPATIBILITY
    base = _slug([cfg.geometry, ",".join(cfg.trace), result.path, f"s{cfg.seed}"])
    _write(out / f"{base}.p.txt", _field_text(result.p.values, cfg.hash))
    _write(out / f"{base}.w.txt", _field_text(result.w.values, cfg.hash))
    _write(out / f"{base}.R.txt", _field_text(result.R.values, cfg.hash))
    summary = {
        "config": cfg.hash,
        "geometry": cfg.geometry,
        "trace": list(cfg.trace),
        "level": k,
        "h": mesh.h,
        "seed": cfg.seed,
        "input": cfg.input,
        "route": result.path,
        "claims": result.claims,
        "no_log_claim": not result.claims.get("log", True),
        "norms": result.norms,
        "ratios": result.ratios,
        "identity_residual": result.identity_residual(v),
        "functionals": result.meta.get("functionals", []),
    }
    _write(out / f"{base}.summary.json", _json_dump(summary))
    if summary["no_log_claim"]:
        print("no-log claim")
    print(f"route={result.path} identity_residual={summary['identity_residual']:.3e}")
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, out: Path) -> int:
    report = verify.sweep(cfg.geometry, cfg.trace, cfg.route, cfg.levels,
                          cfg.samples, cfg.seed, cfg.ratio)
    base = _slug(["sweep", cfg.geometry, ",".join(cfg.trace), cfg.route,
                  f"s{cfg.seed}"])
    _write(out / f"{base}.csv", f"# config={cfg.hash}\n" + report.to_csv())
    payload = json.loads(report.to_json())
    payload["config"] = cfg.hash
    _write(out / f"{base}.json", _json_dump(payload))
    print(f"{report.verdict}: fit a={report.fit[0]:.3g} b={report.fit[1]:.3g} "
          f"residual={report.fit_residual:.3g}")
    return EXIT_OK


def cmd_battery(cfg: ExperimentConfig, out: Path) -> int:
    ledger = verify.invariant_battery(cfg.geometry, cfg.trace, cfg.route,
                                      cfg.seed, cfg.levels[0])
    base = _slug(["battery", cfg.geometry, ",".join(cfg.trace), cfg.route,
                  f"s{cfg.seed}"])
    rows = ["check,residual,tol,passed"]
    for item in ledger:
        rows.append(f"{item['check']},{item['residual']!r},{item['tol']!r},"
                    f"{item['passed']}")
    _write(out / f"{base}.csv", f"# config={cfg.hash}\n" + "\n".join(rows) + "\n")
    _write(out / f"{base}.json", _json_dump({"config": cfg.hash, "ledger": ledger}))
    ok = all(item["passed"] for item in ledger)
    for item in ledger:
        print(f"{'PASS' if item['passed'] else 'FAIL'} {item['check']}"
              f" residual={item['residual']:.3e}")
    return EXIT_OK if ok else EXIT_PRECONDITION


def cmd_hx(cfg: ExperimentConfig, out: Path) -> int:
    from .geometry import catalog_info

    rows = ["geometry,level,h,alpha,beta,hx_iterations,cg_iterations,final_residual"]
    summary = []
    nblocks = len(catalog_info(cfg.geometry).complex.blocks)
    for k in cfg.levels:
        mesh = build_complex(cfg.geometry, 1.0 / (1 << k))
        trace = tag_trace(mesh, cfg.trace) if cfg.trace else tag_trace(mesh, ["boundary"])
        rng = np.random.default_rng([cfg.seed, k])
        rhs = fem.EdgeField(mesh, rng.uniform(-1, 1, mesh.ne))
        rhs.values[trace.edge_mask] = 0.0
        for a in cfg.jumps:
            alpha = np.full(nblocks, cfg.alpha)
            alpha[0] = a
            beta = np.full(nblocks, cfg.beta)
            prob = hx.ModelProblem(mesh, alpha, beta, trace, rhs)
            system = hx.assemble_problem(prob)
            t0 = time.perf_counter()
            pre = hx.HXPreconditioner(system)
            res = hx.pcg_solve(system, pre, tol=cfg.hx_tol, maxit=cfg.hx_maxit)
            plain = hx.pcg_solve(system, None, tol=cfg.hx_tol,
                                 maxit=max(cfg.hx_maxit, 20000))
            wall = time.perf_counter() - t0
            print(f"level {k} alpha={a:g}: hx={res.iterations} cg={plain.iterations} "
                  f"wall={wall:.2f}s", file=sys.stderr)
            rows.append(f"{cfg.geometry},{k},{mesh.h!r},{a!r},{cfg.beta!r},"
                        f"{res.iterations},{plain.iterations},{res.final_residual!r}")
            summary.append({"level": k, "alpha": a, "hx_iterations": res.iterations,
                            "cg_iterations": plain.iterations,
                            "converged": res.converged})
    base = _slug(["hx", cfg.geometry, f"s{cfg.seed}"])
    _write(out / f"{base}.csv", f"# config={cfg.hash}\n" + "\n".join(rows) + "\n")
    _write(out / f"{base}.json", _json_dump({"config": cfg.hash, "runs": summary}))
    print(f"wrote {len(summary)} hx runs")
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="helmdec",
        description="tetrahedral edge-element Helmholtz decomposition toolkit",
    )
    parser.add_argument("command",
                        choices=["mesh", "decompose", "sweep", "battery", "hx"])
    parser.add_argument("--config", required=True, help="key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="override the seed")
    parser.add_argument("--out", default="out", help="output directory")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
    except (ConfigError, GeometryError, configparser.Error) as ex:
        print(f"config error: {ex}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    handler = {
        "mesh": cmd_mesh,
        "decompose": cmd_decompose,
        "sweep": cmd_sweep,
        "battery": cmd_battery,
        "hx": cmd_hx,
    }[args.command]
    try:
        return handler(cfg, out)
    except PreconditionError as ex:
        print(f"precondition violation: {ex}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (ConfigError, GeometryError, TraceError, ValueError) as ex:
        print(f"config error: {ex}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
