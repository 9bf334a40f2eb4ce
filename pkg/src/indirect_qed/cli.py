"""Command-line front end: strict JSON configs in, CSV/JSON tables out.

Every run writes one data file plus ``<out>.manifest.json`` holding the
config echo, library versions and timings.  Data files contain no
wall-clock information, so identical configs give byte-identical output.

Exit codes: 0 success, 1 computation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .fluctuations import analyze, g2_scan
from .model import (
    SingularDetuningError,
    SqueezeModel,
    SystemParams,
    derive_linear_model,
    derive_nonlinear_model,
    thermal_occupation,
    validity_report,
)
from .oracle import (
    DegenerateSteadyStateError,
    OneModeSpec,
    TruncationError,
    TwoModeSpec,
    solve_one_mode,
    truncation_check,
    two_mode_oracle,
)
from .roots import SolverConfig
from .spectrum import (
    UnstableSteadyStateError,
    linear_response_spectrum,
    output_intensity_spectrum,
)
from .steady import kerr_steady_states, scan_drive, squeeze_steady_states

logger = logging.getLogger(__name__)

TASKS = ("params", "response", "steady-scan", "g2-scan", "spectrum", "oracle-compare")
DEFAULT_FORMAT = {"params": "json", "oracle-compare": "json"}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}


def _obj(props, required=()):
    return {"type": "object", "additionalProperties": False, "properties": props,
            "required": list(required)}


CONFIG_SCHEMA = _obj({
    "task": {"enum": list(TASKS)},
    "params": _obj({
        "omega_c": _num, "omega_a": _num, "omega_f": _num,
        "delta_c": _num, "delta_b": _num,
        "g": _num, "Omega": _num,
        "N": {"type": "integer", "minimum": 1},
        "kappa": _pos, "gamma": _nonneg, "T": _nonneg,
    }, required=("g", "Omega", "N")),
    "sweep": _obj({
        "start": _num, "stop": _num,
        "count": {"type": "integer", "minimum": 1},
        "spacing": {"enum": ["linear", "log"]},
        "values": {"type": "array", "items": _num, "minItems": 1},
    }),
    "family": {"enum": ["kerr", "squeeze"]},
    "solver": _obj({
        "tol": _pos, "merge_atol": _pos, "merge_rtol": _pos, "r_min": _pos,
        "max_iter": {"type": "integer", "minimum": 1},
        "n_radii": {"type": "integer", "minimum": 1},
        "n_phases": {"type": "integer", "minimum": 1},
    }),
    "spectrum": _obj({
        "phi": _num,
        "model": _obj({"delta_eff_s": _num, "mu": _num, "zeta": _num, "F_dprime": _num},
                      required=("delta_eff_s", "mu", "zeta", "F_dprime")),
    }),
    "oracle": _obj({
        "mode": {"enum": ["kerr", "two-mode"]},
        "start_cutoff": {"type": "integer", "minimum": 2},
        "cap": {"type": "integer", "minimum": 4},
        "rtol": _pos,
        "collective_cutoff": {"type": "integer", "minimum": 2},
    }),
    "thresholds": {"type": "object", "additionalProperties": _num},
    "output": _obj({"path": {"type": "string"}, "format": {"enum": ["csv", "json"]}}),
    "workers": {"type": "integer", "minimum": 1},
}, required=("params",))


class ConfigError(ValueError):
    pass


class ComputationError(RuntimeError):
    pass


@dataclass
class RunConfig:
    task: str
    params: SystemParams
    grid: np.ndarray | None = None
    family: str = "squeeze"
    solver: SolverConfig = field(default_factory=SolverConfig)
    phi: float | None = None
    squeeze_model: SqueezeModel | None = None
    oracle: dict = field(default_factory=dict)
    thresholds: dict | None = None
    out: str | None = None
    fmt: str = "csv"
    workers: int = 1
    raw: dict = field(default_factory=dict)


@dataclass
class Table:
    columns: list
    rows: list
    meta: dict = field(default_factory=dict)


def _build_params(block) -> SystemParams:
    absolute = {"omega_c", "omega_a", "omega_f"} & block.keys()
    relative = {"delta_c", "delta_b"} & block.keys()
    if absolute and relative:
        raise ConfigError("params: give either omega_c/omega_a/omega_f or delta_c/delta_b, not both")
    common = {k: block[k] for k in ("g", "Omega", "N", "kappa", "gamma", "T") if k in block}
    try:
        if relative:
            if relative != {"delta_c", "delta_b"}:
                raise ConfigError("params: delta_c and delta_b must be given together")
            p = SystemParams.from_detunings(block["delta_c"], block["delta_b"], **common)
        else:
            missing = {"omega_c", "omega_a", "omega_f"} - absolute
            if missing:
                raise ConfigError(f"params: missing {sorted(missing)}")
            p = SystemParams(omega_c=block["omega_c"], omega_a=block["omega_a"],
                             omega_f=block["omega_f"], **common)
        derive_linear_model(p)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"params: {exc}") from exc
    return p


def _build_grid(block) -> np.ndarray:
    if "values" in block:
        if set(block) - {"values"}:
            raise ConfigError("sweep: 'values' excludes start/stop/count/spacing")
        grid = np.asarray(block["values"], dtype=float)
    else:
        missing = {"start", "stop", "count"} - block.keys()
        if missing:
            raise ConfigError(f"sweep: missing {sorted(missing)}")
        start, stop, count = block["start"], block["stop"], block["count"]
        if block.get("spacing", "linear") == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError("sweep: log spacing needs positive start and stop")
            grid = np.geomspace(start, stop, count)
        else:
            grid = np.linspace(start, stop, count)
    if grid.size > 1:
        d = np.diff(grid)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ConfigError("sweep: grid must be strictly monotone")
    if not np.all(np.isfinite(grid)):
        raise ConfigError("sweep: grid values must be finite")
    return grid


_DEFAULT_SWEEPS = {
    "response": {"start": -2.0, "stop": 2.0, "count": 4001},
    "spectrum": {"start": -10.0, "stop": 10.0, "count": 2001},
}


def load_config(raw: dict, task: str) -> RunConfig:
    """Validate a parsed JSON config against the schema and build a RunConfig."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {where}: {exc.message}") from None
    if raw.get("task", task) != task:
        raise ConfigError(f"config task {raw['task']!r} does not match subcommand {task!r}")
    cfg = RunConfig(task=task, params=_build_params(raw["params"]), raw=raw)
    sweep = raw.get("sweep", _DEFAULT_SWEEPS.get(task))
    if sweep is not None:
        cfg.grid = _build_grid(sweep)
    elif task in ("steady-scan", "g2-scan"):
        raise ConfigError(f"task {task!r} needs a 'sweep' block")
    cfg.family = raw.get("family", "squeeze")
    try:
        cfg.solver = SolverConfig(**raw.get("solver", {}))
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc
    spec = raw.get("spectrum", {})
    cfg.phi = spec.get("phi")
    if "model" in spec:
        cfg.squeeze_model = SqueezeModel(**spec["model"])
    cfg.oracle = dict(raw.get("oracle", {}))
    if task == "oracle-compare" and cfg.oracle.get("mode") == "two-mode" and cfg.params.gamma <= 0:
        raise ConfigError("two-mode oracle needs gamma > 0 (undamped collective mode)")
    cfg.thresholds = raw.get("thresholds")
    if cfg.thresholds:
        try:
            validity_report(cfg.params, cfg.thresholds)
        except KeyError as exc:
            raise ConfigError(f"thresholds: {exc.args[0]}") from None
    out = raw.get("output", {})
    cfg.out = out.get("path")
    cfg.fmt = out.get("format", DEFAULT_FORMAT.get(task, "csv"))
    cfg.workers = raw.get("workers", 1)
    return cfg


# ---- commands ---------------------------------------------------------------

def cmd_params(cfg: RunConfig) -> Table:
    p = cfg.params
    lin = derive_linear_model(p)
    nl = derive_nonlinear_model(p)
    kerr, sq = nl.reduce_kerr(), nl.reduce_squeeze()
    rep = validity_report(p, cfg.thresholds)
    sections = {
        "linear": {**vars(lin), "delta_eff0": lin.delta_eff0},
        "nonlinear": {k: getattr(nl, k) for k in ("delta_eff1", "chi_kerr", "mu", "zeta", "F")},
        "kerr": vars(kerr),
        "squeeze": vars(sq),
        "validity_ratio": rep.ratios,
        "validity_passed": rep.passed,
    }
    rows = [[sec, k, v] for sec, d in sections.items() for k, v in d.items()]
    return Table(columns=["section", "key", "value"], rows=rows, meta={"all_passed": rep.all_passed})


def cmd_response(cfg: RunConfig) -> Table:
    p = cfg.params
    lin = derive_linear_model(p)
    # the grid is the drive detuning from the bare cavity
    curve = linear_response_spectrum(lin, p.kappa, p.omega_c + cfg.grid)
    rows = [[w, v] for w, v in zip(cfg.grid, curve.values)]
    meta = {"peak_detuning": -lin.delta_shift, "fwhm": p.kappa, "shift": lin.delta_shift}
    return Table(columns=["omega", "response"], rows=rows, meta=meta)


def cmd_steady_scan(cfg: RunConfig) -> Table:
    bc = scan_drive(cfg.family, cfg.params, cfg.grid, cfg.solver, workers=cfg.workers)
    cols = ["Omega", "branch", "re_alpha", "im_alpha", "n", "stability", "n_roots",
            "paper_branch", "residual"]
    rows = []
    by_point = {}
    for r in bc.rows():
        by_point.setdefault(r["Omega"], []).append([r[c] for c in cols])
    for om, rs in zip(bc.grid, bc.roots):
        if rs:
            rows.extend(by_point[om])
        else:
            rows.append([om, -1, None, None, None, "none", 0, 0, None])
    meta = {"family": cfg.family, "max_roots": int(bc.counts().max()),
            "gaps": {str(k): v for k, v in bc.gaps.items()}}
    return Table(columns=cols, rows=rows, meta=meta)


def cmd_g2_scan(cfg: RunConfig) -> Table:
    sc = g2_scan(cfg.params, cfg.grid, cfg.solver, workers=cfg.workers)
    cols = ["g", "n0", "C12", "C11_re", "C11_im", "n_bar", "g2_0", "stability", "flag"]
    rows = [[r[c] for c in cols] for r in sc.rows()]
    bad = [float(g) for g, f in zip(sc.g, sc.flags) if f == "no_stable_root"]
    meta = {"no_stable_root": bad}
    return Table(columns=cols, rows=rows, meta=meta)


def _spectrum_root(cfg: RunConfig):
    p = cfg.params
    m = cfg.squeeze_model or derive_nonlinear_model(p).reduce_squeeze()
    stable = [s for s in squeeze_steady_states(m, p.kappa, cfg.solver) if s.stability == "stable"]
    if not stable:
        raise ComputationError(f"spectrum: no stable steady state at Omega={p.Omega}")
    return m, min(stable, key=lambda s: s.n0)


def cmd_spectrum(cfg: RunConfig) -> Table:
    m, s = _spectrum_root(cfg)
    try:
        curve = output_intensity_spectrum(m, cfg.params.kappa, s.alpha0, cfg.grid, phi=cfg.phi)
    except UnstableSteadyStateError as exc:
        raise ComputationError(str(exc)) from exc
    cols = ["omega", "S_I", "S_I_closed_form", "u_re", "u_im", "v_re", "v_im"]
    rows = [[w, sv, lv, u.real, u.imag, v.real, v.imag]
            for w, sv, lv, u, v in zip(curve.omega, curve.values, curve.literal, curve.u, curve.v)]
    meta = {"phi": curve.phi, "re_c_s": s.alpha0.real, "im_c_s": s.alpha0.imag,
            "max_literal_deviation": curve.meta["max_literal_deviation"]}
    return Table(columns=cols, rows=rows, meta=meta)


def _spec_record(spec):
    return {k: (v if not isinstance(v, complex) else [v.real, v.imag]) for k, v in vars(spec).items()}


def _oracle_kerr_point(p: SystemParams, opts: dict, solver: SolverConfig) -> dict:
    km = derive_nonlinear_model(p).reduce_kerr()
    n_th = thermal_occupation(p.omega_c, p.T) if p.T > 0 else 0.0
    stable = [s for s in kerr_steady_states(km, p.kappa, solver) if s.stability == "stable"]
    if not stable:
        raise ComputationError(f"oracle-compare: no stable root at g={p.g}")
    s = min(stable, key=lambda s: s.n0)
    lin = analyze(km, p.kappa, s.alpha0, n_th)
    base = OneModeSpec.from_kerr(km, p.kappa, n_th=n_th, N_max=max(4, opts.get("start_cutoff", 4)))
    cut, _ = truncation_check(base, "n", start=base.N_max, cap=opts.get("cap", 120),
                              rtol=opts.get("rtol", 1e-8))
    spec = replace(base, N_max=cut)
    sd, ex = solve_one_mode(spec)
    return {
        "g": p.g, "Omega": p.Omega, "spec": _spec_record(spec), "cutoff": cut,
        "n": ex.n, "g2_0": ex.g2_0 if ex.g2_defined else None, "residual": sd.residual,
        "n_lin": lin.n_bar, "g2_lin": lin.g2_0,
        "linearization_valid": bool(abs(lin.C12) / lin.n0 < 0.1) if lin.n0 > 0 else False,
    }


def _oracle_two_mode_point(p: SystemParams, opts: dict, solver: SolverConfig) -> dict:
    lin = derive_linear_model(p)
    spec = TwoModeSpec(delta_c=p.delta_c, delta_b=p.delta_b, G=lin.G, chi=lin.chi,
                       kappa=p.kappa, gamma=p.gamma,
                       cavity_cutoff=max(2, opts.get("start_cutoff", 4)),
                       collective_cutoff=opts.get("collective_cutoff", 4))
    cut, _ = truncation_check(spec, "n", start=spec.cavity_cutoff, cap=opts.get("cap", 120),
                              rtol=opts.get("rtol", 1e-8))
    res = two_mode_oracle(replace(spec, cavity_cutoff=cut))
    return {
        "g": p.g, "Omega": p.Omega, "spec": _spec_record(replace(spec, cavity_cutoff=cut)),
        "cutoff": cut, "n": res.cavity.n,
        "g2_0": res.cavity.g2_0 if res.cavity.g2_defined else None,
        "residual": res.density.residual, "n_collective": res.n_collective,
        "n_predicted": res.predicted_n, "relative_error": res.relative_error,
    }


def _oracle_point(args):
    p, opts, solver = args
    fn = _oracle_two_mode_point if opts.get("mode", "kerr") == "two-mode" else _oracle_kerr_point
    try:
        return fn(p, opts, solver)
    except (DegenerateSteadyStateError, TruncationError) as exc:
        raise ComputationError(f"oracle-compare at g={p.g}: {exc}") from exc


def cmd_oracle_compare(cfg: RunConfig) -> Table:
    gs = cfg.grid if cfg.grid is not None else np.array([cfg.params.g])
    jobs = [(cfg.params.replace(g=float(g)), cfg.oracle, cfg.solver) for g in gs]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            records = list(ex.map(_oracle_point, jobs))
    else:
        records = [_oracle_point(j) for j in jobs]
    cols = list(records[0].keys())
    return Table(columns=cols, rows=[[r[c] for c in cols] for r in records],
                 meta={"mode": cfg.oracle.get("mode", "kerr")})


COMMANDS = {
    "params": cmd_params,
    "response": cmd_response,
    "steady-scan": cmd_steady_scan,
    "g2-scan": cmd_g2_scan,
    "spectrum": cmd_spectrum,
    "oracle-compare": cmd_oracle_compare,
}


# ---- output -----------------------------------------------------------------

def _fmt_cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (dict, list)):
        return json.dumps(_jsonable(v), sort_keys=True)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def render(table: Table, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_fmt_cell(v) for v in row])
        return buf.getvalue()
    doc = {"columns": table.columns,
           "records": [dict(zip(table.columns, (_jsonable(v) for v in row))) for row in table.rows],
           "meta": _jsonable(table.meta)}
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _manifest(cfg, args, text, started, elapsed, code, error):
    return {
        "task": cfg.task,
        "config": cfg.raw,
        "cli": {"format": cfg.fmt, "workers": cfg.workers, "phi": args.phi},
        "output": cfg.out,
        "sha256": hashlib.sha256(text.encode()).hexdigest() if text is not None else None,
        "exit_code": code,
        "error": error,
        "started_utc": started,
        "elapsed_s": elapsed,
        "versions": {"indirect_qed": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
    }


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="indirect-qed", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="task", required=True)
    for t in TASKS:
        sp = sub.add_parser(t)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", help="output file (default: config output.path or stdout)")
        sp.add_argument("--format", choices=["csv", "json"])
        sp.add_argument("--workers", type=int)
        sp.add_argument("--phi", type=float, help="quadrature phase override in radians (spectrum)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        cfg = load_config(raw, args.task)
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            cfg.workers = args.workers
        if args.format:
            cfg.fmt = args.format
        if args.out:
            cfg.out = args.out
        if args.phi is not None:
            if args.task != "spectrum":
                raise ConfigError("--phi only applies to the spectrum task")
            cfg.phi = args.phi
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    text, code, error = None, 0, None
    try:
        table = COMMANDS[cfg.task](cfg)
        text = render(table, cfg.fmt)
        if table.meta.get("no_stable_root"):
            code = 1
            error = f"no stable root at g = {table.meta['no_stable_root']}"
    except (ComputationError, SingularDetuningError, ArithmeticError, RuntimeError) as exc:
        code, error = 1, str(exc)
    elapsed = time.perf_counter() - t0

    if text is not None:
        if cfg.out:
            Path(cfg.out).write_text(text)
        else:
            sys.stdout.write(text)
    if cfg.out:
        man = _manifest(cfg, args, text, started, elapsed, code, error)
        Path(cfg.out + ".manifest.json").write_text(json.dumps(_jsonable(man), indent=2) + "\n")
    if error:
        print(f"error: {error}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
