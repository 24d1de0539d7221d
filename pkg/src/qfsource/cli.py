"""Scenario runner: ``python -m qfsource run|list-scenarios|describe``.

A scenario is a JSON file naming a unit system, an optional lattice and
source, and a list of analyses. Every analysis writes its tables to the
output directory and contributes one entry to ``verdict.json``. Exit codes:
0 when every verdict passes, 1 when any fails, 2 for usage errors.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import field_dynamics as fd
from . import radiation as rad
from . import retarded_reference as rr
from . import single_mode as sm
from . import uncertainty as unc
from .core import DEFAULT_TOLERANCES, UnitSystem
from .mode_basis import build_lattice
from .quadrature import ShellSpec
from .sources import source_from_dict, time_reverse

ANALYSES = ("fieldmap", "causality", "timereversal", "wave-residual", "energy",
            "cherenkov", "dipole", "variance", "single-mode")
NEEDS_SOURCE = {"fieldmap", "causality", "timereversal", "wave-residual", "energy"}

SCHEMA = {
    "type": "object",
    "required": ["name", "analyses"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "description": {"type": "string"},
        "topic": {"type": "string"},
        "units": {"enum": ["si", "natural"]},
        "constants": {"type": "object",
                      "properties": {k: {"type": "number", "exclusiveMinimum": 0}
                                     for k in ("c", "epsilon0", "hbar", "k_B")},
                      "additionalProperties": False},
        "lattice": {"type": "object", "required": ["L", "n_max"],
                    "properties": {"L": {"type": "number", "exclusiveMinimum": 0},
                                   "n_max": {"type": "integer", "minimum": 1}},
                    "additionalProperties": False},
        "source": {"type": "object", "required": ["kind"]},
        "grid": {"type": "object",
                 "properties": {"n": {"type": "integer", "minimum": 1},
                                "points": {"type": "array",
                                           "items": {"type": "array", "items": {"type": "number"},
                                                     "minItems": 3, "maxItems": 3}}},
                 "additionalProperties": False},
        "tolerances": {"type": "object",
                       "properties": {k: {"type": "number", "exclusiveMinimum": 0}
                                      for k in ("rel", "abs", "lightcone_rel")},
                       "additionalProperties": False},
        "analyses": {"type": "array", "minItems": 1,
                     "items": {"type": "object", "required": ["kind"],
                               "properties": {"kind": {"enum": list(ANALYSES)}}}},
    },
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def bundled_dir():
    return resources.files("qfsource") / "scenarios"


def bundled_scenarios() -> dict:
    out = {}
    for entry in sorted(bundled_dir().iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            data = json.loads(entry.read_text())
            out[data["name"]] = (entry, data)
    return out


def apply_override(data: dict, spec: str) -> None:
    """``a.b.0.c=<json>``; bare strings are accepted when not valid JSON."""
    if "=" not in spec:
        raise UsageError(f"override {spec!r} is not key=value")
    key, raw = spec.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        node = node[int(p)] if isinstance(node, list) else node.setdefault(p, {})
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def load_scenario(path, overrides=(), units=None) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read scenario: {exc}") from exc
    data = copy.deepcopy(data)
    try:
        for o in overrides:
            apply_override(data, o)
    except (KeyError, IndexError, ValueError, TypeError) as exc:
        raise UsageError(f"bad override: {exc}") from exc
    if units:
        data["units"] = units
    validate(data)
    return data


def validate(data: dict) -> None:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise UsageError(f"schema violation at {list(exc.absolute_path)}: {exc.message}") from exc
    kinds = {a["kind"] for a in data["analyses"]}
    if kinds & NEEDS_SOURCE and ("source" not in data or "lattice" not in data):
        raise UsageError("field analyses need both 'lattice' and 'source'")
    try:
        units = make_units(data)
        if "source" in data:
            src = source_from_dict(data["source"], units)
            if src.steady and kinds & {"causality", "timereversal"}:
                raise UsageError("causality and time-reversal analyses need a switched (non-steady) source")
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid scenario: {exc}") from exc


def make_units(data: dict) -> UnitSystem:
    mode = data.get("units", "natural")
    consts = data.get("constants", {})
    if mode == "natural":
        if consts:
            raise ValueError("natural units take no constant overrides")
        return UnitSystem.natural()
    return UnitSystem.si(**consts)


def _fmt(v):
    return repr(float(v))


def write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) if isinstance(x, (int, float, np.floating, np.integer)) else x for x in r])


def write_long(path: Path, columns: dict, id_cols=()) -> None:
    """Tidy long-format table: id columns, then (variable, value)."""
    ids = list(id_cols)
    n = len(next(iter(columns.values())))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ids + ["variable", "value"])
        for i in range(n):
            for name, col in columns.items():
                if name in ids:
                    continue
                w.writerow([_fmt(columns[c][i]) for c in ids] + [name, _fmt(col[i])])


def _clean(obj):
    """JSON-safe copy with floats as plain Python floats."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


# -------------------------------------------------------------- analyses


class Context:
    def __init__(self, data, out: Path, threads: int, plot_data: bool):
        self.data = data
        self.out = out
        self.threads = threads
        self.plot_data = plot_data
        self.units = make_units(data)
        tol = data.get("tolerances", {})
        self.tol = DEFAULT_TOLERANCES.with_overrides(**tol)
        self.lattice = None
        self.source = None
        if "lattice" in data:
            self.lattice = build_lattice(data["lattice"]["L"], data["lattice"]["n_max"], self.units)
        if "source" in data:
            self.source = source_from_dict(data["source"], self.units)
        self._amps = {}

    def grid(self, params=None):
        g = dict(self.data.get("grid", {}))
        g.update((params or {}).get("grid", {}))
        if "points" in g:
            return np.asarray(g["points"], dtype=float), None
        n = g.get("n", 17)
        L = self.lattice.L if self.lattice else 1.0
        return fd.box_grid(L, n, self.source.center if self.source else (0, 0, 0)), (n, n, n)

    def amps(self, t, lattice=None):
        lat = lattice or self.lattice
        key = (lat.n_max, float(t))
        if key not in self._amps:
            self._amps[key] = fd.evolve_amplitudes(lat, self.source, t)
        return self._amps[key]


def run_fieldmap(ctx: Context, p: dict) -> dict:
    t = p.get("t", 0.5)
    grid, dims = ctx.grid(p)
    amps = ctx.amps(t)
    snap = fd.snapshot(amps, ctx.lattice, ctx.source, grid, ctx.threads, dims)
    path = ctx.out / f"fieldmap_t{t:g}.csv"
    snap.to_csv(path)
    if p.get("binary"):
        snap.to_binary(ctx.out / f"fieldmap_t{t:g}.bin")
    if ctx.plot_data:
        cols = {name: snap.table()[:, i] for i, name in enumerate(snap.COLUMNS)}
        write_long(ctx.out / f"fieldmap_t{t:g}_long.csv", cols, ("x", "y", "z"))
    divB = fd.divergence(ctx.lattice, fd.coefficients(amps)["B"], grid, ctx.threads)
    kmax = float(np.linalg.norm(ctx.lattice.k, axis=1).max())
    bscale = float(np.abs(snap.B).max()) * kmax
    rel = float(np.abs(divB).max()) / bscale if bscale > 0 else 0.0
    return {"passed": rel < 1e-10, "t": t, "max_abs_E": float(np.abs(snap.E).max()),
            "max_abs_B": float(np.abs(snap.B).max()), "divB_relative": rel, "files": [path.name]}


def run_causality(ctx: Context, p: dict) -> dict:
    t = p.get("t", 0.5)
    grid, _ = ctx.grid(p)
    L = ctx.lattice.L
    E = fd.expectation_E_modesum(ctx.amps(t), ctx.lattice, ctx.source, grid, ctx.threads)
    rep = rr.causality_verdict(E, grid, ctx.source, t, ctx.units, L, ctx.tol.lightcone_rel,
                               p.get("tail_tol", 1e-8))
    out = {"passed": rep["passed"], "leak_ratio": rep["leak_ratio"], "threshold": rep["threshold"],
           "cone": rep["cone"]}
    rows = [[*g, *e] for g, e in zip(grid, E)]
    write_table(ctx.out / f"causality_E_t{t:g}.csv", ["x", "y", "z", "Ex", "Ey", "Ez"], rows)
    if "compare_n_max" in p:
        lat2 = build_lattice(L, p["compare_n_max"], ctx.units)
        E2 = fd.expectation_E_modesum(ctx.amps(t, lat2), lat2, ctx.source, grid, ctx.threads)
        rep2 = rr.causality_verdict(E2, grid, ctx.source, t, ctx.units, L, ctx.tol.lightcone_rel,
                                    p.get("tail_tol", 1e-8))
        ratio = rep2["leak_ratio"] / rep["leak_ratio"] if rep["leak_ratio"] > 0 else math.inf
        out["coarse_leak_ratio"] = rep2["leak_ratio"]
        out["leak_reduction"] = ratio
        out["passed"] = out["passed"] and ratio >= p.get("min_reduction", 1.5)
    if p.get("oracle"):
        part = rr.cone_partition(grid, ctx.source, t, ctx.units, L, p.get("tail_tol", 1e-8))
        pts = grid[part["inside"]]
        spec = ShellSpec(*p.get("shell", [32, 24, 24]))
        Eo, Bo = rr.retarded_grid(ctx.source, pts, t, spec, ctx.units, threads=ctx.threads)
        Em = E[part["inside"]]
        Bm = fd.expectation_B_modesum(ctx.amps(t), ctx.lattice, pts, ctx.threads)
        eE = float(np.linalg.norm(Em - Eo) / np.linalg.norm(Eo))
        eB = float(np.linalg.norm(Bm - Bo) / np.linalg.norm(Bo))
        out["oracle_L2_E"] = eE
        out["oracle_L2_B"] = eB
        out["passed"] = out["passed"] and max(eE, eB) < p.get("oracle_rel", 0.02)
    return out


def run_timereversal(ctx: Context, p: dict) -> dict:
    times = p.get("times", [0.2, 0.4])
    pts = np.asarray(p.get("points", [[0.1, 0.05, 0.2], [0.3, -0.1, 0.0]]), dtype=float)
    spec = ShellSpec(*p.get("shell", [32, 24, 24]))
    rep = rr.time_reversal_verdict(ctx.source, pts, times, spec, ctx.units, p.get("rel", 1e-6))
    rev = time_reverse(ctx.source)
    worst = 0.0
    for t in times:
        A1 = fd.expectation_A(fd.evolve_amplitudes(ctx.lattice, rev, t), ctx.lattice, pts)
        A0 = fd.expectation_A(fd.evolve_amplitudes(ctx.lattice, ctx.source, -t), ctx.lattice, pts)
        scale = float(np.abs(A0).max())
        worst = max(worst, float(np.abs(A1 + A0).max()) / scale if scale else 0.0)
    ok = rep["passed"] and worst <= max(ctx.tol.rel, 1e-10)
    return {"passed": ok, "oracle_E_residual": rep["E_residual"], "oracle_B_residual": rep["B_residual"],
            "amplitude_A_residual": worst, "tolerance": rep["tolerance"], "times": times}


def run_wave_residual(ctx: Context, p: dict) -> dict:
    t, h = p.get("t", 0.3), p.get("h", 1e-3)
    hist = fd.amplitude_history(ctx.lattice, ctx.source, t + h * np.arange(-2, 3))
    half = p.get("half_width", 0.08)
    r = np.linspace(-half, half, p.get("n", 5))
    pts = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3) + ctx.source.center
    res = fd.wave_equation_residual(hist, ctx.lattice, ctx.source, pts, threads=ctx.threads)
    write_table(ctx.out / "wave_residual.csv", ["x", "y", "z", "rx", "ry", "rz"],
                [[*a, *b] for a, b in zip(pts, res["residual"])])
    return {"passed": res["relative"] < p.get("threshold", 1e-4), "relative": res["relative"],
            "scale": res["scale"], "t": res["t"]}


def run_energy(ctx: Context, p: dict) -> dict:
    times = sorted(p.get("times", [0.2, 0.5, 0.8]))
    hist = fd.amplitude_history(ctx.lattice, ctx.source, times)
    energies = [fd.field_energy(a) for a in hist]
    write_table(ctx.out / "energy.csv", ["t", "energy"], list(zip(times, energies)))
    ok = all(e >= 0 for e in energies)
    if p.get("monotone"):
        # only meaningful once the source has stopped emitting
        ok = ok and all(b >= a * (1 - ctx.tol.rel) for a, b in zip(energies, energies[1:]))
    return {"passed": ok, "times": times, "energy": energies}


def run_cherenkov(ctx: Context, p: dict) -> dict:
    u = ctx.units
    medium = rad.medium_from_dict(p.get("medium", {"kind": "constant", "n": 1.33}))
    v = p.get("beta", 0.9) * u.c
    q = p.get("q", 1.0)
    omegas = np.asarray(p.get("omegas", list(np.linspace(1.0, 10.0, 10))), dtype=float)
    mass = p.get("mass")
    rows = rad.spectrum_table(q, v, medium, omegas, u, mass, p.get("periods", 200.0))
    rad.write_spectrum_csv(rows, ctx.out / "cherenkov_spectrum.csv")
    errs = [abs(r["P_amplitude_route"] / r["P"] - 1) for r in rows if r["P"] > 0]
    worst = max(errs)
    return {"passed": worst <= p.get("threshold", 0.03), "max_relative_error": worst,
            "n_emitting": len(errs)}


def run_dipole(ctx: Context, p: dict) -> dict:
    u = ctx.units if ctx.units.mode.value == "si" else UnitSystem.si()
    closed = rad.dipole_rate_2p1s(u)
    assembled = rad.dipole_rate_2p1s(u, assemble=True)
    rel = abs(assembled / closed - 1)
    write_table(ctx.out / "dipole_rate.csv", ["closed_form", "golden_rule", "lifetime"],
                [[closed, assembled, 1 / closed]])
    return {"passed": rel <= p.get("rel", 1e-10), "rate": closed, "golden_rule": assembled,
            "relative_difference": rel, "lifetime": 1 / closed,
            "coefficient": rad.dipole_rate_2p1s(UnitSystem.natural())}


def run_variance(ctx: Context, p: dict) -> dict:
    u = ctx.units
    sigma = p.get("sigma", 1.0)
    ker = unc.SmearingKernel(sigma, 0.0, u.c)
    checks = {}
    rows_T = []
    for ratio, tol in p.get("branches", [[0.1, 0.01], [10.0, 0.05]]):
        # sigma / sigma_T = ratio fixes T = ratio hbar c / (k_B sigma)
        T = ratio * u.hbar * u.c / (u.k_B * sigma)
        r = unc.thermal_variance_regimes(ker, T, u)
        checks[f"branch_{ratio:g}"] = {"relative_error": r["relative_error"], "tolerance": tol,
                                        "regime": r["regime"], "passed": r["relative_error"] <= tol}
        rows_T.append([T, ratio, r["value"], r["branch"], r["relative_error"]])
    write_table(ctx.out / "variance_vs_T.csv", ["T", "sigma_over_sigma_T", "full", "branch", "rel_err"], rows_T)
    const = u.epsilon0 * sigma**3 * unc.continuum_vacuum_variance(ker, u) / unc.localized_energy(ker, u)
    checks["vacuum_inequality"] = {"constant": const, "passed": const >= 1 - 1e-12}
    if ctx.lattice is not None:
        sig = p.get("sigmas", [0.1, 0.15, 0.2])
        rows = unc.sweep_sigma(ctx.lattice, sig)
        unc.write_rows_csv(rows, ctx.out / "variance_vs_sigma.csv")
    return {"passed": all(c["passed"] for c in checks.values()), "checks": checks}


def run_single_mode(ctx: Context, p: dict) -> dict:
    u = ctx.units
    omega = p.get("omega", 1.0)
    kind = p.get("state", "superposition01")
    state = {"superposition01": sm.InitialState.superposition01(),
             "coherent": sm.InitialState.coherent(complex(*p.get("alpha0", [1.0, 0.0]))),
             "fock": sm.InitialState.fock(p.get("n", 0))}[kind]
    times = np.linspace(0, p.get("t_max", 2 * math.pi / omega), p.get("samples", 100))
    vq = sm.variance_Q(state, omega, times, u.hbar)
    vp = sm.variance_P(state, omega, times, u.hbar)
    up = sm.uncertainty_product(state, omega, times, u.hbar)
    write_table(ctx.out / "single_mode.csv", ["t", "var_Q", "var_P", "uncertainty_product"],
                list(zip(times, vq, vp, up)))
    ok = bool(np.all(up >= u.hbar**2 / 4 * (1 - 1e-12)))
    out = {"passed": ok, "min_uncertainty_product": float(up.min()), "bound": u.hbar**2 / 4}
    if kind == "superposition01":
        ref = u.hbar * (2 - np.cos(omega * times) ** 2) / (2 * omega)
        err = float(np.max(np.abs(vq / ref - 1)))
        out["closed_form_error"] = err
        out["passed"] = ok and err <= 1e-12
    return out


RUNNERS = {
    "fieldmap": run_fieldmap, "causality": run_causality, "timereversal": run_timereversal,
    "wave-residual": run_wave_residual, "energy": run_energy, "cherenkov": run_cherenkov,
    "dipole": run_dipole, "variance": run_variance, "single-mode": run_single_mode,
}


def run_scenario(data: dict, out_dir: Path, threads: int = 1, plot_data: bool = False) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx = Context(data, out_dir, threads, plot_data)
    results = []
    for a in data["analyses"]:
        params = {k: v for k, v in a.items() if k != "kind"}
        res = RUNNERS[a["kind"]](ctx, params)
        results.append({"analysis": a["kind"], **res})
    verdict = {"scenario": data["name"], "units": ctx.units.mode.value,
               "passed": all(r["passed"] for r in results), "analyses": results}
    verdict = _clean(verdict)
    (out_dir / "verdict.json").write_text(json.dumps(verdict, indent=2, sort_keys=True) + "\n")
    return verdict


# ------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qfsource", description="Driven quantum-field scenario runner")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file or bundled scenario name")
    r.add_argument("scenario")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--out-dir", default=None)
    r.add_argument("--units", choices=["si", "natural"], default=None)
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--emit-plot-data", action="store_true")
    sub.add_parser("list-scenarios", help="list bundled scenarios")
    d = sub.add_parser("describe", help="describe a bundled scenario")
    d.add_argument("name")
    return ap


def _resolve(name: str):
    p = Path(name)
    if p.exists():
        return p
    bundled = bundled_scenarios()
    if name in bundled:
        return bundled[name][0]
    raise UsageError(f"no scenario file or bundled scenario named {name!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-scenarios":
            for name, (_, data) in bundled_scenarios().items():
                print(f"{name}: {data.get('description', '')}")
            return 0
        if args.command == "describe":
            bundled = bundled_scenarios()
            if args.name not in bundled:
                raise UsageError(f"unknown scenario {args.name!r}")
            data = bundled[args.name][1]
            print(f"{args.name}: {data.get('description', '')}")
            print(f"topic: {data.get('topic', '')}")
            print("analyses: " + ", ".join(a["kind"] for a in data["analyses"]))
            return 0
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        path = _resolve(args.scenario)
        data = load_scenario(path, args.override, args.units)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out_dir) if args.out_dir else Path("out") / data["name"]
    verdict = run_scenario(data, out, args.threads, args.emit_plot_data)
    for r in verdict["analyses"]:
        print(f"{r['analysis']}: {'PASS' if r['passed'] else 'FAIL'}")
    if not verdict["passed"]:
        print(f"verdict failed; report at {out / 'verdict.json'}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
