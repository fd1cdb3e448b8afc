"""Reproducible experiment driver.

Experiments are described by flat `key = value` text files; every run writes
CSV tables, line-delimited JSON records, a manifest with seeds and wall times,
and (where it helps) a plot script that consumes the CSVs.  Identical specs
produce byte-identical CSVs: all randomness derives from the single spec seed
and floats are serialized with 17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .disorder import DisorderModel, ModelParseError, SingleSiteMeasure, sample_configuration
from .geometry import make_cube
from .localization import (
    default_time_grid,
    dynamical_moment,
    edi_check,
    kernel_decay_sweep,
    two_bad_probability,
)
from .msa import (
    GateError,
    MsaParameters,
    classify_cube,
    estimate_G,
    estimate_W,
    feasible_alpha,
    run_induction,
    sample_seeds,
    scale_ladder,
)
from .operators import EnergyFunction, EnergyInterval, assemble

COMMANDS = ("classify", "estimate-g", "estimate-w", "induction", "moments",
            "kernel-decay", "edi", "two-bad")


class SpecError(ValueError):
    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        suffix = f" (field {field!r})" if field else ""
        super().__init__(f"{prefix}{message}{suffix}")


def fmt(value) -> str:
    """Canonical float serialization: 17 significant digits."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


# --- experiment specs -----------------------------------------------------------

_FLOAT_KEYS = ("site_weight", "exponent", "weight_hi", "energy", "gamma", "xi",
               "xi0", "beta", "theta", "q", "c1", "moment_power")
_INT_KEYS = ("seed", "dim", "side", "box_side", "window_side", "region_side",
             "samples", "rungs", "grid_points", "budget_sites", "workers",
             "start_rung", "edi_side")
_LIST_FLOAT_KEYS = ("support", "background", "interval", "times")
_LIST_INT_KEYS = ("background_shape", "center", "pair_offset", "distances",
                  "window_sides", "edi_centers", "scales")
_STR_KEYS = ("command", "measure", "alpha", "eta", "time_spacing")
_ATOM_KEYS = ("atoms",)

_ALL_KEYS = _FLOAT_KEYS + _INT_KEYS + _LIST_FLOAT_KEYS + _LIST_INT_KEYS + _STR_KEYS + _ATOM_KEYS


@dataclass
class ExperimentSpec:
    command: str
    seed: int
    values: dict

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key):
        if key not in self.values:
            raise SpecError(f"command {self.command!r} needs key {key!r}", field=key)
        return self.values[key]


def parse_spec(text: str) -> ExperimentSpec:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, _, rhs = line.partition("=")
        key, rhs = key.strip(), rhs.strip()
        if key in values:
            raise SpecError(f"duplicate key {key!r}", field=key, line=lineno)
        try:
            if key in _FLOAT_KEYS:
                values[key] = float(rhs)
            elif key in _INT_KEYS:
                values[key] = int(rhs)
            elif key in _LIST_FLOAT_KEYS:
                values[key] = tuple(float(v) for v in rhs.split(","))
            elif key in _LIST_INT_KEYS:
                values[key] = tuple(int(v) for v in rhs.split(","))
            elif key in _ATOM_KEYS:
                atoms = []
                for chunk in rhs.split(","):
                    v, _, w = chunk.partition(":")
                    atoms.append((float(v), float(w)))
                values[key] = tuple(atoms)
            elif key in _STR_KEYS:
                values[key] = rhs
            else:
                raise SpecError(f"unknown key {key!r}", field=key, line=lineno)
        except SpecError:
            raise
        except ValueError as exc:
            raise SpecError(f"bad value for {key!r}: {exc}", field=key, line=lineno) from exc
    if "command" not in values:
        raise SpecError("missing required key 'command'", field="command")
    if values["command"] not in COMMANDS:
        raise SpecError(f"unknown command {values['command']!r}", field="command")
    if "seed" not in values:
        raise SpecError("missing required key 'seed'", field="seed")
    command = values.pop("command")
    seed = values.pop("seed")
    return ExperimentSpec(command, seed, values)


def format_spec(spec: ExperimentSpec) -> str:
    lines = [f"command = {spec.command}", f"seed = {spec.seed}"]
    for key in _ALL_KEYS:
        if key in ("command", "seed") or key not in spec.values:
            continue
        value = spec.values[key]
        if key in _FLOAT_KEYS:
            rhs = fmt(value)
        elif key in _INT_KEYS:
            rhs = str(value)
        elif key in _LIST_FLOAT_KEYS:
            rhs = ", ".join(fmt(v) for v in value)
        elif key in _LIST_INT_KEYS:
            rhs = ", ".join(str(v) for v in value)
        elif key in _ATOM_KEYS:
            rhs = ", ".join(f"{fmt(v)}:{fmt(w)}" for v, w in value)
        else:
            rhs = str(value)
        lines.append(f"{key} = {rhs}")
    return "\n".join(lines) + "\n"


def build_model(spec: ExperimentSpec) -> DisorderModel:
    dim = spec.get("dim", 1)
    kind = spec.require("measure")
    try:
        if kind == "uniform":
            lo, hi = spec.require("support")
            measure = SingleSiteMeasure.uniform(lo, hi)
        elif kind == "hoelder":
            lo, hi = spec.require("support")
            measure = SingleSiteMeasure.hoelder(spec.get("exponent", 1.0), lo, hi)
        elif kind == "bernoulli":
            lo, hi = spec.get("support", (0.0, 1.0))
            measure = SingleSiteMeasure.bernoulli(spec.get("weight_hi", 0.5), lo, hi)
        elif kind == "pointlist":
            measure = SingleSiteMeasure.pointlist(spec.require("atoms"))
        else:
            raise SpecError(f"unknown measure kind {kind!r}", field="measure")
    except ValueError as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(str(exc), field="measure") from exc
    return DisorderModel(
        dim=dim, measure=measure,
        site_weight=spec.get("site_weight", 1.0),
        background=spec.get("background", ()),
        background_shape=spec.get("background_shape", ()),
    )


def _interval(spec: ExperimentSpec) -> EnergyInterval:
    lo, hi = spec.require("interval")
    return EnergyInterval(lo, hi)


def _site(spec: ExperimentSpec, key, default):
    value = spec.get(key)
    if value is None:
        return default
    return tuple(value)


def validate_gates(spec: ExperimentSpec, model: DisorderModel) -> None:
    """Run every parameter gate expressible from the keys present."""
    d = model.dim
    theta = spec.get("theta")
    if theta is not None and not 0.0 < theta < 0.5:
        raise GateError("theta in (0, 1/2)", f"theta = {theta}")
    q = spec.get("q")
    if q is not None and spec.command in ("estimate-w", "induction") and not q > d:
        raise GateError("q > d", f"q = {q}, d = {d}")
    beta = spec.get("beta")
    if beta is not None and theta is not None and not beta > 2 * theta:
        raise GateError("beta > 2*theta", f"beta = {beta}, theta = {theta}")
    if spec.command == "induction":
        params = _induction_params(spec, model)
        params.validate()


def _induction_params(spec: ExperimentSpec, model: DisorderModel) -> MsaParameters:
    xi0 = spec.require("xi0")
    q = spec.require("q")
    p = spec.get("moment_power", 0.0)
    alpha_text = spec.get("alpha", "auto")
    if alpha_text == "auto":
        _, alpha = feasible_alpha(model.dim, q, xi0, p)
    else:
        alpha = float(alpha_text)
    return MsaParameters(dim=model.dim, xi0=xi0, beta=spec.require("beta"),
                         theta=spec.require("theta"), q=q, alpha=alpha,
                         c1=spec.get("c1", 2.0), moment_power=p)


# --- output helpers ---------------------------------------------------------------


class RunWriter:
    def __init__(self, out_dir: Path):
        self.out = out_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs = []
        self.records = []
        self.wall = {}

    def csv(self, name: str, header, rows) -> None:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
        self.outputs.append(name)

    def record(self, kind: str, payload: dict) -> None:
        self.records.append({"record": kind, **payload})

    def text(self, name: str, content: str) -> None:
        (self.out / name).write_text(content)
        self.outputs.append(name)

    def finish(self, spec: ExperimentSpec, spec_bytes: bytes, seeds) -> None:
        lines = [json.dumps(r, sort_keys=True, default=_json_default) for r in self.records]
        self.text("records.jsonl", "\n".join(lines) + "\n" if lines else "")
        manifest = {
            "tool_version": __version__,
            "command": spec.command,
            "seed": spec.seed,
            "spec_sha256": hashlib.sha256(spec_bytes).hexdigest(),
            "spec_echo": format_spec(spec),
            "sample_seeds": [int(s) for s in seeds] if seeds is not None and len(seeds) <= 10000 else None,
            "wall_time_s": self.wall,
            "outputs": sorted(self.outputs),
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _json_default(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")


_PLOT_DECAY = """\
#!/usr/bin/env python3
# plot the kernel-decay curve written by the kernel-decay command
import csv
import matplotlib.pyplot as plt

dist, mean = [], []
with open("decay.csv") as fh:
    for row in csv.DictReader(fh):
        dist.append(float(row["distance"]))
        mean.append(float(row["mean_norm"]))
plt.loglog(dist, mean, "o-")
plt.xlabel("region distance")
plt.ylabel("mean kernel block norm")
plt.title("kernel decay")
plt.savefig("decay.png", dpi=150)
"""

_PLOT_MOMENTS = """\
#!/usr/bin/env python3
# histogram of per-sample sup moments vs their spectral bounds
import csv
import matplotlib.pyplot as plt

sups, bounds = [], []
with open("samples.csv") as fh:
    for row in csv.DictReader(fh):
        sups.append(float(row["sup_moment"]))
        bounds.append(float(row["bound"]))
plt.hist([sups, bounds], bins=30, label=["time-grid sup", "spectral bound"])
plt.legend()
plt.xlabel("moment value")
plt.title("transport moments")
plt.savefig("moments.png", dpi=150)
"""


# --- command handlers ---------------------------------------------------------------


def _run_classify(spec, model, writer, workers, budget):
    side = spec.require("side")
    gamma = spec.require("gamma")
    center = _site(spec, "center", (0,) * model.dim)
    cube = make_cube(center, side)
    if "interval" in spec.values:
        energies = _interval(spec)
    else:
        energies = [spec.require("energy")]
    cfg = sample_configuration(model, spec.seed)
    verdict = classify_cube(model, cfg, cube, energies, gamma,
                            grid_points=spec.get("grid_points", 32))
    writer.csv("verdict.csv",
               ["energy", "block_norm", "threshold", "good", "resonant"],
               [[e, n, verdict.threshold, bool(g), bool(r)]
                for e, n, g, r in zip(verdict.energies, verdict.norms,
                                      verdict.good, verdict.resonant)])
    writer.record("classify", {
        "side": side, "gamma": gamma, "center": list(center),
        "all_good": verdict.all_good, "certified": verdict.certified,
        "min_margin": verdict.min_margin, "threshold": verdict.threshold,
    })
    return [spec.seed]


def _estimate_csv(writer, report):
    writer.csv("estimate.csv",
               ["hypothesis", "side", "n_samples", "successes", "p_hat", "ci_low",
                "ci_high", "lower_one_sided", "threshold", "holds"],
               [[report.hypothesis, report.side, report.n_samples, report.successes,
                 report.p_hat, report.ci_low, report.ci_high, report.lower_one_sided,
                 report.threshold, bool(report.holds)]])
    writer.record("estimate", report.to_dict())


def _run_estimate_g(spec, model, writer, workers, budget):
    side = spec.require("side")
    report = estimate_G(model, _interval(spec), side, spec.require("gamma"),
                        spec.require("xi"), spec.require("samples"), spec.seed,
                        placement=((0,) * model.dim, _site(spec, "pair_offset",
                                                           (side,) + (0,) * (model.dim - 1))),
                        grid_points=spec.get("grid_points", 32), workers=workers)
    _estimate_csv(writer, report)
    writer.csv("samples.csv", ["sample", "seed", "margin", "success"],
               [[i, s, m, bool(m >= report.params["gamma"])]
                for i, (s, m) in enumerate(zip(report.extra["sample_seeds"],
                                               report.extra["sample_margins"]))])
    return report.extra["sample_seeds"]


def _run_estimate_w(spec, model, writer, workers, budget):
    if "interval" in spec.values:
        energy = _interval(spec)
    else:
        energy = spec.require("energy")
    report = estimate_W(model, energy, spec.require("side"), spec.require("theta"),
                        spec.require("q"), spec.require("samples"), spec.seed,
                        grid_points=spec.get("grid_points", 32), workers=workers)
    _estimate_csv(writer, report)
    writer.csv("energies.csv", ["energy", "events", "p_hat"],
               [[row["energy"], row["events"], row["p_hat"]]
                for row in report.extra["per_energy"]])
    return report.extra["sample_seeds"]


def _run_induction(spec, model, writer, workers, budget):
    params = _induction_params(spec, model)
    report = run_induction(model, params, spec.require("side"), spec.require("gamma"),
                           _interval(spec), spec.require("samples"),
                           spec.get("rungs", 5), spec.seed,
                           budget_sites=budget, workers=workers,
                           grid_points=spec.get("grid_points", 32))
    rows = []
    for rung in report.rungs:
        est = rung.report
        rows.append([rung.index, rung.side, rung.gamma, rung.floor, bool(rung.gamma_ok),
                     est.n_samples if est else 0, est.successes if est else 0,
                     est.p_hat if est else math.nan, est.ci_low if est else math.nan,
                     est.ci_high if est else math.nan,
                     est.threshold if est else math.nan,
                     bool(est.holds) if est else False, rung.note])
    writer.csv("ladder.csv",
               ["rung", "side", "gamma", "gamma_floor", "gamma_ok", "n", "successes",
                "p_hat", "ci_low", "ci_high", "threshold", "holds", "note"], rows)
    for rung in report.rungs:
        entry = {"rung": rung.index, "side": rung.side, "gamma": rung.gamma,
                 "gamma_floor": rung.floor, "gamma_ok": rung.gamma_ok, "note": rung.note}
        if rung.report is not None:
            entry.update({"n": rung.report.n_samples, "successes": rung.report.successes,
                          "ci": [rung.report.ci_low, rung.report.ci_high],
                          "verdict": rung.report.holds,
                          "seed_range": [min(rung.report.extra["sample_seeds"]),
                                         max(rung.report.extra["sample_seeds"])]})
        writer.record("rung", entry)
    writer.record("induction", {"halted": report.halted, "alpha": params.alpha,
                                "xi": params.xi, "all_hold": report.all_hold})
    return sample_seeds(spec.seed, spec.get("rungs", 5))


def _run_moments(spec, model, writer, workers, budget):
    box = make_cube((0,) * model.dim, spec.require("box_side"))
    window = make_cube((0,) * model.dim, spec.require("window_side"))
    times_spec = spec.get("times")
    if times_spec is None:
        times = default_time_grid()
    else:
        t_min, t_max, count = times_spec[0], times_spec[1], int(times_spec[2])
        spacing = spec.get("time_spacing", "log")
        times = (np.geomspace(t_min, t_max, count) if spacing == "log"
                 else np.linspace(t_min, t_max, count))
    report = dynamical_moment(model, box, spec.get("moment_power", 0.0),
                              _interval(spec), window, times,
                              spec.require("samples"), spec.seed, workers=workers)
    writer.csv("samples.csv",
               ["sample", "seed", "sup_moment", "bound", "edge_tail", "states_in_interval"],
               [[i, s.seed, s.sup_moment, s.bound, s.edge_tail, s.states_in_interval]
                for i, s in enumerate(report.samples)])
    writer.csv("summary.csv",
               ["box_side", "moment_power", "n_samples", "sup_mean", "sup_ci_low",
                "sup_ci_high", "bound_mean", "bound_ci_low", "bound_ci_high",
                "domination_ok", "max_edge_tail"],
               [[report.box_side, report.moment_power, report.n_samples,
                 report.sup_mean, report.sup_ci[0], report.sup_ci[1],
                 report.bound_mean, report.bound_ci[0], report.bound_ci[1],
                 bool(report.domination_ok), report.max_edge_tail]])
    writer.record("moments", {
        "box_side": report.box_side, "moment_power": report.moment_power,
        "sup_mean": report.sup_mean, "bound_mean": report.bound_mean,
        "domination_ok": report.domination_ok,
    })
    writer.text("plot_moments.py", _PLOT_MOMENTS)
    return [s.seed for s in report.samples]


def _run_kernel_decay(spec, model, writer, workers, budget):
    box = make_cube((0,) * model.dim, spec.require("box_side"))
    interval = _interval(spec)
    eta_kind = spec.get("eta", "indicator")
    eta = EnergyFunction.indicator(interval) if eta_kind == "indicator" \
        else EnergyFunction.bump(interval)
    r_side = spec.get("region_side", 9)
    pairs = []
    for dist in spec.require("distances"):
        c1 = -(dist // 2) - (r_side - 1) // 2
        c2 = dist - dist // 2 + (r_side - 1) // 2
        pairs.append((make_cube((c1,) + (0,) * (model.dim - 1), r_side),
                      make_cube((c2,) + (0,) * (model.dim - 1), r_side)))
    report = kernel_decay_sweep(model, box, eta, pairs, spec.require("samples"),
                                spec.seed, workers=workers)
    writer.csv("decay.csv",
               ["distance", "mean_norm", "ci_low", "ci_high", "bound_mean", "n"],
               [[p.distance, p.mean, p.ci_low, p.ci_high, p.bound_mean, report.n_samples]
                for p in report.pairs])
    writer.csv("samples.csv", ["sample", "seed", "distance", "block_norm", "bound"],
               [[i, report.sample_seeds[i], p.distance, p.norms[i], p.bounds[i]]
                for p in report.pairs for i in range(report.n_samples)])
    writer.record("kernel-decay", {
        "box_side": report.box_side, "exponent": report.exponent,
        "distances": [p.distance for p in report.pairs],
        "means": [p.mean for p in report.pairs],
    })
    writer.text("plot_decay.py", _PLOT_DECAY)
    return report.sample_seeds


def _run_edi(spec, model, writer, workers, budget):
    box = make_cube((0,) * model.dim, spec.require("box_side"))
    interval = _interval(spec)
    side = spec.require("edi_side")
    cubes = [make_cube((c,) + (0,) * (model.dim - 1), side)
             for c in spec.require("edi_centers")]
    seeds = sample_seeds(spec.seed, spec.require("samples"))
    rows = []
    c_edi = 0.0
    skipped = impossible = 0
    for i, s in enumerate(seeds):
        cfg = sample_configuration(model, s)
        spectral = assemble(box, model, cfg).spectral()
        report = edi_check(spectral, interval, cubes, model, cfg)
        for e in report.entries:
            rows.append([i, s, e.eigen_index, e.energy, e.cube.center[0], e.cube.side,
                         e.interior_mass, e.boundary_mass, e.block_norm, e.ratio,
                         bool(e.skipped_resonant)])
        c_edi = max(c_edi, report.c_edi)
        skipped += report.skipped
        impossible += report.impossible
    writer.csv("ratios.csv",
               ["sample", "seed", "eigen_index", "energy", "cube_center", "cube_side",
                "interior_mass", "boundary_mass", "block_norm", "ratio", "skipped"],
               rows)
    writer.record("edi", {"c_edi": c_edi, "entries": len(rows),
                          "skipped": skipped, "impossible": impossible})
    return seeds


def _run_two_bad(spec, model, writer, workers, budget):
    scales = spec.get("scales")
    if scales is None:
        alpha = float(spec.get("alpha", "1.3"))
        scales = scale_ladder(spec.require("side"), alpha, spec.get("rungs", 3))
    report = two_bad_probability(model, _interval(spec), spec.require("gamma"),
                                 list(scales), spec.get("start_rung", 0),
                                 spec.require("samples"), spec.seed,
                                 grid_points=spec.get("grid_points", 8),
                                 budget_sites=budget, workers=workers)
    writer.csv("rungs.csv",
               ["rung", "side", "n_centers", "events", "freq", "ci_low", "ci_high"],
               [[r.rung, r.side, r.n_centers, r.events, r.freq, r.ci_low, r.ci_high]
                for r in report.rungs])
    writer.record("two-bad", {
        "slope": report.slope, "truncated_at": report.truncated_at,
        "n_samples": report.n_samples,
        "freqs": [r.freq for r in report.rungs],
    })
    return sample_seeds(spec.seed, spec.require("samples"))


_HANDLERS = {
    "classify": _run_classify,
    "estimate-g": _run_estimate_g,
    "estimate-w": _run_estimate_w,
    "induction": _run_induction,
    "moments": _run_moments,
    "kernel-decay": _run_kernel_decay,
    "edi": _run_edi,
    "two-bad": _run_two_bad,
}


def run(spec_path, out_dir, *, seed=None, workers=None, budget_sites=None) -> int:
    """Execute one experiment spec; returns the process exit status."""
    spec_bytes = Path(spec_path).read_bytes()
    spec = parse_spec(spec_bytes.decode())
    if seed is not None:
        spec.seed = seed
    if workers is None:
        workers = int(spec.get("workers", os.environ.get("MSALAB_WORKERS", 1)))
    if budget_sites is None:
        budget_sites = spec.get("budget_sites", 200_000)
    model = build_model(spec)
    validate_gates(spec, model)
    writer = RunWriter(Path(out_dir))
    start = time.perf_counter()
    seeds = _HANDLERS[spec.command](spec, model, writer, workers, budget_sites)
    writer.wall["run"] = time.perf_counter() - start
    writer.finish(spec, spec_bytes, seeds)
    return 0


def report(run_dir) -> str:
    """Human-readable summary of a completed run directory."""
    manifest_path = Path(run_dir) / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json in {run_dir}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"corrupt manifest in {run_dir}: {exc}") from exc
    lines = [f"command: {manifest['command']}   seed: {manifest['seed']}   "
             f"tool: msalab {manifest['tool_version']}"]
    records_path = Path(run_dir) / "records.jsonl"
    if records_path.exists():
        for raw in records_path.read_text().splitlines():
            rec = json.loads(raw)
            kind = rec.pop("record")
            if kind == "estimate":
                lines.append(
                    f"  {rec['hypothesis']}: side={rec['side']} n={rec['n_samples']} "
                    f"successes={rec['successes']} p_hat={rec['p_hat']:.6g} "
                    f"ci=[{rec['ci_low']:.6g}, {rec['ci_high']:.6g}] "
                    f"threshold={rec['threshold']:.6g} verdict={rec['holds']}"
                )
            elif kind == "rung":
                verdict = rec.get("verdict", "n/a")
                lines.append(
                    f"  rung {rec['rung']}: L={rec['side']} gamma={rec['gamma']:.6g} "
                    f"floor={rec['gamma_floor']:.6g} gamma_ok={rec['gamma_ok']} "
                    f"verdict={verdict} {rec.get('note', '')}".rstrip()
                )
            else:
                payload = ", ".join(f"{k}={v}" for k, v in sorted(rec.items()))
                lines.append(f"  {kind}: {payload}")
    lines.append(f"outputs: {', '.join(manifest['outputs'])}")
    return "\n".join(lines)


def _error_record(exc) -> dict:
    record = {"error": type(exc).__name__, "detail": str(exc)}
    if isinstance(exc, SpecError):
        record["field"] = exc.field
        record["line"] = exc.line
    if isinstance(exc, GateError):
        record["constraint"] = exc.constraint
    return record


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="msalab",
                                     description="multi-scale localization experiments")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run a {name} experiment")
        p.add_argument("--spec", required=True, help="experiment description file")
        p.add_argument("--out", required=True, help="output directory (owned by this run)")
        p.add_argument("--seed", type=int, default=None, help="override the spec seed")
        p.add_argument("--workers", type=int, default=None,
                       help="concurrent eigensolves (or MSALAB_WORKERS)")
        p.add_argument("--budget-sites", type=int, default=None,
                       help="largest admissible box site count")
    rp = sub.add_parser("report", help="summarize a completed run directory")
    rp.add_argument("run_dir")
    args = parser.parse_args(argv)

    try:
        if args.subcommand == "report":
            print(report(args.run_dir))
            return 0
        spec = parse_spec(Path(args.spec).read_text())
        if spec.command != args.subcommand:
            raise SpecError(
                f"spec declares command {spec.command!r} but {args.subcommand!r} was invoked",
                field="command")
        return run(args.spec, args.out, seed=args.seed, workers=args.workers,
                   budget_sites=args.budget_sites)
    except (SpecError, GateError, ModelParseError, ValueError, FileNotFoundError) as exc:
        print(json.dumps(_error_record(exc)), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
