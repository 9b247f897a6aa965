"""Reproducible studies: graph resonances, waveguide approximants, closeness defects."""
from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .closeness import build_maps, delta_report, resolvent_diff_norm
from .fields import EdgeFields, fields_for, gauge_away
from .graph import GraphDecomposition, MetricGraph, normalize_and_decompose
from .graphfem import graph_eigs
from .io import load_graph, write_csv, write_json
from .rootfind import Rectangle
from .secular import Dilation, ResonanceOptions, find_resonances
from .waveguide import assemble, build_model, filter_resonances, generate_mesh, solve_eigs, theta_companion

ZERO_DEFECT = 1e-10


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    graph: Optional[str] = None
    thetas: list = field(default_factory=lambda: [0.8j])
    eps: list = field(default_factory=list)
    h: list = field(default_factory=lambda: [0.05])
    kregion: Optional[tuple] = None
    shifts: list = field(default_factory=list)
    z: list = field(default_factory=lambda: [-1.0])
    out_dir: str = "."
    seed: int = 0
    tol_k: float = 1e-10
    threads: int = 1
    L_ext: Optional[float] = None
    L_ext_cap: float = 8.0
    count: int = 6
    gauge: str = "keep"
    margin: float = 0.05
    tail_threshold: float = 0.5
    drift_filter: bool = True
    slope_min: float = 0.4
    dense_below: int = 400
    sector_bound: float = math.pi

    def validate(self):
        if not self.thetas:
            raise ConfigError("at least one theta is required")
        for th in self.thetas:
            if abs(complex(th).imag) >= self.sector_bound / 2:
                raise ConfigError(f"theta {th} outside |Im theta| < {self.sector_bound / 2:.4g}")
        for e in self.eps:
            if not (0 < e <= 1):
                raise ConfigError(f"eps {e} outside (0, 1]")
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ConfigError("eps list must be strictly decreasing")
        if any(h <= 0 for h in self.h) or not self.h:
            raise ConfigError("mesh sizes must be positive")
        if self.gauge not in ("keep", "away"):
            raise ConfigError("gauge must be 'keep' or 'away'")
        for r in self.regions():
            if len(r) != 4 or not (r[0] < r[1] and r[2] < r[3]):
                raise ConfigError(f"kregion {r} needs re0 < re1, im0 < im1")
        return self

    def regions(self) -> list:
        """k-rectangles: ``kregion`` is one 4-tuple or a list of them."""
        if self.kregion is None:
            return []
        if len(self.kregion) and np.isscalar(self.kregion[0]):
            return [tuple(self.kregion)]
        return [tuple(r) for r in self.kregion]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kregion"] = [list(map(float, r)) for r in self.regions()]
        for key in ("thetas", "shifts", "z"):
            d[key] = [[complex(x).real, complex(x).imag] for x in d[key]]
        return d


@dataclass
class TargetSeries:
    label: str
    lam0: complex
    kind: str
    gate: float = math.inf
    revealed: bool = True
    eps: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    L_ext: list = field(default_factory=list)
    ambiguous: list = field(default_factory=list)
    slope: Optional[float] = None
    passed: Optional[bool] = None


@dataclass
class StudySummary:
    targets: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    passed: bool = True
    files: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def loglog_slope(eps, values) -> Optional[float]:
    """Least-squares slope of log(value) against log(eps); None below three points."""
    eps = np.asarray(eps, float)
    v = np.asarray(values, float)
    if len(eps) < 3 or np.any(~np.isfinite(v)) or np.any(v <= 0):
        return None
    return float(np.polyfit(np.log(eps), np.log(v), 1)[0])


def _load(config: ExperimentConfig, graph: Optional[MetricGraph], fields: Optional[EdgeFields]):
    if graph is None:
        if config.graph is None:
            raise ConfigError("no graph given")
        graph, fields = load_graph(config.graph)
    decomp = normalize_and_decompose(graph)
    fields = fields_for(decomp.graph, fields)
    return decomp, fields


def graph_resonances(decomp: GraphDecomposition, fields: EdgeFields, config: ExperimentConfig,
                     theta: complex):
    gauge = gauge_away(decomp.graph, fields) if config.gauge == "away" else None
    opts = ResonanceOptions(tol_k=config.tol_k, workers=config.threads)
    dil = Dilation(complex(theta), config.sector_bound)
    out = []
    for r in config.regions():
        rect = Rectangle(*map(float, r))
        for res in find_resonances(decomp, fields if gauge is None else gauge.fields, rect, dil,
                                   opts, gauge):
            if all(abs(res.k - o.k) > 10 * config.tol_k * max(1.0, abs(res.k)) for o in out):
                out.append(res)
    out.sort(key=lambda r: (r.k.real, r.k.imag))
    return out


class _Ops:
    """Cache of assembled operators keyed by (eps, h, L_ext, theta)."""

    def __init__(self, decomp, fields):
        self.decomp, self.fields, self.cache = decomp, fields, {}

    def get(self, eps, h, L, theta):
        key = (eps, h, L, complex(theta))
        if key not in self.cache:
            mesh = generate_mesh(build_model(self.decomp, self.fields, eps, L_ext=L), h)
            self.cache[key] = assemble(mesh, Dilation(complex(theta)))
        return self.cache[key]


def waveguide_candidates(op, shift, config: ExperimentConfig):
    pairs = solve_eigs(op, shift, count=config.count, seed=config.seed, dense_below=config.dense_below)
    comp = None
    if config.drift_filter and config.margin > 0:
        comp = theta_companion(op, shift, count=config.count + 4, seed=config.seed,
                               dense_below=config.dense_below)
    return filter_resonances(pairs, op.dilation, op.eps, margin=config.margin,
                             tail_threshold=config.tail_threshold, companion=comp)


def match(lam0: complex, candidates, gate: float, ratio: float = 1.25):
    """Nearest kept candidate within ``gate``; (candidate or None, ambiguous flag)."""
    kept = sorted((c for c in candidates if c.kept), key=lambda c: abs(c.lam - lam0))
    kept = [c for c in kept if abs(c.lam - lam0) <= gate]
    if not kept:
        return None, False
    if len(kept) > 1 and abs(kept[1].lam - lam0) < ratio * abs(kept[0].lam - lam0):
        return None, True
    return kept[0], False


def _initial_L(theta: complex, lam0: complex, config: ExperimentConfig) -> float:
    k = cmath.sqrt(lam0)
    if k.real < 0:
        k = -k
    decay = (cmath.exp(complex(theta)) * k).imag
    if decay <= 0:
        return config.L_ext_cap
    return min(config.L_ext_cap, 6.0 / decay)


def _approximant(ops: _Ops, eps, h, theta, lam0, gate, config: ExperimentConfig):
    """Matched candidate for one target, doubling L_ext until it settles."""
    if config.L_ext is not None:
        op = ops.get(eps, h, config.L_ext, theta)
        c, amb = match(lam0, waveguide_candidates(op, lam0, config), gate)
        return c, amb, config.L_ext
    L = _initial_L(theta, lam0, config)
    c, amb = match(lam0, waveguide_candidates(ops.get(eps, h, L, theta), lam0, config), gate)
    while L < config.L_ext_cap:
        L2 = min(2 * L, config.L_ext_cap)
        c2, amb2 = match(lam0, waveguide_candidates(ops.get(eps, h, L2, theta), lam0, config), gate)
        if c is not None and c2 is not None:
            if abs(c2.lam - c.lam) < 0.1 * abs(c.lam - lam0):
                return c, amb, L
        c, amb, L = c2, amb2, L2
    return c, amb, L


def run_resonance_study(config: ExperimentConfig, graph: Optional[MetricGraph] = None,
                        fields: Optional[EdgeFields] = None, write: bool = True) -> StudySummary:
    """Graph resonances per theta (res.csv), waveguide approximants (wg.csv), summary.json."""
    config.validate()
    decomp, fields = _load(config, graph, fields)
    out = Path(config.out_dir)
    summary = StudySummary()
    cfg = config.to_dict()
    theta = complex(config.thetas[0])
    for i, th in enumerate(config.thetas):
        res = graph_resonances(decomp, fields, config, th)
        rows = [(r.k.real, r.k.imag, r.lam.real, r.lam.imag, r.residual, r.multiplicity, r.kind)
                for r in res]
        if write:
            name = "res.csv" if len(config.thetas) == 1 else f"res_theta{i}.csv"
            summary.files.append(str(write_csv(
                out / name, ["re_k", "im_k", "re_lambda", "im_lambda", "residual", "multiplicity", "kind"],
                rows, cfg, config.seed)))
        if i == 0:
            targets = res
    lams = [complex(r.lam) for r in targets]
    for j, r in enumerate(targets):
        others = [abs(l - r.lam) for m, l in enumerate(lams) if m != j]
        gate = 0.5 * min(others) if others else math.inf
        summary.targets.append(TargetSeries(f"target{j}", complex(r.lam), r.kind, gate, r.revealed))
    if not config.eps:
        return _finish(summary, config, out, write)

    ops = _Ops(decomp, fields)
    wg_rows = []
    h_fine = min(config.h)
    for eps in config.eps:
        for h in config.h:
            seen = set()
            L_shift = config.L_ext if config.L_ext is not None else 4.0
            for s in config.shifts:
                op = ops.get(eps, h, L_shift, theta)
                for c in waveguide_candidates(op, complex(s), config):
                    key = (round(c.lam.real, 10), round(c.lam.imag, 10))
                    if key in seen:
                        continue
                    seen.add(key)
                    wg_rows.append((eps, h, c.lam.real, c.lam.imag, c.residual, c.tail_mass, c.kept))
            if h != h_fine:
                continue
            for t in summary.targets:
                c, amb, L = _approximant(ops, eps, h, theta, t.lam0, t.gate, config)
                t.eps.append(eps)
                t.L_ext.append(L)
                t.ambiguous.append(amb)
                t.lam.append(None if c is None else complex(c.lam))
                t.errors.append(None if c is None else abs(c.lam - t.lam0))
                if c is not None:
                    wg_rows.append((eps, h, c.lam.real, c.lam.imag, c.residual, c.tail_mass, c.kept))
    for t in summary.targets:
        errs = [e for e in t.errors if e is not None]
        if len(errs) == len(t.errors) and len(errs) >= 3:
            t.slope = loglog_slope(t.eps, errs)
            mono = all(b < a for a, b in zip(errs, errs[1:]))
            t.passed = bool(mono and t.slope is not None and t.slope >= config.slope_min)
        elif len(config.eps) >= 3:
            t.passed = False
    if write:
        summary.files.append(str(write_csv(
            out / "wg.csv", ["eps", "h", "re_lambda", "im_lambda", "residual", "tail_mass", "kept"],
            wg_rows, cfg, config.seed)))
    summary.passed = all(t.passed is not False for t in summary.targets)
    return _finish(summary, config, out, write)


def _finish(summary: StudySummary, config: ExperimentConfig, out: Path, write: bool):
    if write:
        doc = {"config": config.to_dict(), "passed": summary.passed,
               "targets": [{"label": t.label, "lambda0": t.lam0, "kind": t.kind,
                            "revealed": t.revealed, "eps": t.eps,
                            "lambda": t.lam, "errors": t.errors, "L_ext": t.L_ext,
                            "ambiguous": t.ambiguous, "slope": t.slope, "passed": t.passed}
                           for t in summary.targets],
               "deltas": summary.deltas, "slopes": summary.slopes, "notes": summary.notes}
        summary.files.append(str(write_json(out / "summary.json", doc)))
    return summary


def _graph_spectrum(gd):
    return graph_eigs(gd, 0.0, count=gd.n)[0]


def run_closeness_study(config: ExperimentConfig, graph: Optional[MetricGraph] = None,
                        fields: Optional[EdgeFields] = None, write: bool = True,
                        out_name: str = "delta.csv") -> StudySummary:
    """Defects and resolvent differences per (eps, h, z), slopes over eps at the finest h."""
    config.validate()
    if not config.eps:
        raise ConfigError("closeness study needs at least one eps")
    decomp, fields = _load(config, graph, fields)
    out = Path(config.out_dir)
    summary = StudySummary()
    theta = complex(config.thetas[0])
    L = config.L_ext if config.L_ext is not None else 3.0
    ops = _Ops(decomp, fields)
    rows = []
    names = ["delta_adj", "delta_inv1", "delta_inv2", "delta_form"]
    h_fine = min(config.h)
    series = {n: [] for n in names + ["res_diff"]}
    inv_err = 0.0
    for eps in config.eps:
        for h in config.h:
            op = ops.get(eps, h, L, theta)
            maps = build_maps(None, op)
            inv_err = max(inv_err, float(abs(maps.Jp @ maps.J - np.eye(maps.graph.n_broken)).max()))
            rep = delta_report(maps)
            spec = None
            for zi, z in enumerate(config.z):
                rd, _ = resolvent_diff_norm(complex(z), maps, both=False)
                if spec is None:
                    spec = _graph_spectrum(maps.graph)
                dist = float(np.min(np.abs(spec - complex(z))))
                row = {"eps": eps, "h": h, **rep.components(), "res_diff": rd,
                       "re_z": complex(z).real, "im_z": complex(z).imag, "dist_z": dist,
                       "norm_J": rep.norm_J, "norm_Jp": rep.norm_Jp}
                summary.deltas.append(row)
                rows.append(row)
                if h == h_fine and zi == 0:
                    for n in names:
                        series[n].append(row[n])
                    series["res_diff"].append(rd)
    lines = [f"max |J'J - I| = {inv_err:.3e}"]
    passed = inv_err <= ZERO_DEFECT
    slope_row = None
    if len(config.eps) >= 3:
        slope_row = ["slope", h_fine]
        for n in names + ["res_diff"]:
            vals = series[n]
            if max(vals) <= ZERO_DEFECT:
                summary.slopes[n] = "zero"
                slope_row.append("zero")
                continue
            s = loglog_slope(config.eps, vals)
            summary.slopes[n] = s
            slope_row.append(s)
            passed = passed and s is not None and s >= config.slope_min
    summary.passed = passed
    if write:
        header = ["eps", "h"] + names + ["res_diff", "re_z", "im_z", "dist_z"]
        table = [[r[k] for k in header] for r in rows]
        if slope_row is not None:
            table.append(slope_row + ["", "", ""])
        summary.files.append(str(write_csv(out / out_name, header, table, config.to_dict(),
                                           config.seed, lines)))
    return _finish(summary, config, out, write)
