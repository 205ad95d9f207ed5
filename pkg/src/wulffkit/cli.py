"""Command-line front end: ``wulffkit run | norm-check | detect-wulff``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import identities, measures, steiner
from .bodies import ConvexBody, SmoothBody, body_from_json
from .errors import ConfigParse, WulffkitError
from .norms import NormSpec, ellipticity_estimate, norm_from_json, random_unit_vectors
from .regions import WHOLE, Region, quadrant_partition
from .reports import Row, TaskResult, emit_report, emit_summary
from .tolerances import DEFAULTS, Tolerances
from .wulff import wulff_mesh, wulff_volume

OUTPUT_ENV = "WULFFKIT_OUTPUT_DIR"
DEFAULT_OUTPUT = "wulffkit-out"
TOP_KEYS = {"norm", "bodies", "tasks", "seed", "output_dir", "resolutions", "tolerances", "workers"}
RESOLUTION_KEYS = {"quadrature": 64, "mesh": 64}

# allowed parameters per task (besides "task" and "bodies")
TASK_PARAMS = {
    "norm-check": {"sample_count"},
    "wulff-info": {"resolution"},
    "tube-fit": {"region", "rho_grid", "samples"},
    "measures": {"partition", "route", "resolution", "samples", "rho_grid"},
    "identities": {"checks", "r", "resolution", "sample_count"},
    "detect-wulff": {"r", "samples", "resolution"},
}
BODY_TASKS = {"tube-fit", "measures", "identities", "detect-wulff"}
SMOOTH_ONLY_CHECKS = {"minkowski", "heintze_karcher", "complement"}
ALL_CHECKS = ("minkowski", "heintze_karcher", "lambda_bound", "complement")


@dataclass
class RunConfig:
    norm: dict
    bodies: list = field(default_factory=list)
    tasks: list = field(default_factory=list)
    seed: int = 0
    output_dir: str | None = None
    resolutions: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    workers: int = 1

    @classmethod
    def from_json(cls, obj) -> "RunConfig":
        if isinstance(obj, str):
            try:
                obj = json.loads(obj)
            except json.JSONDecodeError as e:
                raise ConfigParse(f"invalid JSON: {e}") from None
        if not isinstance(obj, dict):
            raise ConfigParse("config must be a JSON object")
        extra = set(obj) - TOP_KEYS
        if extra:
            raise ConfigParse(f"unknown config keys: {sorted(extra)}")
        if "norm" not in obj:
            raise ConfigParse("config needs a 'norm'")
        cfg = cls(
            norm=obj["norm"],
            bodies=list(obj.get("bodies", [])),
            tasks=list(obj.get("tasks", [])),
            seed=obj.get("seed", 0),
            output_dir=obj.get("output_dir"),
            resolutions=dict(obj.get("resolutions", {})),
            tolerances=dict(obj.get("tolerances", {})),
            workers=obj.get("workers", 1),
        )
        cfg.validate()
        return cfg

    def to_json(self) -> dict:
        out = {
            "norm": self.norm,
            "bodies": self.bodies,
            "tasks": self.tasks,
            "seed": self.seed,
            "resolutions": self.resolutions,
            "tolerances": self.tolerances,
            "workers": self.workers,
        }
        if self.output_dir is not None:
            out["output_dir"] = self.output_dir
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    # -- validation ---------------------------------------------------------
    def tol(self) -> Tolerances:
        names = {f.name for f in dataclasses.fields(Tolerances)}
        extra = set(self.tolerances) - names
        if extra:
            raise ConfigParse(f"unknown tolerance keys: {sorted(extra)}")
        return dataclasses.replace(DEFAULTS, **self.tolerances)

    def resolution(self, key: str) -> int:
        return int(self.resolutions.get(key, RESOLUTION_KEYS[key]))

    def build(self) -> tuple[NormSpec, list[ConvexBody]]:
        try:
            spec = norm_from_json(self.norm)
        except (WulffkitError, ValueError, KeyError, TypeError) as e:
            raise ConfigParse(f"norm: {e}") from None
        bodies = []
        for i, b in enumerate(self.bodies):
            try:
                body = body_from_json(b, spec)
            except (WulffkitError, ValueError, KeyError, TypeError) as e:
                raise ConfigParse(f"bodies[{i}]: {e}") from None
            if body.dim != spec.dim:
                raise ConfigParse(f"bodies[{i}]: dimension {body.dim} does not match the norm ({spec.dim})")
            bodies.append(body)
        return spec, bodies

    def validate(self) -> None:
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            raise ConfigParse("seed must be an unsigned 64-bit integer")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigParse("workers must be a positive integer")
        extra = set(self.resolutions) - set(RESOLUTION_KEYS)
        if extra:
            raise ConfigParse(f"unknown resolution keys: {sorted(extra)}")
        for k in self.resolutions:
            if not isinstance(self.resolutions[k], int) or self.resolutions[k] < 8:
                raise ConfigParse(f"resolution {k} must be an integer >= 8")
        self.tol()
        spec, bodies = self.build()
        for i, t in enumerate(self.tasks):
            name = t.get("task") if isinstance(t, dict) else None
            where = f"tasks[{i}] ({name})"
            if name not in TASK_PARAMS:
                raise ConfigParse(f"tasks[{i}]: unknown task {name!r}")
            extra = set(t) - TASK_PARAMS[name] - {"task", "bodies"}
            if extra:
                raise ConfigParse(f"{where}: unknown parameters {sorted(extra)}")
            idx = _task_bodies(t, bodies)
            if name in BODY_TASKS and not idx:
                raise ConfigParse(f"{where}: no bodies to run on")
            if any(not isinstance(k, int) or not 0 <= k < len(bodies) for k in idx):
                raise ConfigParse(f"{where}: body index out of range")
            for k in idx:
                b = bodies[k]
                if name == "identities":
                    checks = t.get("checks", list(ALL_CHECKS))
                    bad = set(checks) - set(ALL_CHECKS)
                    if bad:
                        raise ConfigParse(f"{where}: unknown checks {sorted(bad)}")
                    if not isinstance(b, SmoothBody) and set(checks) & SMOOTH_ONLY_CHECKS:
                        raise ConfigParse(f"{where}: body {k} is a polytope; {sorted(set(checks) & SMOOTH_ONLY_CHECKS)} need a smooth body")
                if name == "measures":
                    route = t.get("route", "auto")
                    if route not in ("auto", "direct", "steiner", "both"):
                        raise ConfigParse(f"{where}: unknown route {route!r}")
                    if route in ("direct", "both") and not isinstance(b, SmoothBody):
                        raise ConfigParse(f"{where}: direct route needs a smooth body (body {k})")
                    if t.get("partition", "whole") not in ("whole", "quadrants"):
                        raise ConfigParse(f"{where}: partition must be 'whole' or 'quadrants'")
                if name in ("identities", "detect-wulff"):
                    r = t.get("r")
                    if r is not None and not 1 <= r <= b.dim - 1:
                        raise ConfigParse(f"{where}: r must be in 1..{b.dim - 1}")
            if name == "tube-fit" and "rho_grid" in t and len(set(t["rho_grid"])) < spec.dim:
                raise ConfigParse(f"{where}: rho_grid needs at least {spec.dim} distinct radii")


def _task_bodies(t: dict, bodies) -> list:
    if t.get("task") not in BODY_TASKS:
        return []
    return list(t.get("bodies", range(len(bodies))))


def _task_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# tasks

def _norm_check(cfg, spec, bodies, t, seed, tol):
    n = t.get("sample_count", 2000)
    gamma = ellipticity_estimate(spec, n, seed=seed % 2**32)
    rng = np.random.default_rng(seed)
    u = random_unit_vectors(min(n, 500), spec.dim, rng)
    g = spec.gradient(u)
    inv = float(np.max(np.abs(spec.dual_value(g) - 1.0)))
    inv = max(inv, float(np.max(np.abs(spec.dual_gradient(g) - u / spec.value(u)[:, None]))))
    euler = float(np.max(np.abs(np.einsum("ij,ij->i", g, u) - spec.value(u))))
    lab = spec.label()
    rows = [
        Row("norm-check", "", lab, "ellipticity", gamma, None, "pass" if gamma >= tol.min_ellipticity else "fail"),
        Row("norm-check", "", lab, "dual_involution", inv, None, "pass" if inv <= 1e-8 else "fail"),
        Row("norm-check", "", lab, "euler", euler, None, "pass" if euler <= 1e-9 else "fail"),
    ]
    return rows, {"norm": spec.to_json(), "ellipticity": gamma, "dual_involution": inv, "euler": euler}


def _wulff_info(cfg, spec, bodies, t, seed, tol):
    res = t.get("resolution", cfg.resolution("mesh"))
    vol = wulff_volume(spec, max(res, 64))
    mesh = wulff_mesh(spec, res)
    on = float(np.max(np.abs(spec.dual_value(mesh.vertices) - 1.0)))
    lab = spec.label()
    rows = [
        Row("wulff-info", "", lab, "volume", vol),
        Row("wulff-info", "", lab, "perimeter", spec.dim * vol),
        Row("wulff-info", "", lab, "mesh_area", mesh.total_weight),
        Row("wulff-info", "", lab, "on_wulff_residual", on, None, "pass" if on <= tol.on_wulff else "fail"),
    ]
    return rows, {"volume": vol, "perimeter": spec.dim * vol, "mesh_area": mesh.total_weight,
                  "mesh_nodes": len(mesh.vertices), "on_wulff_residual": on}


def _region(obj) -> Region:
    if obj in (None, "whole"):
        return WHOLE
    return Region.from_json(obj)


def _tube_fit(cfg, spec, bodies, t, seed, tol):
    rows, payload = [], []
    for k in _task_bodies(t, bodies):
        b = bodies[k]
        fit = steiner.steiner_fit(b, spec, _region(t.get("region")), t.get("rho_grid"), t.get("samples", 10**6),
                                  seed, cfg.workers, tol)
        verdict = "failed" if fit.failed else "pass"
        for m, (c, s) in enumerate(zip(fit.coefficients, fit.stderr)):
            rows.append(Row("tube-fit", b.label(), spec.label(), f"c_{m}", float(c), float(s), verdict))
        rows.append(Row("tube-fit", b.label(), spec.label(), "residual", fit.residual, None, verdict))
        payload.append({"body": k, "fit": fit})
    return rows, {"fits": payload}


def _measures(cfg, spec, bodies, t, seed, tol):
    rows, payload = [], []
    res = t.get("resolution", cfg.resolution("quadrature"))
    for k in _task_bodies(t, bodies):
        b = bodies[k]
        if t.get("partition", "whole") == "quadrants":
            lo, hi = b.extents()
            regions = quadrant_partition(0.5 * (lo + hi))
        else:
            regions = [WHOLE]
        route = t.get("route", "auto")
        if route == "auto":
            route = "direct" if isinstance(b, SmoothBody) else "steiner"
        ests = []
        if route in ("direct", "both"):
            for reg in regions:
                for m in range(b.dim):
                    ests.append(measures.curvature_measure_direct(b, spec, m, reg, res))
        if route in ("steiner", "both"):
            fits = steiner.steiner_fit_regions(b, spec, regions, t.get("rho_grid"), t.get("samples", 10**6), seed,
                                               cfg.workers, tol)
            for reg, fit in zip(regions, fits):
                for m in range(b.dim):
                    ests.append(measures.MeasureEstimate(m, reg, float(fit.coefficients[m]), float(fit.stderr[m]),
                                                         "steiner_mc"))
        for e in ests:
            ok = e.value >= -tol.sigma_factor * e.stderr
            rows.append(Row("measures", b.label(), spec.label(), f"C_{e.order}[{e.region.name}]/{e.method}",
                            e.value, e.stderr, "pass" if ok else "fail"))
        payload.append({"body": k, "estimates": ests})
    return rows, {"measures": payload}


def _identities(cfg, spec, bodies, t, seed, tol):
    rows, payload = [], []
    res = t.get("resolution", cfg.resolution("quadrature"))
    for k in _task_bodies(t, bodies):
        b = bodies[k]
        n = b.dim - 1
        rs = [t["r"]] if "r" in t else list(range(1, n + 1))
        reports = []
        for check in t.get("checks", list(ALL_CHECKS)):
            if check == "minkowski":
                reports += [identities.minkowski_check(b, spec, r, res, tol) for r in rs]
            elif check == "heintze_karcher":
                reports.append(identities.heintze_karcher_check(b, spec, res, tol))
            elif check == "lambda_bound":
                reports += [identities.lambda_bound_check(b, spec, r, res, seed, tol=tol) for r in rs]
            elif check == "complement":
                reports.append(identities.complement_curvature_check(b, spec, t.get("sample_count", 20), seed, tol))
        for rep in reports:
            key = rep.name + (f"[r={rep.parameters['r']}]" if "r" in rep.parameters else "")
            rows.append(Row("identities", b.label(), spec.label(), key, rep.slack, rep.combined_error, rep.verdict))
        payload.append({"body": k, "reports": reports})
    return rows, {"identities": payload}


def _detect(cfg, spec, bodies, t, seed, tol):
    rows, payload = [], []
    for k in _task_bodies(t, bodies):
        b = bodies[k]
        v = identities.wulff_detector(b, spec, t.get("r", 1), None, tol, seed, t.get("resolution", cfg.resolution("quadrature")),
                                      t.get("samples", 10**6))
        lab, nl = b.label(), spec.label()
        rows += [
            Row("detect-wulff", lab, nl, "is_wulff", int(v.is_wulff), None, "wulff" if v.is_wulff else "not_wulff"),
            Row("detect-wulff", lab, nl, "ratio_deviation", v.ratio_deviation),
            Row("detect-wulff", lab, nl, "fit_residual", v.fit_residual),
            Row("detect-wulff", lab, nl, "fitted_scale", v.fitted_scale),
        ]
        rows += [Row("detect-wulff", lab, nl, f"fitted_center_{i}", float(c)) for i, c in enumerate(v.fitted_center)]
        if v.hk_slack is not None:
            rows.append(Row("detect-wulff", lab, nl, "hk_slack", v.hk_slack))
        payload.append({"body": k, "verdict": v})
    return rows, {"detections": payload}


TASKS = {
    "norm-check": _norm_check,
    "wulff-info": _wulff_info,
    "tube-fit": _tube_fit,
    "measures": _measures,
    "identities": _identities,
    "detect-wulff": _detect,
}


def execute(cfg: RunConfig, out_dir) -> list[TaskResult]:
    spec, bodies = cfg.build()
    tol = cfg.tol()
    results = []
    for i, t in enumerate(cfg.tasks):
        name = t["task"]
        res = TaskResult(name, i)
        try:
            rows, payload = TASKS[name](cfg, spec, bodies, t, _task_seed(cfg.seed, i), tol)
            res.rows, res.payload = rows, payload
        except WulffkitError as e:
            res.error = f"task {i} ({name}): {type(e).__name__}: {e}"
        emit_report(res, out_dir)
        results.append(res)
    emit_summary(results, out_dir)
    return results


def run_config(path, seed: int | None = None, workers: int | None = None, output_dir: str | None = None) -> int:
    """Run a config file; returns the process exit status."""
    try:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigParse(f"cannot read {path}: {e}") from None
        raw = json.loads(text) if text.strip().startswith("{") else None
        if raw is None:
            raise ConfigParse(f"{path} is not a JSON object")
        raw = _merge_flags(raw, {"seed": seed, "workers": workers, "output_dir": output_dir})
        cfg = RunConfig.from_json(raw)
    except json.JSONDecodeError as e:
        print(f"error: ConfigParse: invalid JSON in {path}: {e}", file=sys.stderr)
        return 2
    except ConfigParse as e:
        print(f"error: ConfigParse: {e}", file=sys.stderr)
        return 2
    return _run(cfg)


def _merge_flags(raw: dict, flags: dict) -> dict:
    """Flags fill in missing config keys; a flag that disagrees with the config is an error."""
    raw = dict(raw)
    for k, v in flags.items():
        if v is None:
            continue
        if k in raw and raw[k] != v:
            raise ConfigParse(f"--{k.replace('_', '-')}={v} conflicts with config value {raw[k]!r}")
        raw[k] = v
    return raw


def _run(cfg: RunConfig) -> int:
    out = cfg.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    results = execute(cfg, out)
    status = 0
    for r in results:
        if r.error:
            print(f"error: TaskFailure: {r.error}", file=sys.stderr)
        for row in r.rows:
            if row.verdict:
                print(f"{r.stem}\t{row.body}\t{row.key}\t{row.value}\t{row.verdict}")
        if r.failed:
            status = 1
    return status


def _json_arg(text: str):
    p = Path(text)
    if not text.lstrip().startswith(("{", "[")) and p.exists():
        text = p.read_text()
    return json.loads(text)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="wulffkit", description="Anisotropic curvature measures and Wulff shapes.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--output-dir", default=None)

    p_run = sub.add_parser("run", help="run a JSON config")
    p_run.add_argument("config")
    common(p_run)

    p_nc = sub.add_parser("norm-check", help="ellipticity, duality and Euler checks for a norm")
    p_nc.add_argument("--norm", required=True, help="norm JSON or a file holding it")
    p_nc.add_argument("--sample-count", type=int, default=2000)
    common(p_nc)

    p_dw = sub.add_parser("detect-wulff", help="decide whether a body is a Wulff shape of a norm")
    p_dw.add_argument("--norm", required=True, help="norm JSON or a file holding it")
    p_dw.add_argument("--body", required=True, help="body JSON or a file holding it")
    p_dw.add_argument("--r", type=int, default=1)
    p_dw.add_argument("--samples", type=int, default=10**6)
    common(p_dw)

    args = ap.parse_args(argv)
    if args.command == "run":
        return run_config(args.config, args.seed, args.workers, args.output_dir)
    try:
        norm = _json_arg(args.norm)
        if args.command == "norm-check":
            task = {"task": "norm-check", "sample_count": args.sample_count}
            raw = {"norm": norm, "tasks": [task]}
        else:
            raw = {"norm": norm, "bodies": [_json_arg(args.body)],
                   "tasks": [{"task": "detect-wulff", "r": args.r, "samples": args.samples}]}
        raw = _merge_flags(raw, {"seed": args.seed, "workers": args.workers, "output_dir": args.output_dir})
        cfg = RunConfig.from_json(raw)
    except (json.JSONDecodeError, OSError) as e:
        print(f"error: ConfigParse: {e}", file=sys.stderr)
        return 2
    except ConfigParse as e:
        print(f"error: ConfigParse: {e}", file=sys.stderr)
        return 2
    return _run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
