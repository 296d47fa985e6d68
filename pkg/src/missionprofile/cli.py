"""Command-line interface.

::

    missionprofile simulate {fleet,day} [--config C] [--out DIR] [--seed N]
    missionprofile smooth TELEMETRY.csv [--config C] [--out DIR] [--lambda X | --lambda-grid a,b,c]
    missionprofile analyze COEFFICIENTS.json [--config C] [--out DIR] [--grid N] [--gamma X]
                           [--directions N] [--seed N]
    missionprofile profile COEFFICIENTS.json REPORT.json [--config C] [--out DIR]
    missionprofile pipeline [--config C] [--out DIR] [...all overrides]

Exit codes: 0 ok, 2 configuration, 3 input, 4 numerical/degenerate data,
5 internal invariant violated. ``MP_LOG=debug|info|warn`` sets verbosity.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import USE_NUMBA
from .config import ConfigError, PipelineConfig, canonical_json, config_hash, load_config
from .errors import (
    DegenerateScaleError,
    DomainError,
    InvariantViolation,
    MissionProfileError,
    RankDeficiencyError,
)
from .fdcore import FunctionalSample, sample_from_json, sample_to_json
from .pipeline import DEFAULT_LAMBDA_GRID, Analysis, analyze, make_bases, reconstruction_rmse, smooth_sample
from .profile import (
    HistogramSpec,
    RESIDENCE_HEADER,
    classical_profile_export,
    endpoint_histogram,
    pointwise_quantile_selection,
    residence_csv,
    residence_histogram,
    selection_comparison,
)
from .depth import EvaluationGrid
from .simgen import (
    config_to_dict,
    day_config_from_dict,
    fleet_config_from_dict,
    gen_mileage_fleet,
    gen_temperature_day,
    load_default_config,
)
from .smoothing import SmoothingConfig
from .telemetry import (
    InputError,
    LABELS_HEADER,
    TELEMETRY_HEADER,
    read_telemetry_csv,
    write_labels_csv,
    write_telemetry_csv,
)

logger = logging.getLogger("missionprofile")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_NUMERIC, EXIT_INVARIANT = 0, 2, 3, 4, 5

REPORT_FORMAT = "missionprofile.outlyingness-report"
BAND_HEADER = ["coordinate", "t", "median", "central50_lower", "central50_upper",
               "fence_lower", "fence_upper", "central95_lower", "central95_upper"]
ENDPOINT_HEADER = ["bin_lower", "bin_upper", "count"]
COMPARISON_HEADER = ["bin_lower", "bin_upper", "count_pointwise", "count_functional", "difference"]


class UsageError(ConfigError):
    pass


# -- small I/O helpers ---------------------------------------------------------

def _f(x) -> str:
    return repr(float(x))


def _write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return path


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _verify_csv(path: Path, header, n_rows=None):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != list(header):
        raise InvariantViolation(f"{path.name}: header mismatch on read-back")
    if any(len(r) != len(header) for r in rows[1:]):
        raise InvariantViolation(f"{path.name}: ragged rows on read-back")
    if n_rows is not None and len(rows) - 1 != n_rows:
        raise InvariantViolation(f"{path.name}: expected {n_rows} rows, read back {len(rows) - 1}")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _out_dir(path) -> Path:
    out = Path(path or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- stages --------------------------------------------------------------------

def run_simulate(kind: str, cfg: PipelineConfig, out: Path) -> list[Path]:
    sim_cfg = cfg.get("simulate") or {}
    if sim_cfg and sim_cfg.get("kind") != kind:
        raise ConfigError(f"config simulates {sim_cfg.get('kind')!r}, command asked for {kind!r}")
    params = load_default_config(kind)
    params.update(sim_cfg.get("params", {}))
    params["seed"] = cfg.seed
    try:
        if kind == "fleet":
            sim = gen_mileage_fleet(fleet_config_from_dict(params))
        else:
            sim = gen_temperature_day(day_config_from_dict(params))
    except (DomainError, TypeError) as exc:
        raise ConfigError(f"simulate.params: {exc}") from None
    tele = out / "telemetry.csv"
    labels = out / "labels.csv"
    write_telemetry_csv(tele, sim.device_ids, sim.coordinates, sim.series)
    write_labels_csv(labels, sim.device_ids, sim.groups)
    rows = sum(s.q for dev in sim.series for s in dev)
    _verify_csv(tele, TELEMETRY_HEADER, rows)
    _verify_csv(labels, LABELS_HEADER, sim.n)
    logger.info("simulated %d devices (%s), %d telemetry rows", sim.n, kind, rows)
    return [tele, labels]


def _default_n_basis(order, q):
    return min(100, max(order + 2, q // 4))


def run_smooth(telemetry_path, cfg: PipelineConfig, out: Path) -> list[Path]:
    tele = read_telemetry_csv(telemetry_path)
    coords = list(tele.coordinates)
    series = tele.series
    wanted = cfg.get("coordinates")
    if wanted:
        unknown = [c for c in wanted if c not in coords]
        if unknown:
            raise ConfigError(f"coordinates {unknown} not present in telemetry {coords}")
        keep = [coords.index(c) for c in wanted]
        series = [[_recoord(dev[j], k) for k, j in enumerate(keep)] for dev in series]
        coords = list(wanted)
    p = len(coords)
    domain_end = float(cfg.get("domain_end", tele.domain_end))
    order, d = cfg.order, cfg.penalty_order
    spec = cfg.get("basis", {}).get("n_basis")
    if isinstance(spec, dict):
        unknown = [c for c in spec if c not in coords]
        if unknown:
            raise ConfigError(f"basis.n_basis names unknown coordinates {unknown}")
    sizes = []
    for j, c in enumerate(coords):
        q_min = min(dev[j].q for dev in series)
        if isinstance(spec, dict):
            sizes.append(int(spec.get(c, _default_n_basis(order, q_min))))
        elif spec is not None:
            sizes.append(int(spec))
        else:
            sizes.append(_default_n_basis(order, q_min))
    try:
        bases = make_bases(domain_end, sizes, order, d, p)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    sm = cfg.get("smoothing", {})
    if "lambda" in sm:
        smooth_cfg = SmoothingConfig(lam=float(sm["lambda"]), penalty_order=d)
    else:
        smooth_cfg = SmoothingConfig(penalty_order=d,
                                     lambda_grid=tuple(sm.get("lambda_grid", DEFAULT_LAMBDA_GRID)))
    try:
        sample = smooth_sample(series, bases, smooth_cfg, tele.device_ids, coords)
    except DomainError as exc:
        raise InputError(str(exc)) from None
    rmse = reconstruction_rmse(sample, series)
    meta = {"domain_end": domain_end, "smoothing": {k: sm[k] for k in sm} or
            {"lambda_grid": list(smooth_cfg.lambda_grid)}}
    coef_path = _write_json(out / "coefficients.json", sample_to_json(sample, meta))
    summary = {
        "devices": sample.n,
        "coordinates": coords,
        "n_basis": dict(zip(coords, sizes)),
        "order": order,
        "penalty_order": d,
        "domain_end": domain_end,
        "reconstruction_rmse": dict(zip(coords, [float(x) for x in rmse])),
    }
    summ_path = _write_json(out / "smoothing_summary.json", summary)
    back = sample_from_json(json.loads(coef_path.read_text(encoding="utf-8")))
    if back.n != sample.n or not all(np.array_equal(a, b) for a, b in zip(back.coefs, sample.coefs)):
        raise InvariantViolation("coefficients.json does not round-trip")
    for c, r in summary["reconstruction_rmse"].items():
        logger.info("coordinate %s: reconstruction RMSE %.3g", c, r)
    return [coef_path, summ_path]


def _recoord(s, k):
    from .smoothing import RawSeries
    return RawSeries(s.device_id, k, s.times, s.values)


def load_sample(path) -> FunctionalSample:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return sample_from_json(doc)
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from None
    except (json.JSONDecodeError, KeyError, TypeError, DomainError) as exc:
        raise InputError(f"{path}: invalid coefficients document ({exc})") from None


def _report_rows(sample, res: Analysis):
    r = res.report
    central = r.in_central_set
    rows = []
    for i, did in enumerate(r.device_ids):
        rows.append([did, _f(r.fao[i]), _f(r.depth[i]), *[_f(v) for v in r.mo[i]], _f(r.vo[i]),
                     _f(r.fo[i]), str(bool(r.outlier_flag[i])).lower(),
                     str(bool(central[i])).lower()])
    return rows


def _coord_names(sample):
    return list(sample.labels) if sample.labels else [str(j) for j in range(sample.p)]


def run_analyze(coef_path, cfg: PipelineConfig, out: Path) -> list[Path]:
    sample = load_sample(coef_path)
    if sample.n < 4:
        raise InputError(f"analysis needs at least 4 devices, got {sample.n}")
    res = analyze(sample, cfg.grid, cfg.gamma, cfg.directions, cfg.seed)
    for w in res.report.warnings:
        logger.warning("%s", w)
    names = _coord_names(sample)
    header = ["device_id", "fao", "depth", *[f"mo_{c}" for c in names], "vo", "fo",
              "outlier_flag", "in_central_set"]
    report_csv = _write_csv(out / "report.csv", header, _report_rows(sample, res))
    r = res.report
    doc = {
        "format": REPORT_FORMAT,
        "version": 1,
        "coordinates": names,
        "gamma": r.gamma,
        "grid_size": res.grid.size,
        "seed": cfg.seed,
        "directions": cfg.directions,
        "central_set_size": int(len(r.central_set)),
        "warnings": list(r.warnings),
        "devices": [
            {"device_id": did, "fao": float(r.fao[i]), "depth": float(r.depth[i]),
             "mo": [float(v) for v in r.mo[i]], "vo": float(r.vo[i]), "fo": float(r.fo[i]),
             "outlier_flag": bool(r.outlier_flag[i]),
             "in_central_set": bool(r.in_central_set[i])}
            for i, did in enumerate(r.device_ids)
        ],
    }
    report_json = _write_json(out / "report.json", doc)

    band_rows, outlier_rows = [], []
    for j, fb in enumerate(res.boxplots):
        median = res.curves[fb.median_index, :, j]
        for g, t in enumerate(res.grid.times):
            band_rows.append([names[j], _f(t), _f(median[g]), _f(fb.central50_lower[g]),
                              _f(fb.central50_upper[g]), _f(fb.fence_lower[g]),
                              _f(fb.fence_upper[g]), _f(fb.central95_lower[g]),
                              _f(fb.central95_upper[g])])
        outlier_rows += [[names[j], sample.device_ids[i]] for i in fb.outlier_indices]
    bands = _write_csv(out / "boxplot_bands.csv", BAND_HEADER, band_rows)
    outliers = _write_csv(out / "boxplot_outliers.csv", ["coordinate", "device_id"], outlier_rows)
    ms_header = ["device_id", *[f"mo_{c}" for c in names], "mo_norm", "vo", "fo", "fao"]
    ms_rows = [[did, *[_f(v) for v in r.mo[i]], _f(np.sqrt(np.sum(r.mo[i] ** 2))), _f(r.vo[i]),
                _f(r.fo[i]), _f(r.fao[i])] for i, did in enumerate(r.device_ids)]
    ms = _write_csv(out / "ms_plot.csv", ms_header, ms_rows)

    _verify_csv(report_csv, header, sample.n)
    _verify_csv(bands, BAND_HEADER, sample.p * res.grid.size)
    _verify_csv(ms, ms_header, sample.n)
    back = json.loads(report_json.read_text(encoding="utf-8"))
    if back.get("format") != REPORT_FORMAT or len(back["devices"]) != sample.n:
        raise InvariantViolation("report.json failed read-back validation")
    logger.info("analysis: %d devices, %d flagged, |H|=%d", sample.n,
                int(r.outlier_flag.sum()), len(r.central_set))
    return [report_csv, report_json, bands, outliers, ms]


def load_central_set(report_path, sample: FunctionalSample) -> np.ndarray:
    path = Path(report_path)
    try:
        if path.suffix == ".csv":
            with open(path, encoding="utf-8", newline="") as fh:
                rows = list(csv.DictReader(fh))
            member = {r["device_id"]: r["in_central_set"] == "true" for r in rows}
        else:
            doc = json.loads(path.read_text(encoding="utf-8"))
            if doc.get("format") != REPORT_FORMAT:
                raise InputError(f"{path}: not an outlyingness report")
            member = {d["device_id"]: bool(d["in_central_set"]) for d in doc["devices"]}
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from None
    except (KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: invalid report ({exc})") from None
    missing = [d for d in sample.device_ids if d not in member]
    if missing:
        raise InputError(f"{path}: report lacks devices {missing[:5]}")
    H = np.array([i for i, d in enumerate(sample.device_ids) if member[d]], dtype=int)
    if H.size == 0:
        raise InputError(f"{path}: the central set is empty")
    return H


def _auto_edges(values, bins=10):
    lo, hi = float(np.min(values)), float(np.max(values))
    lo_e = math.floor(lo)
    hi_e = math.ceil(hi)
    if hi_e <= hi:
        hi_e = hi_e + 1
    return np.linspace(lo_e, hi_e, bins + 1)


def _bound_rows(edges, counts, under, over):
    rows = [["-inf", _f(edges[0]), str(int(under))]]
    rows += [[_f(edges[m]), _f(edges[m + 1]), str(int(c))] for m, c in enumerate(counts)]
    rows.append([_f(edges[-1]), "inf", str(int(over))])
    return rows


def run_profile(coef_path, report_path, cfg: PipelineConfig, out: Path) -> list[Path]:
    sample = load_sample(coef_path)
    H = load_central_set(report_path, sample)
    names = _coord_names(sample)
    start, end = sample.domain
    grid = EvaluationGrid.uniform(start, end, cfg.grid)
    curves = sample.evaluate(grid.times)
    written = []

    specs = cfg.get("histograms")
    if specs is None:
        specs = [{"coordinate": c, "edges": _auto_edges(curves[:, :, j]).tolist()}
                 for j, c in enumerate(names)]
    for hs in specs:
        if hs["coordinate"] not in names:
            raise ConfigError(f"histogram coordinate {hs['coordinate']!r} not in {names}")
        spec = HistogramSpec(hs["coordinate"], hs["edges"], grid)
        hist = residence_histogram(sample, H, spec)
        expected = len(H) * (end - start)
        if not math.isclose(hist.total, expected, rel_tol=1e-9):
            raise InvariantViolation(
                f"residence conservation violated for {hs['coordinate']}: "
                f"{hist.total} != |H| T = {expected}"
            )
        rows = classical_profile_export(hist)
        stem = f"residence_{hs['coordinate']}"
        p_csv = out / f"{stem}.csv"
        p_csv.write_text(residence_csv(hist), encoding="utf-8")
        p_json = _write_json(out / f"{stem}.json", {
            "coordinate": hs["coordinate"],
            "H_size": int(len(H)),
            "T": end - start,
            "grid_size": grid.size,
            "normalization": hist.normalization,
            "edges": [float(e) for e in hist.edges],
            "duration_sum": [float(x) for x in hist.durations],
            "duration_avg": [float(x) for x in hist.durations_avg],
            "underflow": hist.underflow,
            "overflow": hist.overflow,
        })
        _verify_csv(p_csv, RESIDENCE_HEADER, len(rows))
        written += [p_csv, p_json]

    ep = dict(cfg.get("endpoint") or {})
    coord = ep.get("coordinate") or ("mileage" if "mileage" in names else names[-1])
    if coord not in names:
        raise ConfigError(f"endpoint coordinate {coord!r} not in {names}")
    j = names.index(coord)
    endpoints = sample.evaluate([end])[:, 0, j]
    edges = np.asarray(ep["edges"], dtype=float) if "edges" in ep else _auto_edges(endpoints)
    hist_f = endpoint_histogram(sample, H, coord, edges)
    if hist_f.total != len(H):
        raise InvariantViolation("endpoint histogram does not account for every device in H")
    p_end = _write_csv(out / "endpoint.csv", ENDPOINT_HEADER,
                       _bound_rows(edges, hist_f.counts, hist_f.underflow, hist_f.overflow))
    H_point = pointwise_quantile_selection(sample, coord, ep.get("lower_q", 0.025),
                                           ep.get("upper_q", 0.975))
    comp = selection_comparison(sample, H, H_point, coord, edges)
    cmp_rows = [["-inf", _f(edges[0]), str(comp.pointwise.underflow),
                 str(comp.functional.underflow), str(comp.underflow_difference)]]
    cmp_rows += [[_f(edges[m]), _f(edges[m + 1]), str(int(comp.pointwise.counts[m])),
                  str(int(comp.functional.counts[m])), str(int(comp.difference[m]))]
                 for m in range(len(edges) - 1)]
    cmp_rows.append([_f(edges[-1]), "inf", str(comp.pointwise.overflow),
                     str(comp.functional.overflow), str(comp.overflow_difference)])
    p_cmp = _write_csv(out / "comparison.csv", COMPARISON_HEADER, cmp_rows)
    _verify_csv(p_end, ENDPOINT_HEADER, len(edges) + 1)
    _verify_csv(p_cmp, COMPARISON_HEADER, len(edges) + 1)
    return written + [p_end, p_cmp]


def _versions():
    import numba
    import scipy
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover
        pkg = __version__
    return {"missionprofile": pkg, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": ".".join(map(str, sys.version_info[:3]))}


def run_pipeline(cfg: PipelineConfig, out: Path) -> list[Path]:
    written = []
    sim = cfg.get("simulate")
    if sim:
        written += run_simulate(sim["kind"], cfg, out)
        tele = out / "telemetry.csv"
    elif cfg.get("input"):
        tele = Path(cfg.get("input"))
    else:
        raise ConfigError("pipeline needs either 'simulate' or 'input' in the config")
    written += run_smooth(tele, cfg, out)
    written += run_analyze(out / "coefficients.json", cfg, out)
    written += run_profile(out / "coefficients.json", out / "report.json", cfg, out)
    manifest = {
        "config_sha256": config_hash(cfg),
        "config": json.loads(canonical_json(cfg.raw)),
        "seed": cfg.seed,
        "versions": _versions(),
        "numba": USE_NUMBA,
        "files": {p.name: _sha256(p) for p in sorted(written, key=lambda p: p.name)},
    }
    return written + [_write_json(out / "manifest.json", manifest)]


# -- argument parsing ----------------------------------------------------------

def _lambda_grid(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid lambda grid {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty lambda grid")
    return vals


def _add_common(p, analysis=False, smoothing=False):
    p.add_argument("--config", metavar="PATH", help="pipeline configuration JSON")
    p.add_argument("--out", metavar="DIR", default=".", help="output directory")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    if smoothing:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--lambda", dest="lam", type=float, help="fixed roughness weight")
        g.add_argument("--lambda-grid", type=_lambda_grid, help="comma-separated GCV grid")
    if analysis:
        p.add_argument("--grid", type=int, help="evaluation grid size")
        p.add_argument("--gamma", type=float, help="central-set proportion")
        p.add_argument("--directions", type=int, help="number of projection directions")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="missionprofile", description="Functional mission profiles from telemetry")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate synthetic telemetry")
    p.add_argument("kind", choices=["fleet", "day"])
    _add_common(p)

    p = sub.add_parser("smooth", help="penalized B-spline smoothing of telemetry")
    p.add_argument("telemetry")
    _add_common(p, smoothing=True)

    p = sub.add_parser("analyze", help="outlyingness, boxplot bands, MS-plot data")
    p.add_argument("coefficients")
    _add_common(p, analysis=True)

    p = sub.add_parser("profile", help="residence and endpoint histograms")
    p.add_argument("coefficients")
    p.add_argument("report")
    _add_common(p, analysis=True)

    p = sub.add_parser("pipeline", help="simulate/smooth/analyze/profile in one run")
    _add_common(p, analysis=True, smoothing=True)
    return parser


def _setup_logging():
    level = {"debug": logging.DEBUG, "info": logging.INFO, "warn": logging.WARNING,
             "warning": logging.WARNING}.get(os.environ.get("MP_LOG", "warn").lower(), logging.WARNING)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("missionprofile")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        overrides = {"seed": args.seed}
        for name in ("grid", "gamma", "directions"):
            if hasattr(args, name):
                overrides[name] = getattr(args, name)
        if getattr(args, "lam", None) is not None:
            overrides["lambda"] = args.lam
        if getattr(args, "lambda_grid", None) is not None:
            overrides["lambda_grid"] = args.lambda_grid
        cfg = cfg.with_overrides(**overrides)
        out = _out_dir(args.out)
        if args.command == "simulate":
            files = run_simulate(args.kind, cfg, out)
        elif args.command == "smooth":
            files = run_smooth(args.telemetry, cfg, out)
        elif args.command == "analyze":
            files = run_analyze(args.coefficients, cfg, out)
        elif args.command == "profile":
            files = run_profile(args.coefficients, args.report, cfg, out)
        else:
            files = run_pipeline(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DegenerateScaleError, RankDeficiencyError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvariantViolation as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissionProfileError as exc:  # pragma: no cover
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    for f in files:
        logger.info("wrote %s", f)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
