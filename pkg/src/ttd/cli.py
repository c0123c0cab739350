"""Command-line entry point.

Exit codes: 0 success, 1 invalid input (usage, configuration, file format,
provenance mismatch), 2 computation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .dataset import FormatError, load_dataset, save_dataset
from .tolerances import DEFAULT

SCHEMA_VERSION = 1


class InputError(ValueError):
    """Bad user input; exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# io helpers -----------------------------------------------------------------


def _config(path) -> RunConfig:
    try:
        return load_config(path)
    except ConfigError as exc:
        raise InputError(str(exc)) from exc


def _setup(cfg: RunConfig):
    """Domain, metric and atlas of a configuration; invalid geometry is an input error."""
    try:
        domain = cfg.build_domain()
        return domain, cfg.build_field(), cfg.build_atlas(domain)
    except ValueError as exc:
        raise InputError(f"invalid configuration: {exc}") from exc


def _dataset(path):
    try:
        return load_dataset(path)
    except (OSError, FormatError) as exc:
        raise InputError(f"cannot load dataset {path}: {exc}") from exc


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read JSON {path}: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def write_report(path, kind: str, payload: dict, provenance) -> dict:
    report = {"schema_version": SCHEMA_VERSION, "kind": kind, "provenance": provenance, **payload}
    text = json.dumps(_jsonable(report), indent=1, sort_keys=True)
    if path is None or str(path) == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")
    return report


def check_provenance(report: dict, expected) -> None:
    """Reject a report produced from a different dataset."""
    got = report.get("provenance")
    exp = expected if isinstance(expected, list) else [expected]
    got = got if isinstance(got, list) else [got]
    if not set(exp) <= set(got):
        raise InputError(f"provenance mismatch: report has {got}, dataset has {exp}")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# subcommands ------------------------------------------------------------------


def cmd_synth(args) -> int:
    from .synthesis import parse_sources, synth_dataset

    cfg = _config(args.config)
    sources = args.sources if args.sources is not None else cfg.sources
    try:
        parse_sources(sources)
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"bad source spec: {exc}") from exc
    domain, field, atlas = _setup(cfg)
    ds = synth_dataset(field, domain, atlas, sources, seed=cfg.seed, noise=cfg.noise)
    out = args.out or cfg.outputs.get("data")
    if not out:
        raise InputError("no output path (--out or outputs.data)")
    save_dataset(ds, out)
    print(f"{len(ds)} records, {ds.m} receivers, {len(ds.rejected)} rejected -> {out}")
    return 0


def _chart_inventory(ds, tol, count):
    from .reconstruction import (ChartError, PreconditionError, build_boundary_chart, build_interior_chart,
                                 classify_cut_locus)
    from .reconstruction.boundary import _curve_order

    atlas = ds.atlas
    inv = {"boundary": [], "interior": []}
    if count <= 0:
        return inv
    for c in range(len(atlas.curve_lengths)):
        idx = _curve_order(atlas, c)
        for p in idx[:: max(1, len(idx) // count)][:count]:
            pos = int(np.flatnonzero(idx == p)[0])
            z0 = int(idx[(pos + len(idx) // 3) % len(idx)])
            try:
                rec = build_boundary_chart(ds, int(p), z0, tol)
                inv["boundary"].append({"base": int(p), "aux": z0, "accepted": True, "entry": rec.entry,
                                        "sources": len(rec.ids)})
            except (ChartError, PreconditionError) as exc:
                inv["boundary"].append({"base": int(p), "aux": z0, "accepted": False, "diagnostic": str(exc)})
    labels = classify_cut_locus(ds, tol)
    off = [k for k, lab in enumerate(labels) if lab == "off_cut"]
    for k in off[:: max(1, len(off) // count)][:count]:
        zp = int(np.argmin(ds.values[k]))
        idx = _curve_order(atlas, int(atlas.curve[zp]))
        pos = int(np.flatnonzero(idx == zp)[0])
        cands = [int(idx[(pos + j) % len(idx)]) for j in (-6, -3, 3, 6)]
        try:
            rec = build_interior_chart(ds, k, cands, tol)
            inv["interior"].append({"anchor": ds.ids[k], "receivers": list(rec.receivers), "accepted": True,
                                    "condition": rec.condition, "patch": len(rec.ids)})
        except ChartError as exc:
            inv["interior"].append({"anchor": ds.ids[k], "accepted": False, "diagnostic": str(exc)})
    return inv


def cmd_reconstruct(args) -> int:
    from .reconstruction import boundary_distance_matrix, classify_cut_locus, recover_boundary_metric

    ds = _dataset(args.data)
    if args.charts < 0:
        raise InputError("--charts must be non-negative")
    tol = _config(args.config).tolerances if args.config else DEFAULT
    labels = classify_cut_locus(ds, tol)
    payload = {
        "boundary_distances": boundary_distance_matrix(ds),
        "cut_locus_labels": dict(zip(ds.ids, labels)),
        "charts": _chart_inventory(ds, tol, args.charts),
        "boundary_metric": recover_boundary_metric(ds),
        "tolerances": tol.to_dict(),
    }
    write_report(args.report, "reconstruct", payload, ds.provenance)
    return 0


def _phi(spec, m):
    if spec in (None, "identity"):
        return np.arange(m)
    data = _read_json(spec)
    if isinstance(data, dict):
        if "phi" not in data:
            raise InputError("phi file needs a 'phi' list")
        data = data["phi"]
    if data == "identity":
        return np.arange(m)
    phi = np.asarray(data, dtype=int)
    if phi.shape != (m,) or not np.array_equal(np.sort(phi), np.arange(m)):
        raise InputError("phi must be a permutation of the receiver indices")
    return phi


def cmd_match(args) -> int:
    from .dataset import AtlasMismatch
    from .reconstruction import match_manifolds

    ds1, ds2 = _dataset(args.data1), _dataset(args.data2)
    if ds1.m != ds2.m:
        raise InputError(f"atlas sizes differ: {ds1.m} vs {ds2.m}")
    phi = _phi(args.phi, ds1.m)
    tol = _config(args.config).tolerances if args.config else DEFAULT
    try:
        corr = match_manifolds(ds1, ds2, phi, tol)
    except AtlasMismatch as exc:
        raise InputError(str(exc)) from exc
    write_report(args.report, "match", corr.to_dict(), [ds1.provenance, ds2.provenance])
    return 0


def cmd_verify_visibility(args) -> int:
    from .equivalence import visibility_check

    cfg = _config(args.config)
    domain, field, atlas = _setup(cfg)
    rep = visibility_check(field, domain, atlas, cfg.tolerances, sweep=args.sweep)
    write_report(args.report, "visibility", rep.to_dict(), _config_hash(cfg))
    return 0


def _config_hash(cfg: RunConfig) -> str:
    import hashlib

    return hashlib.sha256(cfg.dumps().encode()).hexdigest()


def cmd_equiv(args) -> int:
    from .equivalence import boundary_jet_check, matveev_flow_test, projective_residual

    c1, c2 = _config(args.g), _config(args.gtilde)
    if c1.domain != c2.domain or c1.h != c2.h:
        raise InputError("both configurations must describe the same domain and pitch")
    domain, G, atlas = _setup(c1)
    _, Gt, _ = _setup(c2)
    jets = boundary_jet_check(G, Gt, domain, atlas, order=1)
    rng = np.random.default_rng(c1.seed)
    x0, y0, x1, y1 = domain.bbox
    pts = rng.uniform((x0, y0), (x1, y1), size=(400, 2))
    pts = pts[domain.depth(pts) > 0.1 * min(x1 - x0, y1 - y0)][:50]
    beta, resid = projective_residual(G, Gt, pts)
    seeds = [(p, rng.normal(size=2)) for p in pts[:args.seeds]]
    flows = matveev_flow_test(G, Gt, domain, seeds, args.time)
    payload = {
        "jets": jets.to_dict(),
        "projective": {"residual": resid, "beta": beta, "points": pts},
        "matveev": [{"variation": f.variation, "time": f.time, "truncated": f.truncated} for f in flows],
    }
    write_report(args.report, "equiv", payload, [_config_hash(c1), _config_hash(c2)])
    return 0


def _read_arrivals(path, m):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except OSError as exc:
        raise InputError(f"cannot read arrivals {path}: {exc}") from exc
    events = []
    for k, r in enumerate(rows):
        try:
            vals = [float(x) for x in r]
            name = str(k)
        except ValueError:
            if k == 0 and not events:
                continue  # header row
            name, vals = r[0], [float(x) for x in r[1:]]
        if len(vals) == m + 1:
            name, vals = str(vals[0]), vals[1:]
        if len(vals) != m:
            raise InputError(f"arrival row {k} has {len(vals)} values, expected {m}")
        events.append((name, np.asarray(vals)))
    if not events:
        raise InputError("no arrival rows")
    return events


def cmd_dd_locate(args) -> int:
    from .domain import GeometryError
    from .reconstruction import dd_locate

    cfg = _config(args.config)
    master = _read_json(args.master)
    try:
        p0 = np.asarray(master["position"], dtype=float).reshape(2)
        t0 = np.asarray(master["arrivals"], dtype=float)
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"master file needs 'position' and 'arrivals': {exc}") from exc
    domain, field, atlas = _setup(cfg)
    if t0.shape != (atlas.m,):
        raise InputError(f"master has {t0.size} arrivals, configuration has {atlas.m} receivers")
    out = []
    for name, t1 in _read_arrivals(args.arrivals, atlas.m):
        try:
            r = dd_locate((p0, t0), t1, field, domain, atlas)
        except GeometryError as exc:
            out.append({"event": name, "error": str(exc)})
            continue
        out.append({"event": name, "offset": r.offset, "position": r.position,
                    "origin_shift": r.origin_shift, "residual": r.residual})
    write_report(args.report, "dd-locate", {"master": p0, "events": out}, _config_hash(cfg))
    return 0 if all("error" not in e for e in out) else 2


def cmd_plot_export(args) -> int:
    if args.kind == "distance":
        from .distance import get_engine

        domain, field, _ = _setup(_config(args.config))
        eng = get_engine(field, domain)
        src = np.asarray([float(v) for v in args.source.split(",")])
        df = eng.field_from(src)
        n = eng.n_nodes
        rows = [(x, y, v) for (x, y), v in zip(df.nodes[:n], df.values[:n]) if np.isfinite(v)]
        _write_csv(args.out, ("x", "y", "value"), rows)
        return 0
    ds = _dataset(args.data)
    if args.report:
        check_provenance(_read_json(args.report), ds.provenance)
    tol = DEFAULT
    if args.kind == "chart":
        from .reconstruction import build_boundary_chart

        rec = build_boundary_chart(ds, args.receiver, args.aux, tol)
        _write_csv(args.out, ("x", "y", "value"), zip(rec.Z, rec.E, rec.depth))
        return 0
    from .domain import attach_positions, build_domain
    from .reconstruction import recover_geodesic_image

    img = recover_geodesic_image(ds, args.receiver, args.a, tol=tol)
    domain = build_domain(ds.domain, ds.h)
    atlas = attach_positions(domain, ds.atlas)
    z = int(args.receiver)
    c = domain.curves[int(atlas.curve[z])]
    T, N = c.tangent(atlas.arclength[z]), c.normal(atlas.arclength[z])
    v = args.a * T + np.sqrt(1 - args.a ** 2) * N
    # recovered sources placed at their data-only distance along the Euclidean ray
    pts = atlas.positions[z] + img.distances[:, None] * v
    _write_csv(args.out, ("x", "y", "value"), [(x, y, r) for (x, y), r in zip(pts, img.distances)])
    return 0


# parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ttd", description="Travel-time-difference data: synthesis, reconstruction, checks.")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: TTD_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="synthesize a dataset")
    s.add_argument("--config", required=True)
    s.add_argument("--sources", default=None, help="override, e.g. grid:0.1 or random:100:7")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("reconstruct", help="data-only reconstruction report")
    s.add_argument("--data", required=True)
    s.add_argument("--report", default="-")
    s.add_argument("--config", default=None, help="tolerances source")
    s.add_argument("--charts", type=int, default=4, help="chart attempts per curve")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("match", help="match the records of two datasets")
    s.add_argument("--data1", required=True)
    s.add_argument("--data2", required=True)
    s.add_argument("--phi", default="identity")
    s.add_argument("--report", default="-")
    s.add_argument("--config", default=None)
    s.set_defaults(func=cmd_match)

    s = sub.add_parser("verify-visibility", help="visibility condition certificates")
    s.add_argument("--config", required=True)
    s.add_argument("--report", default="-")
    s.add_argument("--sweep", type=int, default=64)
    s.set_defaults(func=cmd_verify_visibility)

    s = sub.add_parser("equiv", help="jet, projective and Matveev checks between two metrics")
    s.add_argument("--g", required=True)
    s.add_argument("--gtilde", required=True)
    s.add_argument("--report", default="-")
    s.add_argument("--seeds", type=int, default=20)
    s.add_argument("--time", type=float, default=0.5)
    s.set_defaults(func=cmd_equiv)

    s = sub.add_parser("dd-locate", help="double-difference location against a master event")
    s.add_argument("--master", required=True)
    s.add_argument("--arrivals", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--report", default="-")
    s.set_defaults(func=cmd_dd_locate)

    s = sub.add_parser("plot-export", help="(x, y, value) CSV for plotting")
    s.add_argument("kind", choices=("distance", "chart", "geodesic"))
    s.add_argument("--out", required=True)
    s.add_argument("--config", help="distance: domain and metric")
    s.add_argument("--source", default="0,0", help="distance: source point x,y")
    s.add_argument("--data", help="chart/geodesic: dataset")
    s.add_argument("--report", help="optional reconstruct report; must share the dataset provenance")
    s.add_argument("--receiver", type=int, default=0)
    s.add_argument("--aux", type=int, default=0, help="chart: auxiliary receiver")
    s.add_argument("--a", type=float, default=0.0, help="geodesic: tangential component")
    s.set_defaults(func=cmd_plot_export)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "plot-export":
        need = "config" if args.kind == "distance" else "data"
        if getattr(args, need) is None:
            parser.error(f"plot-export {args.kind} needs --{need}")
    from .distance import set_threads

    threads = args.threads if args.threads is not None else int(os.environ.get("TTD_THREADS", "1") or 1)
    set_threads(threads)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"ttd: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # computation failure
        print(f"ttd: computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
