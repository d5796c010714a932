"""Command-line front end: a thin client of the certification service.

Subcommands map one-to-one onto service endpoints; by default requests are
dispatched to an in-process instance of the app (no network, fully
deterministic), while ``--server URL`` sends them to a running instance
instead.  File ingestion, output writing and rendering stay client-side.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
import sys
from dataclasses import dataclass

import httpx

from .datafiles import ParseError
from .mechanisms import MECHANISM_ORDER, MechanismId

log = logging.getLogger("smoothcert")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_MECHANISM_NAMES = tuple(m.value for m in MECHANISM_ORDER)


class CliError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class RunConfig:
    """Validated invocation: one command plus the knobs it needs."""

    command: str
    sigma: float = 1.0
    alpha: float = 0.001
    n: int = 100000
    mode: str = "multinomial"
    mechanisms: tuple[str, ...] | None = None
    threshold: float = 0.05
    resolution: int = 200
    seed: int = 0
    input_path: str | None = None
    out_dir: str = "."
    render: bool = False
    server: str | None = None
    extra: dict | None = None


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the documented usage code is 1
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def parse(text: str):
        value = kind(text)
        if not value > 0:
            raise argparse.ArgumentTypeError(f"{text!r} must be > 0")
        return value
    return parse


def _unit_open(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"{text!r} must be in (0, 1)")
    return value


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated "
                                         "list of numbers") from None


def _mechanism_list(text: str) -> tuple[str, ...]:
    names = tuple(v.strip() for v in text.split(",") if v.strip())
    for name in names:
        if name not in _MECHANISM_NAMES:
            raise argparse.ArgumentTypeError(
                f"unknown mechanism {name!r} (choose from {', '.join(_MECHANISM_NAMES)})")
    return names


def build_parser() -> _Parser:
    parser = _Parser(prog="smoothcert",
                     description="Certified-robustness radii for smoothed "
                                 "classifiers: single-sample certification, "
                                 "simplex sweeps, dataset scoring and "
                                 "Monte-Carlo simulation.")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service; default runs the "
                             "service in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mode=True, mechanisms=True, out=True):
        p.add_argument("--sigma", type=_positive(float), default=1.0,
                       help="smoothing noise std dev (default 1.0)")
        p.add_argument("--delta-sens", type=_positive(float), default=1.0,
                       help="model input sensitivity (default 1.0)")
        if mode:
            p.add_argument("--mode", choices=("multinomial", "softmax"),
                           default="multinomial",
                           help="expectation mode (default multinomial)")
        if mechanisms:
            p.add_argument("--mechanisms", type=_mechanism_list, default=None,
                           help="comma-separated subset of "
                                f"{{{','.join(_MECHANISM_NAMES)}}}; default: all "
                                "applicable to the mode")
        if out:
            p.add_argument("--out", default=".", help="output directory (default .)")
            p.add_argument("--render", action="store_true",
                           help="also write SVG figures")

    p = sub.add_parser("certify", help="certify one (e0, e1) pair")
    p.add_argument("--e0", type=float, required=True,
                   help="lower bound on the top class expectation")
    p.add_argument("--e1", type=float, required=True,
                   help="upper bound on the runner-up expectation")
    common(p, out=False)

    p = sub.add_parser("sweep", help="evaluate mechanisms over the simplex lattice")
    p.add_argument("--resolution", type=_positive(int), default=200,
                   help="lattice points per axis (default 200)")
    p.add_argument("--diff", action="append", default=[], metavar="A,B",
                   help="also write the radius difference A - B (repeatable)")
    p.add_argument("--ratio", action="append", default=[], metavar="A:B[,C...]",
                   help="also write A / max(B, C, ...) (repeatable)")
    common(p)

    p = sub.add_parser("dataset", help="certify an evidence file and summarize")
    p.add_argument("--input", required=True, help="counts or softmax-sums file")
    p.add_argument("--format", choices=("auto", "counts", "softmax"),
                   default="auto", help="input schema (default: sniff header)")
    p.add_argument("--alpha", type=_unit_open, default=0.001,
                   help="confidence level (default 0.001)")
    p.add_argument("--threshold", type=_positive(float), default=0.05,
                   help="radius threshold for the certified proportion "
                        "(default 0.05)")
    p.add_argument("--baseline", choices=_MECHANISM_NAMES, default="cohen",
                   help="baseline mechanism for improvement stats (default cohen)")
    p.add_argument("--curve-points", type=int, default=0,
                   help="evaluate curves on an even grid of this many radii "
                        "(default: exact breakpoints)")
    common(p)

    p = sub.add_parser("simulate",
                       help="Monte-Carlo certification of a synthetic classifier")
    p.add_argument("--classifier", choices=("fixed", "linear"), default="fixed")
    p.add_argument("--probs", type=_float_list, default=None,
                   help="class probabilities for --classifier fixed, e.g. 0.7,0.2,0.1")
    p.add_argument("--weights", type=_float_list, default=None,
                   help="weight vector for --classifier linear")
    p.add_argument("--offset", type=float, default=0.0,
                   help="bias for --classifier linear (default 0)")
    p.add_argument("--x", type=_float_list, default=None,
                   help="input point (default: the origin)")
    p.add_argument("--algorithm", choices=("multinomial", "softmax", "binomial"),
                   default="multinomial",
                   help="certification procedure (default multinomial)")
    p.add_argument("--replicates", type=_positive(int), default=1,
                   help="independent certifications to run (default 1)")
    p.add_argument("--n", type=_positive(int), default=100000,
                   help="draws per certification (default 100000)")
    p.add_argument("--n0", type=_positive(int), default=100,
                   help="selection draws for the binomial procedure (default 100)")
    p.add_argument("--alpha", type=_unit_open, default=0.001,
                   help="confidence level (default 0.001)")
    p.add_argument("--seed", type=int, default=0,
                   help="base seed; per-replicate streams derive from it (default 0)")
    p.add_argument("--threshold", type=_positive(float), default=0.05)
    p.add_argument("--baseline", choices=_MECHANISM_NAMES, default="cohen")
    p.add_argument("--curve-points", type=int, default=0)
    common(p, mode=False)

    p = sub.add_parser("analyze", help="summarize an existing per-sample file")
    p.add_argument("--input", required=True, help="per-sample results file")
    p.add_argument("--threshold", type=_positive(float), default=0.05)
    p.add_argument("--baseline", choices=_MECHANISM_NAMES, default="cohen")
    p.add_argument("--curve-points", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory (default .)")
    p.add_argument("--render", action="store_true", help="also write SVG figures")

    return parser


async def _post_inprocess(path: str, payload: dict) -> httpx.Response:
    from .service.app import app  # imported lazily: pulls in the full stack

    transport = httpx.ASGITransport(app=app)
    async with httpx.AsyncClient(transport=transport,
                                 base_url="http://smoothcert.internal",
                                 timeout=None) as client:
        return await client.post(path, json=payload)


def _post(path: str, payload: dict, server: str | None) -> dict:
    if server:
        with httpx.Client(base_url=server, timeout=600.0) as client:
            resp = client.post(path, json=payload)
    else:
        resp = asyncio.run(_post_inprocess(path, payload))
    if resp.status_code == 200:
        return resp.json()
    try:
        detail = resp.json().get("detail")
    except ValueError:
        detail = resp.text
    if isinstance(detail, dict):
        kind = detail.get("type", "validation")
        message = detail.get("message", str(detail))
    else:
        kind, message = "validation", json.dumps(detail)
    code = {"validation": EXIT_USAGE, "data": EXIT_DATA,
            "numeric": EXIT_NUMERIC}.get(kind, EXIT_NUMERIC)
    raise CliError(f"service error ({resp.status_code}): {message}", code)


def _mechanisms_payload(names) -> list[str] | None:
    return list(names) if names else None


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _ensure_out(out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def _cmd_certify(args) -> int:
    payload = {"e0": args.e0, "e1": args.e1, "mode": args.mode,
               "sigma": args.sigma, "delta_sens": args.delta_sens,
               "mechanisms": _mechanisms_payload(args.mechanisms)}
    result = _post("/certify", payload, args.server)
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def _parse_diff(text: str) -> tuple[str, str]:
    parts = [v.strip() for v in text.split(",")]
    if len(parts) != 2 or not all(p in _MECHANISM_NAMES for p in parts):
        raise CliError(f"--diff expects A,B mechanism names, got {text!r}",
                       EXIT_USAGE)
    return parts[0], parts[1]


def _parse_ratio(text: str) -> dict:
    head, sep, tail = text.partition(":")
    names = [v.strip() for v in tail.split(",") if v.strip()]
    if not sep or head.strip() not in _MECHANISM_NAMES or not names \
            or not all(n in _MECHANISM_NAMES for n in names):
        raise CliError(f"--ratio expects A:B[,C...] mechanism names, got {text!r}",
                       EXIT_USAGE)
    return {"numerator": head.strip(), "denominators": names}


def _cmd_sweep(args) -> int:
    from . import render
    from .analysis import BoundarySegment

    payload = {"resolution": args.resolution, "sigma": args.sigma,
               "delta_sens": args.delta_sens, "mode": args.mode,
               "mechanisms": _mechanisms_payload(args.mechanisms),
               "diffs": [_parse_diff(d) for d in args.diff],
               "ratios": [_parse_ratio(r) for r in args.ratio]}
    result = _post("/sweep", payload, args.server)
    out = _ensure_out(args.out)
    e0_axis, e1_axis = result["e0_axis"], result["e1_axis"]
    written = []

    def write_matrix(name: str, rows) -> None:
        path = os.path.join(out, f"{name}.csv")
        _emit_matrix_rows(rows, e0_axis, e1_axis, path)
        written.append(path)

    for name, rows in result["radii"].items():
        write_matrix(f"sweep_{name}", rows)
    _emit_region_rows(result["region"], e0_axis, e1_axis,
                      os.path.join(out, "region_map.csv"))
    written.append(os.path.join(out, "region_map.csv"))
    _emit_boundary_rows(result["boundaries"], os.path.join(out, "region_boundaries.csv"))
    written.append(os.path.join(out, "region_boundaries.csv"))
    for name, rows in result["diffs"].items():
        write_matrix(f"diff_{name}", rows)
    for name, rows in result["ratios"].items():
        write_matrix(f"ratio_{name}", rows)

    if args.render:
        import numpy as np
        segs = [BoundarySegment(a=MechanismId(b["a"]), b=MechanismId(b["b"]),
                                x1=b["x1"], y1=b["y1"], x2=b["x2"], y2=b["y2"])
                for b in result["boundaries"]]
        ax0, ax1 = np.asarray(e0_axis), np.asarray(e1_axis)
        for group in ("radii", "diffs", "ratios"):
            for name, rows in result[group].items():
                matrix = np.array([[np.nan if v is None else v for v in row]
                                   for row in rows])
                prefix = {"radii": "sweep", "diffs": "diff", "ratios": "ratio"}[group]
                svg = render.heatmap_svg(matrix, ax0, ax1,
                                         f"{prefix} {name} (sigma={args.sigma:g})",
                                         segs)
                path = os.path.join(out, f"{prefix}_{name}.svg")
                _write(path, svg)
                written.append(path)
    for path in written:
        print(path)
    return EXIT_OK


def _emit_matrix_rows(rows, e0_axis, e1_axis, path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["e0/e1"] + [f"{v:.9g}" for v in e1_axis])
        for e0, row in zip(e0_axis, rows):
            w.writerow([f"{e0:.9g}"] +
                       ["" if v is None else f"{v:.9g}" for v in row])


def _emit_region_rows(rows, e0_axis, e1_axis, path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["e0/e1"] + [f"{v:.9g}" for v in e1_axis])
        for e0, row in zip(e0_axis, rows):
            w.writerow([f"{e0:.9g}"] + ["" if v is None else v for v in row])


def _emit_boundary_rows(boundaries, path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mechanism_a", "mechanism_b", "x1", "y1", "x2", "y2"])
        for b in boundaries:
            w.writerow([b["a"], b["b"], f"{b['x1']:.9g}", f"{b['y1']:.9g}",
                        f"{b['x2']:.9g}", f"{b['y2']:.9g}"])


def _records_payload(path: str, fmt: str) -> tuple[list[dict], str]:
    from .datafiles import ingest_counts, ingest_softmax, sniff_format

    if fmt == "auto":
        fmt = sniff_format(path)
    records = ingest_counts(path) if fmt == "counts" else ingest_softmax(path)
    payload = []
    for r in records:
        entry = {"sample_id": r.sample_id, "label": r.label}
        if fmt == "counts":
            entry["n"] = r.counts.n
            entry["counts"] = list(r.counts.counts)
        else:
            entry["n"] = r.sums.n
            entry["sums"] = list(r.sums.sums)
        payload.append(entry)
    return payload, fmt


def _summary_from_payload(d: dict):
    from .analysis import (DatasetSummary, ImprovementStats, MechanismStats)

    imp = d["improvement"]
    return DatasetSummary(
        num_samples=d["num_samples"], threshold=d["threshold"],
        top1_accuracy=d["top1_accuracy"], abstention_rate=d["abstention_rate"],
        mechanisms={MechanismId(name): MechanismStats(**st)
                    for name, st in d["mechanisms"].items()},
        ensemble_median_radius=d["ensemble_median_radius"],
        ensemble_proportion_above_threshold=d["ensemble_proportion_above_threshold"],
        improvement=ImprovementStats(
            baseline=MechanismId(imp["baseline"]),
            wilcoxon_statistic=imp["wilcoxon_statistic"],
            wilcoxon_p=imp["wilcoxon_p"],
            proportion_improved=imp["proportion_improved"],
            median_improvement=imp["median_improvement"],
            mean_improvement=imp["mean_improvement"],
            median_pct_improvement=imp["median_pct_improvement"],
            mean_pct_improvement=imp["mean_pct_improvement"],
            infinite_pct_count=imp["infinite_pct_count"]))


_OVERLAY_RESOLUTION = 60


def _overlay_segments(result: dict, args) -> list:
    """Region boundaries at this run's noise level, from a coarse sweep."""
    from .analysis import BoundarySegment

    mode = result["records"][0]["mode"] if result["records"] else "multinomial"
    payload = {"resolution": _OVERLAY_RESOLUTION, "sigma": args.sigma,
               "delta_sens": getattr(args, "delta_sens", 1.0), "mode": mode,
               "mechanisms": _mechanisms_payload(getattr(args, "mechanisms", None))}
    sweep = _post("/sweep", payload, args.server)
    return [BoundarySegment(a=MechanismId(b["a"]), b=MechanismId(b["b"]),
                            x1=b["x1"], y1=b["y1"], x2=b["x2"], y2=b["y2"])
            for b in sweep["boundaries"]]


def _write_dataset_outputs(result: dict, args, out: str,
                           overlay: bool = True) -> list[str]:
    """Per-sample file, summary file, curves, optional SVG figures."""
    from . import render
    from .datafiles import emit_curve, emit_samples, emit_summary
    from .service.app import _record_from_model
    from .service.schemas import SampleModel

    records = [_record_from_model(SampleModel(**m)) for m in result["records"]]
    written = []
    samples_path = os.path.join(out, "samples.csv")
    emit_samples(records, samples_path)
    written.append(samples_path)
    summary_path = os.path.join(out, "summary.csv")
    emit_summary(_summary_from_payload(result["summary"]), summary_path)
    written.append(summary_path)
    curves = result.get("curves")
    if curves:
        for name in sorted(curves):
            path = os.path.join(out, f"curve_{name}.csv")
            emit_curve([(r, c) for r, c in curves[name]], path)
            written.append(path)
    if args.render:
        if curves:
            entries = []
            for name in sorted(curves):
                color = (render.ENSEMBLE_COLOR if name == "ensemble"
                         else render.MECHANISM_COLORS[MechanismId(name)])
                entries.append((name, color, curves[name]))
            path = os.path.join(out, "certified_accuracy.svg")
            _write(path, render.curves_svg(entries, "certified accuracy"))
            written.append(path)
        segments = _overlay_segments(result, args) if overlay else []
        points = [(r.bounds.e0, r.bounds.e1, r.region) for r in records]
        path = os.path.join(out, "expectation_scatter.svg")
        _write(path, render.scatter_svg(points, "sample expectations", segments))
        written.append(path)
    return written


def _cmd_dataset(args) -> int:
    records, fmt = _records_payload(args.input, args.format)
    mode = "softmax" if fmt == "softmax" else "multinomial"
    if args.mode != mode:
        log.warning("input file implies %s mode; using it", mode)
    payload = {"mode": mode, "sigma": args.sigma, "delta_sens": args.delta_sens,
               "alpha": args.alpha,
               "mechanisms": _mechanisms_payload(args.mechanisms),
               "threshold": args.threshold, "baseline": args.baseline,
               "curve_points": args.curve_points, "records": records}
    result = _post("/dataset", payload, args.server)
    out = _ensure_out(args.out)
    for path in _write_dataset_outputs(result, args, out):
        print(path)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    from .datafiles import emit_counts, emit_softmax
    from .service.app import _record_from_model
    from .service.schemas import SampleModel

    if args.classifier == "fixed":
        if not args.probs:
            raise CliError("--classifier fixed requires --probs", EXIT_USAGE)
        classifier = {"kind": "fixed", "probs": args.probs}
    else:
        if not args.weights:
            raise CliError("--classifier linear requires --weights", EXIT_USAGE)
        classifier = {"kind": "linear", "weights": args.weights,
                      "offset": args.offset}
    payload = {"classifier": classifier, "x": args.x,
               "algorithm": args.algorithm, "replicates": args.replicates,
               "n": args.n, "n0": args.n0, "sigma": args.sigma,
               "alpha": args.alpha, "seed": args.seed,
               "delta_sens": args.delta_sens,
               "mechanisms": _mechanisms_payload(args.mechanisms),
               "threshold": args.threshold, "baseline": args.baseline,
               "curve_points": args.curve_points}
    result = _post("/simulate", payload, args.server)
    out = _ensure_out(args.out)
    written = _write_dataset_outputs(result, args, out)
    records = [_record_from_model(SampleModel(**m)) for m in result["records"]]
    if args.algorithm == "softmax":
        path = os.path.join(out, "sums.csv")
        emit_softmax(records, path)
    else:
        path = os.path.join(out, "counts.csv")
        emit_counts(records, path)
    written.append(path)
    for p in written:
        print(p)
    return EXIT_OK


def _cmd_analyze(args) -> int:
    from .datafiles import ingest_samples
    from .service.app import _sample_model

    records = ingest_samples(args.input)
    if not records:
        raise CliError(f"{args.input}: no samples to analyze", EXIT_DATA)
    payload = {"records": [_sample_model(r).model_dump() for r in records],
               "threshold": args.threshold, "baseline": args.baseline,
               "curve_points": args.curve_points}
    result = _post("/analyze", payload, args.server)
    out = _ensure_out(args.out)
    for path in _write_dataset_outputs(result, args, out):
        print(path)
    return EXIT_OK


_COMMANDS = {
    "certify": _cmd_certify,
    "sweep": _cmd_sweep,
    "dataset": _cmd_dataset,
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"smoothcert: {exc}", file=sys.stderr)
        return exc.code
    except ParseError as exc:
        print(f"smoothcert: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"smoothcert: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"smoothcert: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # exercised by numeric failures inside the app
        print(f"smoothcert: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
