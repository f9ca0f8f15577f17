"""``dpmot`` command line: synth, track, eval, sode-check and ablate.

Exit codes: 0 success, 1 a ``--min-*``/``--max-*`` threshold was missed,
2 unreadable or malformed input, 3 invalid configuration or usage.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from . import __version__, io, metrics, synth
from ._accel import backend_name
from .errors import ConfigError, DpmotError, IoFailure
from .sode import order_detections
from .tracker import ASSOCIATIONS, MOTION_MODELS, WEIGHT_PRESETS, TrackerConfig, run_sequence

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_IO = 2
EXIT_CONFIG = 3

BUILTINS = ("crossing", "adversarial", "static", "ego", "walkers", "pacing")
TABLE_HEADER = ("Motion models", "Association") + metrics.TABLE_COLUMNS
FLAG_ALIASES = {"lambda_q": "--depth-bins-scale", "w_z": "--depth-unit-weight"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _choice(options: Sequence[str]) -> Callable[[str], str]:
    """Case-insensitive choice that returns the canonical spelling."""
    lookup = {o.lower(): o for o in options}

    def conv(text):
        try:
            return lookup[text.lower()]
        except KeyError:
            raise argparse.ArgumentTypeError(f"expected one of {', '.join(options)}") from None

    conv.__name__ = "choice"
    return conv


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("tracker configuration", "precedence: defaults < <seq>/dpmot.cfg < --config < flags")
    g.add_argument("--config", help="key = value file of tracker settings")
    g.add_argument("--weights-preset", choices=sorted(WEIGHT_PRESETS), help="named (alpha, beta) pair")
    g.add_argument("--ablation-motion", type=_choice(MOTION_MODELS), metavar="MODEL", help=f"one of {', '.join(MOTION_MODELS)}")
    g.add_argument("--ablation-assoc", type=_choice(ASSOCIATIONS), metavar="ASSOC", help=f"one of {', '.join(ASSOCIATIONS)}")
    defaults = TrackerConfig()
    for name in TrackerConfig.field_names():
        flags = [f"--{name}"]
        if "_" in name:
            flags.append(f"--{name.replace('_', '-')}")
        if name in FLAG_ALIASES:
            flags.append(FLAG_ALIASES[name])
        g.add_argument(*flags, dest=f"cfg_{name}", metavar="V", help=f"default {getattr(defaults, name)!r}")


def resolve_config(args, seq_dir=None) -> TrackerConfig:
    values: Dict[str, object] = {}
    if seq_dir is not None:
        local = Path(seq_dir) / io.SEQ_CONFIG
        if local.exists():
            values.update(io.read_config_file(local, TrackerConfig))
    if args.config:
        values.update(io.read_config_file(args.config, TrackerConfig))
    if args.weights_preset:
        values["alpha"], values["beta"] = WEIGHT_PRESETS[args.weights_preset]
    raw = {n: getattr(args, f"cfg_{n}") for n in TrackerConfig.field_names() if getattr(args, f"cfg_{n}") is not None}
    values.update(io.coerce_config_values(TrackerConfig, raw, "command line"))
    if args.ablation_motion:
        values["motion"] = args.ablation_motion
    if args.ablation_assoc:
        values["association"] = args.ablation_assoc
    return TrackerConfig(**values)


def _workers(args) -> int:
    n = args.workers if args.workers is not None else (os.cpu_count() or 1)
    if n < 1:
        raise ConfigError("--workers must be >= 1")
    return n


def _map(fn, jobs: List[tuple], workers: int) -> list:
    """Run ``fn(*job)`` for every job; results come back in job order."""
    if workers == 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        futures = [pool.submit(fn, *job) for job in jobs]
        return [f.result() for f in futures]


def _seq_name(seq_dir) -> str:
    return Path(seq_dir).resolve().name


# ---------------------------------------------------------------------------
# track
# ---------------------------------------------------------------------------


def _color(track_id: int) -> str:
    return f"hsl({(track_id * 137.508) % 360:.1f},70%,45%)"


def overlay_svg(info, frame: int, records, detections) -> str:
    """One frame as SVG: detections dashed grey with their depth order, tracks coloured by id."""
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{info.img_w}" height="{info.img_h}" viewBox="0 0 {info.img_w} {info.img_h}">',
        f'<rect width="{info.img_w}" height="{info.img_h}" fill="white"/>',
        f'<text x="8" y="24" font-size="20">frame {frame}</text>',
    ]
    for d in detections:
        b = d.bbox
        out.append(f'<rect x="{b.x:.2f}" y="{b.y:.2f}" width="{b.w:.2f}" height="{b.h:.2f}" fill="none" stroke="grey" stroke-dasharray="6 4"/>')
        if d.depth_order is not None:
            out.append(f'<text x="{b.x:.2f}" y="{b.bottom + 16:.2f}" font-size="14" fill="grey">z={d.depth_order}</text>')
    for r in records:
        b = r.bbox
        c = _color(r.id)
        out.append(f'<rect x="{b.x:.2f}" y="{b.y:.2f}" width="{b.w:.2f}" height="{b.h:.2f}" fill="none" stroke="{c}" stroke-width="3"/>')
        out.append(f'<text x="{b.x:.2f}" y="{b.y - 4:.2f}" font-size="16" fill="{c}">{r.id}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _cost_csv(step) -> str:
    """One row per (track, detection) pair: the four components and the fused cost."""
    comp, C = step.components, step.fused.C
    lines = ["track_id,det_index,C_a,C_diou,C_Pd,C_Pa,C"]
    for i, tid in enumerate(step.track_ids):
        for j in range(C.shape[1]):
            vals = (comp.C_a[i, j], comp.C_diou[i, j], comp.C_Pd[i, j], comp.C_Pa[i, j], C[i, j])
            lines.append(f"{tid},{j}," + ",".join(f"{v:.6f}" for v in vals))
    return "\n".join(lines) + "\n"


def track_sequence(seq_dir, out_dir, config: TrackerConfig, overlay=False, dump_costs=False, seed=0) -> dict:
    seq = io.load_sequence(seq_dir)
    name = _seq_name(seq_dir)
    out_dir = Path(out_dir)
    on_cost = None
    if dump_costs:
        cost_dir = out_dir / f"{name}.costs"
        cost_dir.mkdir(parents=True, exist_ok=True)

        def on_cost(step):
            (cost_dir / f"{step.frame:06d}.csv").write_text(_cost_csv(step))

    res = run_sequence(seq.frames, config, seq.camera, seq.info, on_cost=on_cost)
    io.write_tracks(out_dir / f"{name}.txt", res.records)
    timing = {
        "sequence": name,
        "frames": res.n_frames,
        "fps": res.fps,
        "total_ms": 1000.0 * res.elapsed,
        "stage_ms": res.timings,
        "backend": backend_name(),
        "seed": seed,
        "config": asdict(config),
    }
    (out_dir / f"{name}.timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
    if overlay:
        ov_dir = out_dir / f"{name}.overlay"
        ov_dir.mkdir(parents=True, exist_ok=True)
        by_frame: Dict[int, list] = {}
        for r in res.records:
            by_frame.setdefault(r.frame, []).append(r)
        for t in range(1, res.n_frames + 1):
            svg = overlay_svg(seq.info, t, by_frame.get(t, []), seq.frames.get(t, []))
            (ov_dir / f"{t:06d}.svg").write_text(svg)
    return {"sequence": name, "records": len(res.records), "tracks": len({r.id for r in res.records})}


def cmd_track(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(d, out, resolve_config(args, d), args.overlay, args.dump_cost_matrices, args.seed or 0) for d in args.sequences]
    for r in _map(track_sequence, jobs, _workers(args)):
        print(f"{r['sequence']}: {r['records']} boxes in {r['tracks']} tracks -> {out / (r['sequence'] + '.txt')}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval and ablate
# ---------------------------------------------------------------------------


def _fmt_row(report: metrics.MotReport) -> List[str]:
    mota, idf1, mt, ml, sw = report.table_row()
    return [f"{mota:.2f}", f"{idf1:.2f}", str(mt), str(ml), str(sw)]


def _print_table(header: Sequence[str], rows: List[List[str]]):
    widths = [max(len(h), *(len(r[k]) for r in rows)) for k, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)))


def _write_csv(path, header: Sequence[str], rows: List[List[str]]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(",".join(r) for r in [list(header)] + rows) + "\n")


def _check_thresholds(args, report: metrics.MotReport) -> int:
    failed = []
    if args.min_mota is not None and report.mota < args.min_mota:
        failed.append(f"MOTA {report.mota:.4f} < {args.min_mota}")
    if args.min_idf1 is not None and report.idf1 < args.min_idf1:
        failed.append(f"IDF1 {report.idf1:.4f} < {args.min_idf1}")
    if args.max_id_switches is not None and report.id_switches > args.max_id_switches:
        failed.append(f"ID switches {report.id_switches} > {args.max_id_switches}")
    for msg in failed:
        print(f"threshold failed: {msg}", file=sys.stderr)
    return EXIT_THRESHOLD if failed else EXIT_OK


def evaluate_files(gt_path, track_path) -> metrics.MotReport:
    return metrics.clear_mot(io.parse_gt(gt_path), io.parse_tracks(track_path))


def cmd_eval(args) -> int:
    jobs = [(Path(d) / io.GT_FILE, Path(args.tracks) / f"{_seq_name(d)}.txt") for d in args.sequences]
    reports = _map(evaluate_files, jobs, _workers(args))
    rows = [[_seq_name(d)] + _fmt_row(r) for d, r in zip(args.sequences, reports)]
    overall = metrics.combine(reports)
    rows.append(["OVERALL"] + _fmt_row(overall))
    header = ("Sequence",) + metrics.TABLE_COLUMNS
    _print_table(header, rows)
    if args.out:
        _write_csv(args.out, header, rows)
    return _check_thresholds(args, overall)


def _ablate_job(seq_dir, config: TrackerConfig) -> metrics.MotReport:
    seq = io.load_sequence(seq_dir)
    res = run_sequence(seq.frames, config, seq.camera, seq.info)
    return metrics.clear_mot(io.parse_gt(Path(seq_dir) / io.GT_FILE), res.records)


def ablation_grid():
    return [(m, a) for a in ASSOCIATIONS for m in MOTION_MODELS]


def cmd_ablate(args) -> int:
    grid = ablation_grid()
    jobs = []
    for m, a in grid:
        for d in args.sequences:
            jobs.append((d, resolve_config(args, d).ablated(m, a)))
    reports = _map(_ablate_job, jobs, _workers(args))
    n = len(args.sequences)
    rows = []
    full = None
    for k, (m, a) in enumerate(grid):
        pooled = metrics.combine(reports[k * n:(k + 1) * n])
        rows.append([m, a.capitalize()] + _fmt_row(pooled))
        if (m, a) == ("A-3DKF", "high-order"):
            full = pooled
    _print_table(TABLE_HEADER, rows)
    _write_csv(args.out, TABLE_HEADER, rows)
    return _check_thresholds(args, full)


# ---------------------------------------------------------------------------
# synth and sode-check
# ---------------------------------------------------------------------------


def _builtin_scenarios(kind: str, seed: int, count: Optional[int]) -> List[synth.Scenario]:
    if kind == "adversarial":
        return synth.adversarial_suite(count or 30, base_seed=seed)
    make = {
        "crossing": lambda s: synth.crossing_scenario(s, "merge"),
        "static": lambda s: synth.static_scene(s, pitch_deg=10.0),
        "ego": synth.ego_scene,
        "walkers": synth.walkers_scene,
        "pacing": synth.pacing_scene,
    }[kind]
    return [make(seed + k) for k in range(count or 1)]


def cmd_synth(args) -> int:
    if (args.scenario is None) == (args.builtin is None):
        raise ConfigError("give either a scenario file or --builtin")
    if args.scenario is not None:
        sc = synth.read_scenario(args.scenario)
        if args.seed is not None:
            sc.seed = args.seed
        scenarios = [sc]
    else:
        scenarios = _builtin_scenarios(args.builtin, args.seed or 0, args.count)
    for sc in scenarios:
        print(synth.write_sequence(sc, args.out))
    return EXIT_OK


def sode_check_sequence(seq_dir, config: TrackerConfig):
    seq_dir = Path(seq_dir)
    info, camera = io.load_camera_and_info(seq_dir)
    frames = io.parse_detections(seq_dir / io.DET_FILE)
    truth = io.parse_truth_orders(seq_dir / io.ORDER_FILE)
    est = {}
    for t in sorted(set(truth) | set(frames)):
        est[t] = order_detections(frames.get(t, []), camera, config.lambda_q, config.moving_camera)
    return metrics.frame_lcs(truth, est)


def cmd_sode_check(args) -> int:
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    total_hit = total_n = 0.0
    for d in args.sequences:
        name = _seq_name(d)
        rows, agg = sode_check_sequence(d, resolve_config(args, d))
        n = sum(r[1] for r in rows)
        total_hit += agg * n
        total_n += n
        print(f"{name}: LCS accuracy {agg:.2f}% over {len(rows)} frames")
        if out:
            lines = ["frame,n,lcs_accuracy"] + [f"{f},{k},{acc:.4f}" for f, k, acc in rows]
            (out / f"{name}.sode.csv").write_text("\n".join(lines) + "\n")
    overall = total_hit / total_n
    print(f"aggregate LCS accuracy {overall:.2f}%")
    if args.min_lcs is not None and overall < args.min_lcs:
        print(f"threshold failed: LCS {overall:.2f} < {args.min_lcs}", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _add_thresholds(p):
    g = p.add_argument_group("thresholds (exit 1 when missed)")
    g.add_argument("--min-mota", type=float)
    g.add_argument("--min-idf1", type=float)
    g.add_argument("--max-id-switches", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dpmot", description="Depth-ordered multi-object tracking on MOT-format sequences.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seqs=True):
        if seqs:
            p.add_argument("sequences", nargs="+", metavar="SEQ_DIR", help="sequence directories (seqinfo.ini, det/det.txt, ...)")
        p.add_argument("--seed", type=int, default=None, help="RNG seed (default 0; synth: the scenario file's seed)")
        p.add_argument("--workers", type=int, default=None, help="parallel sequences (default: logical cores)")

    p = sub.add_parser("track", help="track sequences, write <out>/<seq>.txt and <seq>.timing.json")
    common(p)
    p.add_argument("--out", "-o", required=True, help="output directory")
    p.add_argument("--overlay", action="store_true", help="write per-frame SVG overlays to <out>/<seq>.overlay/")
    p.add_argument("--dump-cost-matrices", action="store_true", help="write per-frame fused cost CSVs to <out>/<seq>.costs/")
    _add_config_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score track files against gt/gt.txt")
    common(p)
    p.add_argument("--tracks", required=True, help="directory holding <seq>.txt track files")
    p.add_argument("--out", "-o", help="CSV path for the results table")
    _add_thresholds(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="all motion model x association combinations, pooled over sequences")
    common(p)
    p.add_argument("--out", "-o", required=True, help="CSV path for the ablation table")
    _add_thresholds(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="render synthetic sequences")
    common(p, seqs=False)
    p.add_argument("scenario", nargs="?", help="scenario description file (see docs/formats.md)")
    p.add_argument("--builtin", choices=BUILTINS, help="generate a built-in scenario family instead")
    p.add_argument("--count", type=int, help="number of built-in scenarios (seeds seed, seed+1, ...)")
    p.add_argument("--out", "-o", required=True, help="root directory; one sub-directory per scenario")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sode-check", help="depth-order accuracy against gt/depth_order.csv")
    common(p)
    p.add_argument("--out", "-o", help="directory for per-frame <seq>.sode.csv files")
    p.add_argument("--min-lcs", type=float, help="exit 1 when the aggregate accuracy (percent) is lower")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sode_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"dpmot: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IoFailure, OSError) as exc:
        print(f"dpmot: input/output error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DpmotError as exc:
        print(f"dpmot: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
