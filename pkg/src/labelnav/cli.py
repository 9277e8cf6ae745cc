"""Command-line front end.

Exit status: 0 success (or accepted match), 3 rejected match, 2 usage, file
or validation errors, 1 when an evaluation case failed at run time.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .camera import CameraModel, NoiseModel, TruePose, project_scene, sample_pose, synth_database
from .config import ConfigError, RunConfig, bundled_config, load_config, parse_region
from .harness import EvalCase, report_csv, report_json, run_case, trials_csv
from .matcher import estimate_height, match
from .model import (
    ConfigurationError,
    Disc,
    MapFormatError,
    MatchParams,
    Rect,
    SceneTruth,
    read_database,
    read_scene,
    write_database,
    write_scene,
)

MATCH_SCHEMA = "labelnav.match/1"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_REJECTED = 3


class _UsageError(Exception):
    pass


def _region_arg(v: str) -> Rect:
    try:
        return parse_region(v)
    except (ValueError, TypeError):
        raise argparse.ArgumentTypeError(
            f"invalid region {v!r}: expected WxH or xmin,ymin,xmax,ymax") from None


def _numbers(n: int, what: str):
    def parse(v: str) -> tuple[float, ...]:
        try:
            parts = tuple(float(p) for p in v.split(","))
        except ValueError:
            parts = ()
        if len(parts) != n or not all(math.isfinite(p) for p in parts):
            raise argparse.ArgumentTypeError(f"invalid {what} {v!r}")
        return parts
    return parse


def _labels_arg(v: str):
    items = [p.strip() for p in v.split(",") if p.strip()]
    if not items:
        raise argparse.ArgumentTypeError("empty label list")
    if any(":" in p for p in items):
        try:
            return {k.strip(): float(w) for k, w in (p.split(":") for p in items)}
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid label weights {v!r}") from None
    return items[0] if len(items) == 1 else items


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen_db(args) -> int:
    if args.count < 0:
        raise _UsageError("--count must be >= 0")
    db = synth_database(args.region, args.count, args.labels, seed=args.seed)
    write_database(db, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    db = read_database(args.db)
    cam = CameraModel.from_degrees(args.hfov_deg, args.width_px, args.height_px)
    if (args.x is None) != (args.y is None):
        raise _UsageError("--x and --y go together")
    if args.x is None:
        rng = np.random.default_rng([args.seed, 0])
        pose = sample_pose(rng, db.region, args.alt_m, math.radians(args.sigma_att_deg),
                           cam, inset=args.inset)
    else:
        pose = TruePose(args.x, args.y, args.alt_m, math.radians(args.roll_deg),
                        math.radians(args.pitch_deg), math.radians(args.yaw_deg))
    scene = project_scene(db, pose, cam, NoiseModel(sigma_px=args.sigma_px, seed=[args.seed, 1]))
    write_scene(scene, args.out, SceneTruth(pose.x, pose.y, pose.alt))
    return EXIT_OK


def _params_from_args(args) -> MatchParams:
    prior = None
    if args.prior is not None and args.prior_disc is not None:
        raise _UsageError("--prior and --prior-disc are exclusive")
    if args.prior is not None:
        prior = Rect(*args.prior)
    elif args.prior_disc is not None:
        prior = Disc(*args.prior_disc)
    label_map = None
    if args.label_map is not None:
        try:
            label_map = json.loads(Path(args.label_map).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise _UsageError(f"cannot read label map {args.label_map}: {exc}") from None
        if not isinstance(label_map, dict):
            raise _UsageError("label map must be a JSON object")
    return MatchParams(
        n_min=args.n_min,
        delta_r=args.delta_r,
        delta_theta=math.radians(args.delta_theta_deg),
        selection_mode=args.selection_mode,
        search_mode=args.search_mode,
        max_hypotheses=args.max_hypotheses,
        seed=args.search_seed,
        top_k=args.top_k,
        injective=args.injective,
        prior_region=prior,
        label_map=label_map,
    )


def cmd_match(args) -> int:
    params = _params_from_args(args)
    db = read_database(args.db)
    scene, _ = read_scene(args.scene)  # truth is deliberately ignored
    outcome = match(scene, db, params)
    out: dict = {"schema": MATCH_SCHEMA, "status": outcome.status}
    if outcome.accepted:
        out.update(
            x=outcome.position[0],
            y=outcome.position[1],
            n_matched=outcome.n_matched,
            score=outcome.score,
            scale_m_per_px=outcome.scale,
            candidates=[{"x": c.position[0], "y": c.position[1], "n_matched": c.n_matched,
                         "score": c.score, "scale_m_per_px": c.scale}
                        for c in outcome.candidates],
        )
        if args.hfov_deg is not None:
            cam = CameraModel.from_degrees(args.hfov_deg, scene.width_px, scene.height_px)
            out["height_m"] = estimate_height(outcome, cam)
    print(json.dumps(out))
    return EXIT_OK if outcome.accepted else EXIT_REJECTED


def _with_overrides(cfg: RunConfig, n_trials: int | None) -> list[EvalCase]:
    if n_trials is None:
        return list(cfg.cases)
    if n_trials < 1:
        raise _UsageError("--n-trials must be >= 1")
    from dataclasses import replace

    return [replace(c, n_trials=n_trials) for c in cfg.cases]


def cmd_evaluate(args) -> int:
    if (args.config is None) == (args.bundled is None):
        raise _UsageError("give exactly one of CONFIG or --bundled NAME")
    if args.workers < 1:
        raise _UsageError("--workers must be >= 1")
    cfg = load_config(args.config) if args.config is not None else bundled_config(args.bundled)
    cases = _with_overrides(cfg, args.n_trials)
    out_dir = Path(args.out_dir)
    outputs = {"report_csv": "report.csv", "report_json": "report.json", **cfg.outputs}
    reports, all_trials, errors, timing = [], [], [], {}
    for case in cases:
        try:
            report, trials = run_case(case, workers=args.workers, return_trials=True)
        except Exception as exc:  # recorded per case, reported via exit status
            errors.append({"case": case.name, "error": f"{type(exc).__name__}: {exc}"})
            print(f"case {case.name} failed: {exc}", file=sys.stderr)
            continue
        reports.append(report)
        all_trials.append((case.name, trials))
        timing[case.name] = report.wall_time_s
    _write_text(out_dir / outputs["report_csv"], report_csv(reports))
    text = report_json(reports)
    if errors:
        doc = json.loads(text)
        doc["errors"] = errors
        text = json.dumps(doc, indent=2) + "\n"
    _write_text(out_dir / outputs["report_json"], text)
    if args.trials_csv or "trials_csv" in cfg.outputs:
        name = cfg.outputs.get("trials_csv", "trials.csv")
        body = "".join(trials_csv(n, t) if k == 0 else trials_csv(n, t).split("\n", 1)[1]
                       for k, (n, t) in enumerate(all_trials))
        _write_text(out_dir / name, body)
    _write_text(out_dir / outputs.get("timing_json", "timing.json"),
                json.dumps({"wall_time_s": timing}, indent=2) + "\n")
    sys.stdout.write(report_csv(reports))
    return EXIT_FAILED if errors else EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="labelnav",
                                description="Labeled point-pattern localization tools.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-db", help="synthesize a map database")
    g.add_argument("--region", type=_region_arg, required=True,
                   help="WxH meters (origin 0,0) or xmin,ymin,xmax,ymax")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--labels", type=_labels_arg, default="obj",
                   help="a,b,c (equally likely) or a:0.7,b:0.3")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_db)

    s = sub.add_parser("simulate", help="render a scene file (with truth) from a database")
    s.add_argument("--db", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--x", type=float, help="true east position (m); random if omitted")
    s.add_argument("--y", type=float, help="true north position (m)")
    s.add_argument("--alt-m", type=float, default=100.0)
    s.add_argument("--roll-deg", type=float, default=0.0)
    s.add_argument("--pitch-deg", type=float, default=0.0)
    s.add_argument("--yaw-deg", type=float, default=0.0)
    s.add_argument("--sigma-att-deg", type=float, default=0.0,
                   help="attitude noise for random poses")
    s.add_argument("--sigma-px", type=float, default=0.0)
    s.add_argument("--hfov-deg", type=float, default=35.0)
    s.add_argument("--width-px", type=int, default=640)
    s.add_argument("--height-px", type=int, default=480)
    s.add_argument("--inset", action="store_true",
                   help="random poses keep the footprint inside the region")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    d = MatchParams()
    m = sub.add_parser("match", help="localize a scene against a database")
    m.add_argument("--db", required=True)
    m.add_argument("--scene", required=True)
    m.add_argument("--n-min", type=int, default=d.n_min)
    m.add_argument("--delta-r", type=float, default=d.delta_r)
    m.add_argument("--delta-theta-deg", type=float, default=math.degrees(d.delta_theta))
    m.add_argument("--selection-mode", default=d.selection_mode)
    m.add_argument("--search-mode", default=d.search_mode)
    m.add_argument("--max-hypotheses", type=int, default=d.max_hypotheses)
    m.add_argument("--search-seed", type=int, default=d.seed)
    m.add_argument("--injective", action="store_true")
    m.add_argument("--top-k", type=int, default=d.top_k)
    m.add_argument("--prior", type=_numbers(4, "prior rectangle"),
                   help="xmin,ymin,xmax,ymax in meters")
    m.add_argument("--prior-disc", type=_numbers(3, "prior disc"), help="cx,cy,radius in meters")
    m.add_argument("--label-map", help="JSON object mapping fine labels to coarse ones")
    m.add_argument("--hfov-deg", type=float, help="also report height above ground")
    m.set_defaults(func=cmd_match)

    e = sub.add_parser("evaluate", help="run Monte Carlo cases from a config file")
    e.add_argument("config", nargs="?", help="config file")
    e.add_argument("--bundled", metavar="NAME", help="use a bundled config (e.g. table1)")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--n-trials", type=int, help="override n_trials of every case")
    e.add_argument("--out-dir", default=".")
    e.add_argument("--trials-csv", action="store_true", help="also write per-trial rows")
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (_UsageError, ConfigError, ConfigurationError, MapFormatError, ValueError) as exc:
        print(f"labelnav {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"labelnav {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
