"""Command-line entry point: ``lidarswd <subcommand> [flags]``.

Every successful run writes ``manifest.json`` into its ``--out`` directory;
``lidarswd rerun <manifest>`` replays it. Settings resolve as built-in
defaults, then ``--config FILE`` (JSON keyed by option name), then flags.

Exit status: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from ._parallel import THREADS_ENV
from .core import (
    CapacityError,
    InvalidInputError,
    InvalidParameterError,
    cloud_radius,
    load_cloud,
    write_xyz,
)

log = logging.getLogger("lidarswd")

MANIFEST = "manifest.json"
# options that describe where things go rather than what is computed
_LOCATION_KEYS = ("out", "config", "command")
_INPUT_KEYS = ("input", "target", "pred", "gt", "pred_dir", "gt_dir")

class UsageError(Exception):
    pass

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")

def _adder(parser, suppress: bool):
    def add(*flags, **kw):
        if suppress and "default" in kw:
            kw["default"] = argparse.SUPPRESS
        if suppress and kw.get("action") == "store_true":
            kw["default"] = argparse.SUPPRESS
        parser.add_argument(*flags, **kw)
    return add

def _common(add):
    add("--out", default=".", help="output directory (created if missing)")
    add("--config", default=None, help="JSON file of option defaults; flags take precedence")
    add("--threads", type=int, default=None,
        help=f"worker cap, 0 = all cores (default: ${THREADS_ENV} or 1)")

def _raster_flags(add):
    from .lidar_io import COLS, FOV_DOWN, FOV_UP, ROWS

    add("--rows", type=int, default=ROWS, help="range-image rows (laser rings)")
    add("--cols", type=int, default=COLS, help="range-image columns (azimuth bins)")
    add("--fov-up", dest="fov_up", type=float, default=FOV_UP, help="upper vertical FOV bound, degrees")
    add("--fov-down", dest="fov_down", type=float, default=FOV_DOWN, help="lower vertical FOV bound, degrees")

def _metric_flags(add):
    add("--emd-reduction", dest="emd_reduction", choices=("mean", "sum"), default="mean")
    add("--dirs", type=int, default=128, help="number of sliced directions")
    add("--swd-seed", dest="swd_seed", type=int, default=0)
    add("--auction-eps", dest="auction_epsilon", type=float, default=1e-3)
    add("--exact-cap", dest="exact_cap", type=int, default=512, help="largest N solved by exact EMD")
    add("--sinkhorn-reg", dest="sinkhorn_regularization", type=float, default=0.01)
    add("--sinkhorn-iters", dest="sinkhorn_max_iters", type=int, default=1000)

def build_parser(suppress: bool = False) -> argparse.ArgumentParser:
    parser = _Parser(prog="lidarswd", description="Point-set OT metrics, lidar decimation and SWD upsampling.")
    parser.add_argument("--version", action="version", version=f"lidarswd {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", help="write a synthetic KITTI-layout scan")
    add = _adder(p, suppress)
    _common(add)
    _raster_flags(add)
    add("--seed", type=int, default=0)
    add("--occupancy", type=float, default=1.0, help="fraction of cells that return a point")
    add("--noise", type=float, default=0.0, help="range noise sigma, meters")

    p = sub.add_parser("rasterize", help="scan -> range-image depth dump (PGM)")
    add = _adder(p, suppress)
    _common(add)
    add("--in", dest="input", default=None, help="scan (.bin KITTI, .xyz text)")
    _raster_flags(add)

    p = sub.add_parser("decimate", help="scan -> low/high resolution XYZ pair")
    add = _adder(p, suppress)
    _common(add)
    add("--in", dest="input", default=None)
    _raster_flags(add)
    add("--factor", type=int, default=2)
    add("--phase", type=int, default=0, help="surviving row index modulo factor")

    p = sub.add_parser("patch", help="scan -> FPS-centered kNN patches")
    add = _adder(p, suppress)
    _common(add)
    add("--in", dest="input", default=None)
    add("--patch-size", dest="patch_size", type=int, default=2048)
    add("--n-patches", dest="n_patches", type=int, default=1)
    add("--seed", type=int, default=0)
    add("--normalize", action="store_true", default=False, help="center and scale each patch to the unit sphere")

    p = sub.add_parser("metrics", help="CD/HD/EMD/SWD report for a pair or two directories")
    add = _adder(p, suppress)
    _common(add)
    add("--pred", default=None)
    add("--gt", default=None)
    add("--pred-dir", dest="pred_dir", default=None)
    add("--gt-dir", dest="gt_dir", default=None)
    _metric_flags(add)

    p = sub.add_parser("sweep", help="jitter or rotation sensitivity sweep")
    add = _adder(p, suppress)
    p.add_argument("kind", choices=("jitter", "rotation"))
    _common(add)
    add("--in", dest="input", default=None)
    add("--levels", type=int, default=None, help="sweep points (default 20 jitter / 25 rotation)")
    add("--max-sigma", dest="max_sigma", type=float, default=0.1, help="largest jitter as a fraction of cloud radius")
    add("--min-sigma", dest="min_sigma", type=float, default=1e-3, help="smallest nonzero jitter fraction")
    add("--metrics", default="cd,hd,emd,swd", help="comma list from cd,hd,emd,swd,sinkhorn")
    add("--seed", type=int, default=0)
    add("--normalize", action="store_true", default=False, help="normalize the input to the unit sphere first")
    _metric_flags(add)

    p = sub.add_parser("upsample", help="optimize free points towards a target")
    add = _adder(p, suppress)
    _common(add)
    add("--in", dest="input", default=None, help="low-resolution source cloud")
    add("--target", default=None, help="high-resolution target cloud")
    add("--loss", choices=("swd", "chamfer", "emd-auction"), default="swd")
    add("--iterations", type=int, default=500)
    add("--step", dest="step_size", type=float, default=40.0)
    add("--dirs", dest="directions_per_step", type=int, default=64)
    add("--ratio", dest="upsample_ratio", type=int, default=2)
    add("--sigma", dest="init_jitter_sigma", type=float, default=0.0)
    add("--seed", type=int, default=0)
    add("--resample", dest="resample_directions", choices=("per-step", "fixed"), default="per-step")
    add("--auction-eps", dest="auction_epsilon", type=float, default=1e-3)

    p = sub.add_parser("gradcheck", help="finite-difference check of analytic gradients")
    add = _adder(p, suppress)
    _common(add)
    add("--loss", choices=("swd", "chamfer"), default="swd")
    add("--n", type=int, default=24)
    add("--dirs", type=int, default=8)
    add("--seed", type=int, default=1)
    add("--configs", type=int, default=1)
    add("--h", type=float, default=1e-5)
    add("--tol", type=float, default=1e-4)

    p = sub.add_parser("rerun", help="replay a run from its manifest.json")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="output directory (default: the manifest's)")
    return parser

# --- helpers ---------------------------------------------------------------

def _write(out: Path, name: str, text: str, outputs: list[str]) -> Path:
    path = out / name
    path.write_text(text, encoding="utf-8")
    outputs.append(name)
    return path

def _dump(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"

def _need(args, *names):
    for n in names:
        if getattr(args, n, None) in (None, ""):
            raise InvalidParameterError(f"missing required option --{n.replace('_', '-')}")

def _metric_config(args):
    from .metrics import MetricConfig

    return MetricConfig(emd_reduction=args.emd_reduction, swd_directions=args.dirs, swd_seed=args.swd_seed,
                        sinkhorn_regularization=args.sinkhorn_regularization,
                        sinkhorn_max_iters=args.sinkhorn_max_iters, auction_epsilon=args.auction_epsilon,
                        exact_cap=args.exact_cap, threads=args.threads)

# --- subcommands ----------------------------------------------------------

def cmd_synth(args, out, outputs):
    from .lidar_io import synthetic_scan, write_scan

    pts, _ = synthetic_scan(args.rows, args.cols, args.fov_up, args.fov_down, seed=args.seed,
                            occupancy=args.occupancy, range_noise=args.noise)
    write_scan(out / "scan.bin", pts)
    outputs.append("scan.bin")
    return 0

def cmd_rasterize(args, out, outputs):
    from .lidar_io import rasterize

    _need(args, "input")
    img = rasterize(load_cloud(args.input), args.rows, args.cols, args.fov_up, args.fov_down)
    _write(out, "range_image.pgm", img.to_pgm(), outputs)
    stats = {"points": int(img.points.shape[0]), "occupied": int(img.occupied.sum()),
             "skipped_origin": img.skipped_origin, "collisions": img.collisions, "lost": img.lost}
    _write(out, "raster.json", _dump(stats), outputs)
    return 0

def cmd_decimate(args, out, outputs):
    from .lidar_io import make_pair, rasterize

    _need(args, "input")
    img = rasterize(load_cloud(args.input), args.rows, args.cols, args.fov_up, args.fov_down)
    low, high = make_pair(img, args.factor, args.phase)
    write_xyz(out / "low.xyz", low)
    write_xyz(out / "high.xyz", high)
    outputs += ["low.xyz", "high.xyz"]
    return 0

def cmd_patch(args, out, outputs):
    from .lidar_io import extract_patches, write_patch_set

    _need(args, "input")
    patches = extract_patches(load_cloud(args.input), args.patch_size, args.n_patches, args.seed,
                              scan_id=Path(args.input).stem, normalize=args.normalize)
    write_patch_set(out, patches)
    outputs += [f"patch_{i:03d}.xyz" for i in range(len(patches))] + ["patches.json"]
    return 0

def cmd_metrics(args, out, outputs):
    from .harness import evaluate_dataset
    from .metrics import evaluate_pair, reports_to_csv, reports_to_json

    cfg = _metric_config(args)
    status = 0
    if args.pred_dir or args.gt_dir:
        _need(args, "pred_dir", "gt_dir")
        result = evaluate_dataset(args.pred_dir, args.gt_dir, cfg)
        reports = result.reports + ([result.aggregate] if result.aggregate else [])
        for name in result.unmatched:
            print(f"unmatched: {name}", file=sys.stderr)
        if result.unmatched:
            status = 1
    else:
        _need(args, "pred", "gt")
        reports = [evaluate_pair(load_cloud(args.pred), load_cloud(args.gt), cfg, pair_id=Path(args.pred).name)]
    text = reports_to_csv(reports)
    _write(out, "metrics.csv", text, outputs)
    _write(out, "metrics.json", reports_to_json(reports) + "\n", outputs)
    sys.stdout.write(text)
    return status

def cmd_sweep(args, out, outputs):
    from .core import normalize_to_unit_sphere
    from .harness import default_angles, default_sigmas, jitter_sweep, rotation_sweep

    _need(args, "input")
    cfg = _metric_config(args)
    cloud = load_cloud(args.input)
    metrics = tuple(m.strip() for m in args.metrics.split(",") if m.strip())
    if args.kind == "jitter":
        base = normalize_to_unit_sphere(cloud).points if args.normalize else cloud
        sigmas = default_sigmas(cloud_radius(base), args.levels or 20, args.min_sigma, args.max_sigma)
        result = jitter_sweep(cloud, sigmas, metrics, cfg, seed=args.seed, normalize_input=args.normalize)
    else:
        result = rotation_sweep(cloud, default_angles(args.levels or 25), metrics, cfg,
                                normalize_input=args.normalize)
    _write(out, "sweep.csv", result.to_csv(), outputs)
    _write(out, "sweep.json", _dump({**result.manifest(), "metric_config": cfg.to_dict()}), outputs)
    return 0

def cmd_upsample(args, out, outputs):
    from .optimize import OptimizationConfig, upsample

    _need(args, "input", "target")
    cfg = OptimizationConfig(loss=args.loss, iterations=args.iterations, step_size=args.step_size,
                             directions_per_step=args.directions_per_step, upsample_ratio=args.upsample_ratio,
                             init_jitter_sigma=args.init_jitter_sigma, seed=args.seed,
                             resample_directions=args.resample_directions, auction_epsilon=args.auction_epsilon,
                             threads=args.threads)
    trace = upsample(load_cloud(args.input), load_cloud(args.target), cfg)
    _write(out, "trace.csv", trace.to_csv(), outputs)
    write_xyz(out / "final.xyz", trace.final)
    outputs.append("final.xyz")
    _write(out, "upsample.json", _dump({"config": cfg.to_dict(), "final_loss": float(trace.losses[-1])}), outputs)
    return 0

def cmd_gradcheck(args, out, outputs):
    from .gradcheck import rows_to_csv, run_gradcheck

    rows = run_gradcheck(args.loss, args.n, args.dirs, args.seed, args.configs, args.h)
    if not rows:
        raise InvalidParameterError("every drawn configuration was tie-adjacent")
    _write(out, "gradcheck.csv", rows_to_csv(rows), outputs)
    worst = max(r.rel_error for r in rows)
    ok = worst < args.tol
    print(f"gradcheck loss={args.loss} configs={len(rows)} max_rel_error={worst:.3e} "
          f"tol={args.tol:g} {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1

COMMANDS = {
    "synth": cmd_synth,
    "rasterize": cmd_rasterize,
    "decimate": cmd_decimate,
    "patch": cmd_patch,
    "metrics": cmd_metrics,
    "sweep": cmd_sweep,
    "upsample": cmd_upsample,
    "gradcheck": cmd_gradcheck,
}

# --- dispatch ---------------------------------------------------------------

def _resolve(argv: list[str]) -> argparse.Namespace:
    args = build_parser().parse_args(argv)
    if args.command == "rerun":
        return args
    explicit = vars(build_parser(suppress=True).parse_args(argv))
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidParameterError(f"{args.config}: invalid JSON ({exc})") from exc
        for key, value in overrides.items():
            key = key.replace("-", "_")
            if not hasattr(args, key):
                raise InvalidParameterError(f"{args.config}: unknown option {key!r} for {args.command}")
            if key not in explicit:
                setattr(args, key, value)
    for key in _INPUT_KEYS:
        if getattr(args, key, None):
            setattr(args, key, str(Path(getattr(args, key)).resolve()))
    return args

def execute(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []
    t0 = time.perf_counter()
    status = COMMANDS[args.command](args, out, outputs)
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _LOCATION_KEYS}
    manifest = {
        "subcommand": args.command,
        "config": config,
        "inputs": {k: config[k] for k in _INPUT_KEYS if config.get(k)},
        "outputs": outputs,
        "seeds": {k: config[k] for k in ("seed", "swd_seed") if k in config},
        "tool_version": __version__,
        "wall_time": time.perf_counter() - t0,
    }
    (out / MANIFEST).write_text(_dump(manifest), encoding="utf-8")
    return status

def rerun(manifest_path: str, out: str | None = None) -> int:
    path = Path(manifest_path)
    data = json.loads(path.read_text(encoding="utf-8"))
    args = argparse.Namespace(**data["config"])
    args.command = data["subcommand"]
    args.config = None
    args.out = out if out is not None else str(path.parent)
    return execute(args)

def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _resolve(argv)
        if args.command == "rerun":
            return rerun(args.manifest, args.out)
        return execute(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (InvalidInputError, InvalidParameterError, CapacityError, ValueError) as exc:
        print(f"lidarswd: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"lidarswd: I/O error: {exc}", file=sys.stderr)
        return 2

if __name__ == "__main__":
    sys.exit(main())
