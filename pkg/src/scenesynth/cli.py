"""``scenesynth`` command line.

Exit codes: 0 success, 1 usage error, 2 data or generation error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone

from scenesynth import composer, manifest, metrics, preview
from scenesynth.config import ConfigError, EngineConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

log = logging.getLogger("scenesynth")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _resolution(text: str):
    try:
        w, h = text.lower().split("x")
        return [int(w), int(h)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"resolution must look like 224x224, got {text!r}") from exc


def _int_list(text: str):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _add_engine_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML config (default: $SCENESYNTH_CONFIG)")
    p.add_argument("--recipe", help="A, B, C or custom")
    p.add_argument("--total", type=int, help="number of scenes")
    p.add_argument("--fraction", dest="two_instrument_fraction", help="two-instrument fraction, e.g. 0.2 or 1/3")
    p.add_argument("--seeds-per-class", type=int)
    p.add_argument("--seed", dest="master_seed", type=int, help="master seed")
    p.add_argument("--resolution", type=_resolution, help="WxH, default 224x224")
    p.add_argument("--p", dest="pool_p", type=int, help="background pool size")
    p.add_argument("--q", dest="pool_q", type=int, help="foreground variants per seed")
    p.add_argument("--augmix", choices=["none", "soft", "hard"])
    p.add_argument("--n-chains", type=int)
    p.add_argument("--classes", type=_int_list, help="restrict scenes to these class ids, e.g. 9,10")


def _overrides(args) -> dict:
    ov = {
        k: getattr(args, k, None)
        for k in ("recipe", "total", "two_instrument_fraction", "seeds_per_class", "master_seed", "resolution", "classes")
    }
    pool = {k: v for k, v in (("p", args.pool_p), ("q_per_seed", args.pool_q)) if v is not None}
    if pool:
        ov["pool"] = pool
    am = {k: v for k, v in (("op_set", args.augmix), ("n_chains", args.n_chains)) if v is not None}
    if am:
        ov["augmix"] = am
    for k in ("out", "workers", "prefix"):
        if getattr(args, k, None) is not None:
            ov[k] = getattr(args, k)
    if getattr(args, "timestamp", False):
        ov["timestamp"] = True
    return ov


def _load(args) -> EngineConfig:
    try:
        return EngineConfig.load(args.config, _overrides(args))
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc


def _build(cfg: EngineConfig):
    rc = cfg.recipe()
    registry = cfg.registry()
    bg = composer.load_rgb(cfg.background_path())
    pools = composer.build_pools(
        registry, bg, rc.pool, rc.master_seed, resolution=rc.resolution, seeds_per_class=rc.seeds_per_class, ranges=rc.ranges
    )
    return rc, registry, pools


def _created(enabled: bool) -> str | None:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
    if enabled:
        return datetime.now(timezone.utc).isoformat()
    return None


def _prefix_scenes(prefix: str, out: str, rc, registry):
    """Scenes of an existing dataset reused as indices ``0..n-1``; returns ``(n, iterator)``."""
    if os.path.abspath(prefix) == os.path.abspath(out):
        raise UsageError("--prefix must differ from --out")
    header, records = manifest.read_manifest(prefix)
    if tuple(header["resolution"]) != tuple(rc.resolution):
        raise UsageError(f"prefix resolution {header['resolution']} differs from {list(rc.resolution)}")
    if len(records) > rc.total:
        raise UsageError(f"prefix has {len(records)} scenes, more than the requested total {rc.total}")
    names = {e["id"]: e["name"] for e in header["registry"]}
    for cid, name in names.items():
        if cid not in registry.ids or registry[cid].name != name:
            raise UsageError(f"prefix class {cid} ({name!r}) is not in the current registry")
    return len(records), manifest.read_dataset(prefix)


def cmd_generate(args) -> int:
    cfg = _load(args)
    workers = cfg.raw["workers"] or composer.default_workers()
    out = cfg.raw["out"]
    t0 = time.perf_counter()
    rc, registry, pools = _build(cfg)
    header = manifest.make_header(rc, registry, cfg.echo(), _created(cfg.raw["timestamp"]))
    start, head = 0, iter(())
    if cfg.raw["prefix"]:
        start, head = _prefix_scenes(cfg.raw["prefix"], out, rc, registry)
    scenes = itertools.chain(
        head, composer.generate(rc, registry, pools, workers=int(workers), indices=range(start, rc.total))
    )
    path = manifest.write_dataset(out, header, scenes)
    elapsed = time.perf_counter() - t0
    summary = {
        "out": out,
        "total": rc.total,
        "single": rc.n_single,
        "double": rc.n_double,
        "workers": int(workers),
        "reused_prefix": start,
        "seconds": round(elapsed, 3),
        "manifest_sha256": manifest.file_digest(path),
        "dataset_sha256": manifest.dataset_digest(out),
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_preview(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    cfg = _load(args)
    rc, registry, pools = _build(cfg)
    if args.n > rc.total:
        raise UsageError(f"--n {args.n} exceeds recipe total {rc.total}")
    scenes = [s for s, _ in composer.generate(rc, registry, pools, indices=range(args.n))]
    sheet = preview.contact_sheet(scenes)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    manifest.save_png(args.out, sheet)
    print(json.dumps({"out": args.out, "tiles": 2 * args.n}))
    return EXIT_OK


def cmd_validate(args) -> int:
    report = manifest.validate(args.dir)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK if report.ok else EXIT_DATA


def cmd_stats(args) -> int:
    st = manifest.stats(args.dir)
    print(json.dumps(st.to_dict(), indent=2))
    return EXIT_OK


def cmd_dsc(args) -> int:
    report = metrics.dsc_batch(args.pred, args.gt, pred_mode=args.pred_mode, threshold=args.threshold)
    print(json.dumps(report.to_dict(per_image=args.per_image), indent=2))
    return EXIT_OK


def cmd_demo_assets(args) -> int:
    from scenesynth.demo import make_demo_assets

    path = make_demo_assets(args.dir, seeds_per_class=args.seeds_per_class, seed=args.seed, n_classes=args.n_classes)
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scenesynth", description="Synthetic segmentation scenes from one background.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="generate a dataset")
    _add_engine_flags(g)
    g.add_argument("--out", help="output directory")
    g.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    g.add_argument("--timestamp", action="store_true", help="record wall-clock creation time in the manifest")
    g.add_argument("--prefix", help="existing dataset (e.g. recipe A) reused verbatim as the first scenes")
    g.set_defaults(func=cmd_generate)

    pv = sub.add_parser("preview", help="contact sheet of the first N scenes")
    _add_engine_flags(pv)
    pv.add_argument("--n", type=int, default=8)
    pv.add_argument("--out", default="preview.png")
    pv.set_defaults(func=cmd_preview)

    v = sub.add_parser("validate", help="check a generated dataset")
    v.add_argument("dir")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("stats", help="class and occupancy statistics")
    s.add_argument("dir")
    s.set_defaults(func=cmd_stats)

    d = sub.add_parser("dsc", help="Dice score of predictions against ground truth masks")
    d.add_argument("--pred", required=True)
    d.add_argument("--gt", required=True)
    d.add_argument("--per-image", action="store_true")
    d.add_argument("--pred-mode", choices=["prob", "label"], default="label", help="label: id > 0; prob: value >= threshold")
    d.add_argument("--threshold", type=int, default=128)
    d.set_defaults(func=cmd_dsc)

    da = sub.add_parser("demo-assets", help="write procedural seed assets and a config")
    da.add_argument("dir")
    da.add_argument("--seeds-per-class", type=int, default=3)
    da.add_argument("--n-classes", type=int, default=8)
    da.add_argument("--seed", type=int, default=0)
    da.set_defaults(func=cmd_demo_assets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"scenesynth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        composer.AssetError,
        composer.GenerationError,
        manifest.ManifestError,
        manifest.SceneWriteError,
        metrics.EvaluationError,
        ValueError,
        OSError,
    ) as exc:
        print(f"scenesynth: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
