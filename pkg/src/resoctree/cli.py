"""Command-line interface.

Subcommands: ingest, serve, render, bench, verify, viewer-serve.
Options may come from a JSON config file (--config); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import datasets
from .camera import orbit_pose
from .engine import EngineConfig
from .ingest import build_hierarchy, load_raw_file
from .render import ChannelSettings, RenderConfig
from .transfer import TransferFunction, grayscale_ramp_tf
from .verify import verify_dataset, verify_structures


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _opt(args, name: str, cfg: dict, default):
    v = getattr(args, name, None)
    if v is not None:
        return v
    return cfg.get(name, default)


def _parse_tf(spec) -> TransferFunction:
    if spec is None:
        return grayscale_ramp_tf(threshold=1.0)
    if isinstance(spec, str):
        spec = json.loads(spec)
    return TransferFunction(points=tuple(
        (float(x), tuple(float(v) for v in rgba)) for x, rgba in spec))


def cmd_ingest(args) -> int:
    cfg = _load_config(args.config)
    brick = int(_opt(args, "brick_size", cfg, 32))
    levels = int(_opt(args, "levels", cfg, 4))
    out = Path(_opt(args, "out", cfg, "dataset"))
    if args.synthetic:
        n = int(_opt(args, "dims", cfg, 256))
        chans = [datasets.make(name, n) for name in args.synthetic.split(",")]
        name = args.synthetic
        dtype = "u8"
    else:
        if not args.input or not args.dims:
            print("ingest: need --input and --dims (or --synthetic)",
                  file=sys.stderr)
            return 2
        dims = tuple(int(v) for v in str(args.dims).split(","))
        if len(dims) == 1:
            dims = dims * 3
        chans = load_raw_file(args.input, dims, args.dtype,
                              int(args.channels or 1))
        name = Path(args.input).stem
        dtype = args.dtype
    man = build_hierarchy(chans, (brick, brick, brick), levels, (2, 2, 2),
                          str(out), name=name, dtype_original=dtype)
    print(f"ingested {man.channel_count} channel(s), "
          f"{len(man.levels)} level(s) -> {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import DatasetStore, create_app
    store = DatasetStore(args.data)
    app = create_app(store, metadata_enabled=not args.plain)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _channels_from_args(args, cfg: dict) -> list[ChannelSettings]:
    spec = cfg.get("channels")
    if spec:
        return [ChannelSettings(slot=int(c.get("slot", i)),
                                tf=_parse_tf(c.get("tf")),
                                level_range=tuple(c.get("levelRange", (0, 15))))
                for i, c in enumerate(spec)]
    return [ChannelSettings(slot=0, tf=_parse_tf(args.tf))]


def _render_config(args, cfg: dict) -> RenderConfig:
    size = int(_opt(args, "size", cfg, 256))
    return RenderConfig(
        image_dims=(size, size),
        base_step=float(_opt(args, "base_step", cfg, 1.0 / 256.0)),
        max_requests_per_frame=int(_opt(args, "max_requests", cfg, 256)))


def cmd_render(args) -> int:
    from .service import DatasetStore, LocalTransport
    from .session import Session, image_to_png_bytes

    cfg = _load_config(args.config)
    store = DatasetStore(args.data)
    k = len(store.manifest.levels)
    econf = EngineConfig(octree_depth=int(_opt(args, "depth", cfg, 3)),
                         cache_slots=tuple(cfg.get("cacheSlots", (8, 8, 8))),
                         channel_slots=int(cfg.get("channelSlots", 4)))
    channels = _channels_from_args(args, cfg)
    session = Session(LocalTransport(store), econf, _render_config(args, cfg),
                      channels)
    cam = orbit_pose(float(args.angle))
    recs = session.run_until_converged(cam, max_frames=int(args.max_frames))
    Path(args.out).write_bytes(image_to_png_bytes(recs[-1].output.image))
    print(f"{len(recs)} frame(s), converged={session.converged} -> {args.out}")
    session.close()
    return 0


def cmd_bench(args) -> int:
    from .service import DatasetStore

    cfg = _load_config(args.config)
    store = DatasetStore(args.data)
    channels = _channels_from_args(args, cfg)
    slots = {c.slot: cfg.get("slotChannels", {}).get(str(c.slot), c.slot)
             for c in channels}
    for slot in slots:
        slots[slot] = min(slots[slot], store.manifest.channel_count - 1)
    m = max(slots) + 1
    econf = bench_mod.full_engine_config(store, m,
                                         int(_opt(args, "depth", cfg, 3)))
    methods = tuple(args.methods.split(","))
    rows = bench_mod.run_orbit(store, channels, slots,
                               _render_config(args, cfg), econf,
                               num_frames=int(args.frames), methods=methods)
    if args.out:
        bench_mod.write_csv(rows, args.out)
        print(f"wrote {len(rows)} rows -> {args.out}")
    for method, summary in bench_mod.summarize(rows).items():
        print(f"{method}: " + ", ".join(f"{k}={v:.1f}"
                                        for k, v in summary.items()))
    return 0


def cmd_verify(args) -> int:
    report = verify_dataset(args.data)
    if report.ok and not args.quick:
        report.checks += verify_structures(args.data,
                                           steps=int(args.steps)).checks
    print(report.render())
    return 0 if report.ok else 1


def cmd_viewer_serve(args) -> int:
    import uvicorn

    from .viewer_service import create_viewer_app
    app = create_viewer_app(args.data, static_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resoctree",
                                description="out-of-core multi-volume renderer")
    p.add_argument("--config", help="JSON config file; flags override it")
    sub = p.add_subparsers(dest="command", required=True)

    pi = sub.add_parser("ingest", help="build a bricked multi-resolution dataset")
    pi.add_argument("--input", help="raw voxel file")
    pi.add_argument("--dims", help="x,y,z (or one cube side)")
    pi.add_argument("--dtype", default="u8", choices=["u8", "u16", "u32", "f32"])
    pi.add_argument("--channels", type=int, default=1)
    pi.add_argument("--synthetic", help="comma-separated synthetic volume names")
    pi.add_argument("--brick-size", dest="brick_size", type=int)
    pi.add_argument("--levels", type=int)
    pi.add_argument("--out")
    pi.set_defaults(fn=cmd_ingest)

    ps = sub.add_parser("serve", help="serve bricks over HTTP")
    ps.add_argument("--data", required=True)
    ps.add_argument("--host", default="127.0.0.1")
    ps.add_argument("--port", type=int, default=8077)
    ps.add_argument("--plain", action="store_true",
                    help="plain file mode: no metadata endpoint")
    ps.set_defaults(fn=cmd_serve)

    pr = sub.add_parser("render", help="render one converged frame to PNG")
    pr.add_argument("--data", required=True)
    pr.add_argument("--out", default="frame.png")
    pr.add_argument("--angle", default="0.6", help="orbit angle, radians")
    pr.add_argument("--size", type=int)
    pr.add_argument("--base-step", dest="base_step", type=float)
    pr.add_argument("--max-requests", dest="max_requests", type=int)
    pr.add_argument("--max-frames", dest="max_frames", default="50")
    pr.add_argument("--depth", type=int)
    pr.add_argument("--tf", help="transfer function JSON")
    pr.set_defaults(fn=cmd_render)

    pb = sub.add_parser("bench", help="orbit benchmark across methods")
    pb.add_argument("--data", required=True)
    pb.add_argument("--out", help="CSV output path")
    pb.add_argument("--frames", default="36")
    pb.add_argument("--methods", default="residency,classic,pagetable")
    pb.add_argument("--size", type=int)
    pb.add_argument("--base-step", dest="base_step", type=float)
    pb.add_argument("--depth", type=int)
    pb.add_argument("--tf", help="transfer function JSON")
    pb.set_defaults(fn=cmd_bench)

    pv = sub.add_parser("verify", help="check dataset and invariants")
    pv.add_argument("--data", required=True)
    pv.add_argument("--quick", action="store_true")
    pv.add_argument("--steps", default="2000")
    pv.set_defaults(fn=cmd_verify)

    pw = sub.add_parser("viewer-serve", help="WebSocket session + static viewer")
    pw.add_argument("--data", required=True)
    pw.add_argument("--host", default="127.0.0.1")
    pw.add_argument("--port", type=int, default=8078)
    pw.add_argument("--frontend", help="built viewer assets directory")
    pw.set_defaults(fn=cmd_viewer_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
