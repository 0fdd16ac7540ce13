"""Command-line interface.

Subcommands: synth, match, align, guide, hmse, viz, pipeline, bench-lap.
Tensors travel in the CTF container; images may additionally be read and
written as binary PPM (P6).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .alignment import StepWindow, align_latent
from .embedding import EmbeddingMap, downsample
from .guidance import (
    Schedule,
    get_decoder,
    guidance_loss,
    guidance_pixel_grad,
    linear_schedule,
)
from .matching import Mapping, bench_lap, full_mapping
from .metrics import hmse
from .pipeline import PipelineConfig, get_predictor, pair_mappings, run_pipeline
from .scene import SyntheticSceneSpec, synth_scene, two_part_character
from .tensorio import read_ppm, read_tensor, write_ppm, write_tensor
from .viz import viz_mapping


def _load_embedding(prefix: str, size: tuple[int, int] | None) -> EmbeddingMap:
    emb = EmbeddingMap(
        labels=read_tensor(f"{prefix}_labels.ctf").astype(np.int64),
        u_coords=read_tensor(f"{prefix}_u.ctf").astype(np.int64),
        v_coords=read_tensor(f"{prefix}_v.ctf").astype(np.int64),
    )
    if size is not None:
        emb = downsample(emb, size[1], size[0])
    return emb


def _save_embedding(prefix: Path, emb: EmbeddingMap) -> None:
    write_tensor(f"{prefix}_labels.ctf", emb.labels.astype(np.int32))
    write_tensor(f"{prefix}_u.ctf", emb.u_coords.astype(np.int32))
    write_tensor(f"{prefix}_v.ctf", emb.v_coords.astype(np.int32))


def _load_mapping(path: str) -> Mapping:
    return Mapping(read_tensor(path).astype(np.int64))


def _save_mapping(path: str, m: Mapping) -> None:
    write_tensor(path, m.pairs.astype(np.int32))


def _load_image(path: str) -> np.ndarray:
    if path.endswith(".ppm"):
        return read_ppm(path).astype(np.float64) / 255.0
    return read_tensor(path).astype(np.float64)


def _parse_window(text: str) -> StepWindow | None:
    if text.lower() == "none":
        return None
    lo, hi = text.split(":")
    return StepWindow(int(lo), int(hi))


def _scene_from_args(args) -> SyntheticSceneSpec:
    if args.scene:
        spec = SyntheticSceneSpec.load(args.scene)
        if args.frames is not None and args.frames != spec.n_frames:
            raise ValueError(
                f"--frames {args.frames} contradicts scene with {spec.n_frames} frames"
            )
        return spec
    return two_part_character(
        canvas=tuple(args.canvas),
        n_frames=args.frames if args.frames is not None else 3,
        velocity=tuple(args.velocity),
        seed=args.seed,
    )


def _cmd_synth(args) -> int:
    spec = _scene_from_args(args)
    cond = synth_scene(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scene.json").write_text(spec.to_json())
    for k, (emb, depth) in enumerate(zip(cond.embeddings, cond.depths)):
        prefix = out / f"frame_{k:03d}"
        _save_embedding(prefix, emb)
        write_tensor(f"{prefix}_depth.ctf", depth)
    print(f"wrote {cond.n_frames} frames of conditioning to {out}")
    return 0


def _cmd_match(args) -> int:
    size = tuple(args.size) if args.size else None
    emb_cur = _load_embedding(args.cur, size)
    emb_prev = _load_embedding(args.prev, size)
    m = full_mapping(emb_cur, emb_prev)
    _save_mapping(args.out, m)
    print(f"matched {len(m)} pixel pairs -> {args.out}")
    return 0


def _cmd_align(args) -> int:
    x_cur = read_tensor(args.cur).astype(np.float64)
    x_prev = read_tensor(args.prev).astype(np.float64)
    m = _load_mapping(args.mapping)
    write_tensor(args.out, align_latent(x_cur, x_prev, m))
    print(f"aligned {len(m)} latent sites -> {args.out}")
    return 0


def _cmd_guide(args) -> int:
    cur = _load_image(args.cur)
    prev = _load_image(args.prev)
    m = _load_mapping(args.mapping)
    omega = guidance_loss(cur, prev, m)
    grad = guidance_pixel_grad(cur, prev, m)
    write_tensor(args.out_grad, grad)
    print(f"omega= {omega:.17g}")
    print(f"delta= {args.delta:.17g}")
    print(f"pixel gradient -> {args.out_grad}")
    return 0


def _cmd_hmse(args) -> int:
    frames = [_load_image(p) for p in args.frames]
    mappings = [_load_mapping(p) for p in args.mappings]
    report = hmse(frames, mappings)
    for frame_idx, pairs, mse in report.per_pair:
        print(f"pair frame={frame_idx} pairs={pairs} mse= {mse:.17g}")
    print(f"h_mse= {report.h_mse:.17g}")
    if args.report:
        Path(args.report).write_text(
            json.dumps(
                {
                    "h_mse": report.h_mse,
                    "per_pair": [
                        {"frame": f, "pairs": p, "mse": m}
                        for f, p, m in report.per_pair
                    ],
                },
                indent=2,
            )
        )
    return 0


def _cmd_viz(args) -> int:
    size = tuple(args.size) if args.size else None
    emb_cur = _load_embedding(args.cur, size)
    emb_prev = _load_embedding(args.prev, size)
    m = _load_mapping(args.mapping)
    viz_mapping(emb_cur, emb_prev, m, args.out)
    print(f"correspondence panes -> {args.out}")
    return 0


def _load_schedule(args, steps: int) -> Schedule | None:
    if not args.schedule_alpha:
        return None
    alpha = read_tensor(args.schedule_alpha).astype(np.float64)
    if args.schedule_sigma:
        sigma = read_tensor(args.schedule_sigma).astype(np.float64)
    else:
        sigma = np.zeros(len(alpha) - 1)
    sched = Schedule(alpha=alpha, sigma=sigma)
    if sched.steps != steps:
        raise ValueError(f"schedule has {sched.steps} steps, run wants {steps}")
    return sched


def _cmd_pipeline(args) -> int:
    spec = _scene_from_args(args)
    cond = synth_scene(spec)
    cfg = PipelineConfig(
        n_frames=spec.n_frames,
        steps=args.steps,
        delta=args.delta,
        window_a=_parse_window(args.window_a),
        window_b=_parse_window(args.window_b),
        latent_hw=tuple(args.latent),
        guidance_hw=tuple(args.guidance) if args.guidance else None,
        seed=args.seed,
        decoder=args.decoder,
        predictor=args.predictor,
    )
    decoder = get_decoder(cfg.decoder)
    predictor = get_predictor(cfg.predictor, seed=cfg.seed)
    frames, trace = run_pipeline(
        cfg, cond, predictor, decoder, schedule=_load_schedule(args, args.steps)
    )

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, img in enumerate(frames):
        write_tensor(out / f"frame_{k:03d}.ctf", img)
        write_ppm(out / f"frame_{k:03d}.ppm", img)
    (out / "trace.json").write_text(trace.to_json())
    print(
        f"{len(frames)} frames -> {out} "
        f"(align events: {trace.count('align')}, guide events: {trace.count('guide')})"
    )

    image_hw = frames[0].shape[1:]
    src_hw = cond.embeddings[0].labels.shape
    if len(frames) > 1 and src_hw[0] >= image_hw[0] and src_hw[1] >= image_hw[1]:
        maps = pair_mappings(cond.embeddings, image_hw)
        report = hmse(frames, maps)
        (out / "metrics.json").write_text(
            json.dumps({"h_mse": report.h_mse}, indent=2)
        )
        print(f"h_mse= {report.h_mse:.17g}")
    return 0


def _cmd_bench_lap(args) -> int:
    res = bench_lap(sizes=tuple(args.sizes), seed=args.seed)
    for n, t in zip(res.sizes, res.seconds):
        print(f"n= {n:6d} time= {t:.6f} s")
    print(f"slope= {res.slope:.4f}")
    return 0


def _add_scene_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scene", help="scene spec JSON (overrides the default scene)")
    p.add_argument("--frames", type=int, default=None, help="number of frames")
    p.add_argument("--canvas", type=int, nargs=2, default=[64, 64], metavar=("H", "W"))
    p.add_argument(
        "--velocity", type=int, nargs=2, default=[0, 2], metavar=("DY", "DX")
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="framealign",
        description="cross-frame correspondence, latent alignment, and "
        "temporal-consistency tooling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic scene to conditioning files")
    _add_scene_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("match", help="dense correspondence between two frames")
    p.add_argument("--cur", required=True, help="embedding file prefix for frame i")
    p.add_argument("--prev", required=True, help="embedding file prefix for frame i-1")
    p.add_argument("--size", type=int, nargs=2, metavar=("H", "W"))
    p.add_argument("--out", required=True, help="mapping tensor output")
    p.set_defaults(fn=_cmd_match)

    p = sub.add_parser("align", help="copy latent values along a mapping")
    p.add_argument("--cur", required=True)
    p.add_argument("--prev", required=True)
    p.add_argument("--mapping", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_align)

    p = sub.add_parser("guide", help="pixel-wise guidance loss and gradient")
    p.add_argument("--cur", required=True)
    p.add_argument("--prev", required=True)
    p.add_argument("--mapping", required=True)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--out-grad", required=True)
    p.set_defaults(fn=_cmd_guide)

    p = sub.add_parser("hmse", help="temporal-consistency metric over frames")
    p.add_argument("--frames", nargs="+", required=True)
    p.add_argument("--mappings", nargs="+", required=True)
    p.add_argument("--report", help="optional JSON report path")
    p.set_defaults(fn=_cmd_hmse)

    p = sub.add_parser("viz", help="render correspondence panes to PPM")
    p.add_argument("--cur", required=True)
    p.add_argument("--prev", required=True)
    p.add_argument("--mapping", required=True)
    p.add_argument("--size", type=int, nargs=2, metavar=("H", "W"))
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_viz)

    p = sub.add_parser("pipeline", help="full sequential synthesis run")
    _add_scene_flags(p)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--window-a", default="0:39", help="lo:hi or 'none'")
    p.add_argument("--window-b", default="20:69", help="lo:hi or 'none'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--latent", type=int, nargs=2, default=[64, 64], metavar=("H", "W"))
    p.add_argument("--guidance", type=int, nargs=2, metavar=("H", "W"))
    p.add_argument("--decoder", default="identity", choices=["identity", "linear2x"])
    p.add_argument(
        "--predictor",
        default="conditioned-linear",
        choices=["zero", "seeded-noise", "conditioned-linear"],
    )
    p.add_argument("--schedule-alpha", help="CTF tensor of T+1 alpha values")
    p.add_argument("--schedule-sigma", help="CTF tensor of T sigma values")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_pipeline)

    p = sub.add_parser("bench-lap", help="assignment-solver scaling measurement")
    p.add_argument(
        "--sizes", type=int, nargs="+", default=[128, 256, 512, 1024]
    )
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_bench_lap)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
