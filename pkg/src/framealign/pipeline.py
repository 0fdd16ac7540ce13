"""Sequential frame synthesis with alignment and guidance windows.

The loop runs frames outermost, denoising steps innermost. Every frame
starts from one shared seeded normal draw. For frame i > 1, within the
alignment window the latent is overwritten along the cross-frame mapping
with frame i-1's latent at the same step, and within the guidance window
the step result takes a gradient correction that pulls the decoded
prediction toward frame i-1's at mapped pixels.

The data dependency is strictly on the previous frame at equal t, so the
orchestrator keeps one frame of history: latent snapshots (taken after the
alignment branch, i.e. the values that actually drove the step) for the
steps the next frame aligns at, and decoded pooled predictions for the
steps it guides at. ``retain="full"`` keeps every latent snapshot instead,
for inspection.

Cross-frame mappings depend only on the conditioning, not on t, so they are
computed once per consecutive pair and resolution up front.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng
from .alignment import StepWindow, align_latent, should_align
from .embedding import EmbeddingMap, downsample
from .guidance import (
    DecoderInterface,
    NoisePredictorInterface,
    Schedule,
    ddim_step,
    downsample_image,
    downsample_image_vjp,
    get_decoder,
    guidance_loss,
    guidance_pixel_grad,
    guided_update,
    latent_gradient,
    linear_schedule,
)
from .matching import Mapping, full_mapping
from .scene import ConditioningSequence


@dataclass(frozen=True)
class FrameConditioning:
    """Opaque per-frame blob handed to predictors: 1-based frame index,
    depth-like grid, and the pass-through text prompt."""

    frame_index: int
    depth: np.ndarray
    prompt: str = ""


class ZeroPredictor(NoisePredictorInterface):
    """Predicts no noise at all; the latent trajectory is purely the
    schedule's rescaling of the shared initial draw."""

    name = "zero"

    def __init__(self, seed: int = 0, scale: float = 1.0) -> None:
        del seed, scale

    def predict(self, latent, t, conditioning):
        return np.zeros_like(np.asarray(latent, dtype=np.float64))


class SeededNoisePredictor(NoisePredictorInterface):
    """Deterministic pseudo-noise keyed by (seed, frame, t)."""

    name = "seeded-noise"

    def __init__(self, seed: int = 0, scale: float = 1.0) -> None:
        self.seed = seed
        self.scale = scale

    def predict(self, latent, t, conditioning):
        latent = np.asarray(latent)
        return self.scale * rng.normal_field(
            self.seed,
            rng.STREAM_PREDICTOR,
            latent.shape,
            a=conditioning.frame_index,
            b=t,
        )


class ConditionedLinearPredictor(NoisePredictorInterface):
    """Prediction proportional to the conditioning depth grid, resampled to
    the latent grid and broadcast over channels. Moving the conditioning
    moves the perturbation with it, which reproduces conditioning-induced
    drift between frames."""

    name = "conditioned-linear"

    def __init__(self, seed: int = 0, scale: float = 0.4) -> None:
        del seed
        self.scale = scale

    def predict(self, latent, t, conditioning):
        latent = np.asarray(latent, dtype=np.float64)
        c, h, w = latent.shape
        depth = np.asarray(conditioning.depth, dtype=np.float64)
        sh, sw = depth.shape
        ri = np.clip(
            np.floor((np.arange(h) + 0.5) * (sh / h)).astype(np.int64), 0, sh - 1
        )
        ci = np.clip(
            np.floor((np.arange(w) + 0.5) * (sw / w)).astype(np.int64), 0, sw - 1
        )
        small = depth[np.ix_(ri, ci)]
        return np.broadcast_to(self.scale * small, (c, h, w)).copy()


PREDICTORS: dict[str, type[NoisePredictorInterface]] = {
    ZeroPredictor.name: ZeroPredictor,
    SeededNoisePredictor.name: SeededNoisePredictor,
    ConditionedLinearPredictor.name: ConditionedLinearPredictor,
}


def get_predictor(name: str, seed: int = 0, **kwargs) -> NoisePredictorInterface:
    if name not in PREDICTORS:
        raise ValueError(f"unknown predictor {name!r}; have {sorted(PREDICTORS)}")
    return PREDICTORS[name](seed=seed, **kwargs)


@dataclass(frozen=True)
class PipelineConfig:
    n_frames: int
    steps: int = 100
    delta: float = 0.01
    window_a: StepWindow | None = StepWindow(0, 39)
    window_b: StepWindow | None = StepWindow(20, 69)
    latent_channels: int = 3
    latent_hw: tuple[int, int] = (64, 64)
    image_hw: tuple[int, int] | None = None  # None: derived from the decoder
    guidance_hw: tuple[int, int] | None = None  # None: half the image dims
    seed: int = 0
    decoder: str = "identity"
    predictor: str = "zero"
    retain: str = "windows"

    def __post_init__(self) -> None:
        if self.n_frames < 1:
            raise ValueError("need at least one frame")
        if self.steps < 1:
            raise ValueError("need at least one step")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        for name, win in (("window_a", self.window_a), ("window_b", self.window_b)):
            if win is not None and win.hi >= self.steps:
                raise ValueError(f"{name} {win} exceeds the last progress index")
        if self.latent_channels < 1 or min(self.latent_hw) < 1:
            raise ValueError("latent dims must be positive")
        if self.retain not in ("windows", "full"):
            raise ValueError(f"retain must be 'windows' or 'full', got {self.retain}")

    def to_dict(self) -> dict:
        win = lambda w: None if w is None else [w.lo, w.hi]
        return {
            "n_frames": self.n_frames,
            "steps": self.steps,
            "delta": self.delta,
            "window_a": win(self.window_a),
            "window_b": win(self.window_b),
            "latent_channels": self.latent_channels,
            "latent_hw": list(self.latent_hw),
            "image_hw": None if self.image_hw is None else list(self.image_hw),
            "guidance_hw": None if self.guidance_hw is None else list(self.guidance_hw),
            "seed": self.seed,
            "decoder": self.decoder,
            "predictor": self.predictor,
            "retain": self.retain,
        }


@dataclass(frozen=True)
class TraceEvent:
    frame: int  # 1-based
    t: int
    progress: int
    kind: str  # "align" | "guide"
    omega: float | None = None


@dataclass
class PipelineTrace:
    events: list[TraceEvent] = field(default_factory=list)
    init_latent_sha: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def count(self, kind: str, frame: int | None = None) -> int:
        return sum(
            1
            for e in self.events
            if e.kind == kind and (frame is None or e.frame == frame)
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": self.config,
                "init_latent_sha": self.init_latent_sha,
                "events": [
                    {
                        "frame": e.frame,
                        "t": e.t,
                        "progress": e.progress,
                        "kind": e.kind,
                        **({"omega": e.omega} if e.omega is not None else {}),
                    }
                    for e in self.events
                ],
            },
            indent=2,
        )


def pair_mappings(
    embeddings: tuple[EmbeddingMap, ...], hw: tuple[int, int]
) -> list[Mapping]:
    """Mappings between consecutive frames at the given resolution; entry k
    maps frame k+1 (q side) onto frame k (s side), 0-based."""
    small = [downsample(e, hw[1], hw[0]) for e in embeddings]
    return [full_mapping(small[k + 1], small[k]) for k in range(len(small) - 1)]


def run_pipeline(
    cfg: PipelineConfig,
    cond: ConditioningSequence,
    predictor: NoisePredictorInterface,
    decoder: DecoderInterface,
    schedule: Schedule | None = None,
) -> tuple[list[np.ndarray], PipelineTrace]:
    """Synthesize all frames; returns decoded images and the event trace."""
    n, steps = cfg.n_frames, cfg.steps
    if cond.n_frames != n:
        raise ValueError(f"conditioning has {cond.n_frames} frames, config {n}")
    sched = schedule if schedule is not None else linear_schedule(steps)
    if sched.steps != steps:
        raise ValueError(f"schedule has {sched.steps} steps, config {steps}")

    lh, lw = cfg.latent_hw
    image_hw = decoder.output_hw((lh, lw))
    if cfg.image_hw is not None and tuple(cfg.image_hw) != tuple(image_hw):
        raise ValueError(
            f"decoder {decoder.name!r} yields {image_hw} images for "
            f"{cfg.latent_hw} latents, config says {cfg.image_hw}"
        )
    ghw = cfg.guidance_hw
    if ghw is None:
        ghw = (max(1, image_hw[0] // 2), max(1, image_hw[1] // 2))
    if image_hw[0] % ghw[0] or image_hw[1] % ghw[1]:
        raise ValueError(f"guidance dims {ghw} must divide image dims {image_hw}")

    src_hw = cond.embeddings[0].labels.shape
    for tgt in (cfg.latent_hw, ghw):
        if tgt[0] > src_hw[0] or tgt[1] > src_hw[1]:
            raise ValueError(
                f"conditioning grids {src_hw} are smaller than target {tgt}"
            )

    need_align = cfg.window_a is not None and n > 1
    need_guide = cfg.window_b is not None and n > 1
    maps_latent = pair_mappings(cond.embeddings, cfg.latent_hw) if need_align else []
    maps_guide = pair_mappings(cond.embeddings, ghw) if need_guide else []

    trace = PipelineTrace(config=cfg.to_dict())
    x_init = rng.normal_field(
        cfg.seed, rng.STREAM_INIT_LATENT, (cfg.latent_channels, lh, lw)
    )

    frames: list[np.ndarray] = []
    prev_latents: dict[int, np.ndarray] = {}
    prev_decoded: dict[int, np.ndarray] = {}
    for i in range(1, n + 1):
        x = x_init.copy()
        trace.init_latent_sha.append(hashlib.sha256(x.tobytes()).hexdigest())
        fc = FrameConditioning(
            frame_index=i, depth=cond.depths[i - 1], prompt=cond.prompt
        )
        cur_latents: dict[int, np.ndarray] = {}
        cur_decoded: dict[int, np.ndarray] = {}
        for t in range(steps, 0, -1):
            p = steps - t
            if should_align(p, cfg.window_a, i):
                x = align_latent(x, prev_latents[t], maps_latent[i - 2])
                trace.events.append(TraceEvent(frame=i, t=t, progress=p, kind="align"))
            store_latent = cfg.retain == "full" or (
                i < n and cfg.window_a is not None and p in cfg.window_a
            )
            if store_latent:
                cur_latents[t] = x.copy()

            eps = predictor.predict(x, t, fc)
            noise = None
            if sched.sigma[t - 1] > 0:
                noise = rng.normal_field(
                    cfg.seed, rng.STREAM_STEP_NOISE, x.shape, a=i, b=t
                )
            x_next, x0_hat = ddim_step(x, eps, sched, t, noise)

            guide_now = should_align(p, cfg.window_b, i)
            store_decoded = i < n and cfg.window_b is not None and p in cfg.window_b
            if guide_now or store_decoded:
                ds = downsample_image(decoder.forward(x0_hat), ghw[1], ghw[0])
                if guide_now:
                    m = maps_guide[i - 2]
                    omega = guidance_loss(ds, prev_decoded[t], m)
                    pg = guidance_pixel_grad(ds, prev_decoded[t], m)
                    pg_full = downsample_image_vjp(pg, image_hw[0], image_hw[1])
                    grad = latent_gradient(decoder, sched, t, pg_full, x0_hat=x0_hat)
                    x_next = guided_update(x_next, grad, cfg.delta)
                    trace.events.append(
                        TraceEvent(frame=i, t=t, progress=p, kind="guide", omega=omega)
                    )
                if store_decoded:
                    cur_decoded[t] = ds
            x = x_next
        frames.append(decoder.forward(x))
        prev_latents, prev_decoded = cur_latents, cur_decoded
    return frames, trace
