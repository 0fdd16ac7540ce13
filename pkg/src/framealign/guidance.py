"""DDIM stepping and pixel-wise guidance.

One denoising step splits into the noise-free prediction

    x0_hat = (x_t - sqrt(1 - alpha_t) * eps_hat) / sqrt(alpha_t)

and the transition

    x_prev = sqrt(alpha_prev) * x0_hat
             + sqrt(1 - alpha_prev - sigma_t^2) * eps_hat
             + sigma_t * noise.

Guidance compares the decoded prediction of the current frame against the
previous frame's at mapped pixel pairs, sums squared differences over all
color channels, and descends the latent along the gradient of that loss.
The gradient treats the noise prediction as constant, so the chain through
the noise-free prediction contributes a plain 1/sqrt(alpha_t) factor; a
predictor-VJP hook can replace this if back-propagation through the noise
model ever becomes available.

Images are (3, height, width) float arrays in [0, 1]; decoders clamp their
output into that range. Everything here is pure and thread-safe as long as
decoder implementations are.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .alignment import validate_latent
from .matching import Mapping


@dataclass(frozen=True)
class Schedule:
    """DDIM scheduling arrays: ``alpha`` has T+1 entries (index 0 is the
    cleanest step), ``sigma`` has T entries for steps 1..T."""

    alpha: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        a, s = np.asarray(self.alpha, float), np.asarray(self.sigma, float)
        if a.ndim != 1 or s.ndim != 1 or len(a) != len(s) + 1 or len(s) < 1:
            raise ValueError(
                f"need len(alpha) == len(sigma) + 1 >= 2, got {len(a)} and {len(s)}"
            )
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(s)):
            raise ValueError("schedule entries must be finite")
        if a.min() <= 0 or a.max() > 1:
            raise ValueError("alpha values must lie in (0, 1]")
        if np.any(np.diff(a) > 0):
            raise ValueError("alpha must be non-increasing in t")
        if s.min() < 0:
            raise ValueError("sigma values must be non-negative")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "sigma", s)

    @property
    def steps(self) -> int:
        return len(self.sigma)


def linear_schedule(
    steps: int,
    beta_start: float = 8.5e-4,
    beta_end: float = 1.2e-2,
    eta: float = 0.0,
) -> Schedule:
    """Default schedule: alpha_t is the cumulative product of (1 - beta_t)
    with beta linearly spaced; eta > 0 yields the stochastic-DDIM sigmas."""
    if steps < 1:
        raise ValueError("need at least one step")
    beta = np.linspace(beta_start, beta_end, steps)
    alpha = np.concatenate(([1.0], np.cumprod(1.0 - beta)))
    if eta == 0.0:
        sigma = np.zeros(steps)
    else:
        a_t, a_prev = alpha[1:], alpha[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            sigma = eta * np.sqrt((1 - a_prev) / (1 - a_t)) * np.sqrt(1 - a_t / a_prev)
        sigma = np.nan_to_num(sigma, nan=0.0)
    return Schedule(alpha=alpha, sigma=sigma)


def ddim_step(
    x_t: np.ndarray,
    eps_hat: np.ndarray,
    sched: Schedule,
    t: int,
    noise: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One reverse step at time ``t`` (1 <= t <= T).

    Returns (x_prev, x0_hat). ``noise`` is only consumed when sigma_t > 0.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if x_t.shape != eps_hat.shape:
        raise ValueError(f"shape mismatch: x_t {x_t.shape} vs eps_hat {eps_hat.shape}")
    if not 1 <= t <= sched.steps:
        raise ValueError(f"step index {t} outside [1, {sched.steps}]")
    a_t = float(sched.alpha[t])
    a_prev = float(sched.alpha[t - 1])
    s_t = float(sched.sigma[t - 1])
    radicand = 1.0 - a_prev - s_t * s_t
    if radicand < 0:
        raise ValueError(
            f"sigma[{t}] = {s_t} too large: 1 - alpha[{t - 1}] - sigma^2 < 0"
        )
    x0_hat = (x_t - math.sqrt(1.0 - a_t) * eps_hat) / math.sqrt(a_t)
    x_prev = math.sqrt(a_prev) * x0_hat + math.sqrt(radicand) * eps_hat
    if s_t > 0:
        if noise is None:
            raise ValueError("sigma_t > 0 requires a noise tensor")
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != x_t.shape:
            raise ValueError(f"noise shape {noise.shape} != latent {x_t.shape}")
        x_prev = x_prev + s_t * noise
    return x_prev, x0_hat


def validate_image(img: np.ndarray, name: str = "image") -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[0] != 3 or min(img.shape[1:]) <= 0:
        raise ValueError(f"{name} must be (3, height, width), got {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError(f"{name} contains non-finite values")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return np.asarray(img, dtype=np.float64)


def _mapped_diff(
    cur: np.ndarray, prev: np.ndarray, m: Mapping
) -> tuple[np.ndarray, np.ndarray]:
    cur = validate_image(cur, "current image")
    prev = validate_image(prev, "previous image")
    if cur.shape != prev.shape:
        raise ValueError(f"image shapes differ: {cur.shape} vs {prev.shape}")
    if len(m) == 0:
        return cur, np.zeros((3, 0))
    h, w = cur.shape[1:]
    coords = m.pairs[:, :4]
    if (
        coords.min() < 0
        or coords[:, [0, 2]].max() >= h
        or coords[:, [1, 3]].max() >= w
    ):
        raise ValueError(f"mapping coordinates fall outside the {h}x{w} image")
    p = m.pairs
    return cur, cur[:, p[:, 0], p[:, 1]] - prev[:, p[:, 2], p[:, 3]]


def guidance_loss(x_img_cur: np.ndarray, x_img_prev: np.ndarray, m: Mapping) -> float:
    """Sum of squared per-channel differences over all mapped pixel pairs."""
    _, diff = _mapped_diff(x_img_cur, x_img_prev, m)
    return float(np.sum(diff * diff))


def guidance_pixel_grad(
    x_img_cur: np.ndarray, x_img_prev: np.ndarray, m: Mapping
) -> np.ndarray:
    """Gradient of :func:`guidance_loss` in the current image; the previous
    frame is treated as constant. Support is exactly the mapped q pixels."""
    cur, diff = _mapped_diff(x_img_cur, x_img_prev, m)
    grad = np.zeros_like(cur)
    if len(m):
        grad[:, m.pairs[:, 0], m.pairs[:, 1]] = 2.0 * diff
    return grad


def downsample_image(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Block-mean pooling per channel; source dims must divide evenly."""
    img = validate_image(img)
    h, w = img.shape[1:]
    if out_h <= 0 or out_w <= 0 or h % out_h or w % out_w:
        raise ValueError(f"cannot pool {h}x{w} image into {out_h}x{out_w} blocks")
    fh, fw = h // out_h, w // out_w
    return img.reshape(3, out_h, fh, out_w, fw).mean(axis=(2, 4))


def downsample_image_vjp(cotangent: np.ndarray, src_h: int, src_w: int) -> np.ndarray:
    """Adjoint of :func:`downsample_image`: spread each block's cotangent
    uniformly over the block, scaled by 1/(block area)."""
    g = np.asarray(cotangent, dtype=np.float64)
    if g.ndim != 3 or g.shape[0] != 3:
        raise ValueError(f"cotangent must be (3, h, w), got {g.shape}")
    oh, ow = g.shape[1:]
    if src_h % oh or src_w % ow:
        raise ValueError(f"{src_h}x{src_w} is not a block multiple of {oh}x{ow}")
    fh, fw = src_h // oh, src_w // ow
    spread = np.repeat(np.repeat(g, fh, axis=1), fw, axis=2)
    return spread / (fh * fw)


class DecoderInterface(ABC):
    """Latent-to-image decoder with an exact adjoint of its linearization.

    ``vjp`` receives the latent at which ``forward`` was evaluated so that
    the output clamp can be differentiated; passing ``None`` asserts that no
    value was clamped (pure linear regime).
    """

    name: str = "?"

    @abstractmethod
    def forward(self, latent: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def vjp(self, latent: np.ndarray | None, cotangent: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def output_hw(self, latent_hw: tuple[int, int]) -> tuple[int, int]: ...


def _check_decoder_latent(latent: np.ndarray) -> np.ndarray:
    latent = validate_latent(latent)
    if latent.shape[0] != 3:
        raise ValueError(
            f"bundled toy decoders require 3 latent channels, got {latent.shape[0]}"
        )
    return np.asarray(latent, dtype=np.float64)


class IdentityDecoder(DecoderInterface):
    """Treats the 3-channel latent directly as an RGB image (then clamps)."""

    name = "identity"

    def forward(self, latent: np.ndarray) -> np.ndarray:
        return np.clip(_check_decoder_latent(latent), 0.0, 1.0)

    def vjp(self, latent: np.ndarray | None, cotangent: np.ndarray) -> np.ndarray:
        g = np.asarray(cotangent, dtype=np.float64)
        if latent is None:
            return g.copy()
        latent = _check_decoder_latent(latent)
        if latent.shape != g.shape:
            raise ValueError(f"cotangent {g.shape} != latent {latent.shape}")
        return g * ((latent > 0.0) & (latent < 1.0))

    def output_hw(self, latent_hw: tuple[int, int]) -> tuple[int, int]:
        return latent_hw


def _upsample_weights(n: int) -> np.ndarray:
    # 2x linear upsampling, output centers at k/2 - 0.25 with edge clamping
    w = np.zeros((2 * n, n))
    for k in range(n):
        w[2 * k, k] += 0.75
        w[2 * k, max(k - 1, 0)] += 0.25
        w[2 * k + 1, k] += 0.75
        w[2 * k + 1, min(k + 1, n - 1)] += 0.25
    return w


class Linear2xDecoder(DecoderInterface):
    """Fixed 2x separable linear upsampler followed by the output clamp."""

    name = "linear2x"

    def __init__(self) -> None:
        self._weights: dict[int, np.ndarray] = {}

    def _w(self, n: int) -> np.ndarray:
        if n not in self._weights:
            self._weights[n] = _upsample_weights(n)
        return self._weights[n]

    def _linear(self, latent: np.ndarray) -> np.ndarray:
        h, w = latent.shape[1:]
        return np.matmul(self._w(h), np.matmul(latent, self._w(w).T))

    def forward(self, latent: np.ndarray) -> np.ndarray:
        return np.clip(self._linear(_check_decoder_latent(latent)), 0.0, 1.0)

    def vjp(self, latent: np.ndarray | None, cotangent: np.ndarray) -> np.ndarray:
        g = np.asarray(cotangent, dtype=np.float64)
        if g.ndim != 3 or g.shape[0] != 3 or g.shape[1] % 2 or g.shape[2] % 2:
            raise ValueError(f"cotangent must be (3, 2h, 2w), got {g.shape}")
        if latent is not None:
            latent = _check_decoder_latent(latent)
            expect = (3, 2 * latent.shape[1], 2 * latent.shape[2])
            if g.shape != expect:
                raise ValueError(f"cotangent {g.shape}, expected {expect}")
            raw = self._linear(latent)
            g = g * ((raw > 0.0) & (raw < 1.0))
        h, w = g.shape[1] // 2, g.shape[2] // 2
        return np.matmul(self._w(h).T, np.matmul(g, self._w(w)))

    def output_hw(self, latent_hw: tuple[int, int]) -> tuple[int, int]:
        return 2 * latent_hw[0], 2 * latent_hw[1]


DECODERS: dict[str, type[DecoderInterface]] = {
    IdentityDecoder.name: IdentityDecoder,
    Linear2xDecoder.name: Linear2xDecoder,
}


def get_decoder(name: str) -> DecoderInterface:
    if name not in DECODERS:
        raise ValueError(f"unknown decoder {name!r}; have {sorted(DECODERS)}")
    return DECODERS[name]()


class NoisePredictorInterface(ABC):
    """Noise model: latent + step + conditioning -> same-shaped prediction.

    Implementations must be deterministic given (input, t, conditioning,
    seed) and safe for concurrent read-only use.
    """

    name: str = "?"

    @abstractmethod
    def predict(self, latent: np.ndarray, t: int, conditioning) -> np.ndarray: ...


def latent_gradient(
    dec: DecoderInterface,
    sched: Schedule,
    t: int,
    pixel_grad: np.ndarray,
    x0_hat: np.ndarray | None = None,
) -> np.ndarray:
    """Pull an image-space cotangent back to the step-t latent.

    Chains the decoder adjoint with the 1/sqrt(alpha_t) factor of the
    noise-free prediction; ``x0_hat`` is the latent the decoder was
    evaluated at (needed to differentiate its clamp).
    """
    if not 1 <= t <= sched.steps:
        raise ValueError(f"step index {t} outside [1, {sched.steps}]")
    return dec.vjp(x0_hat, pixel_grad) / math.sqrt(float(sched.alpha[t]))


def guided_update(x_prev: np.ndarray, grad: np.ndarray, delta: float) -> np.ndarray:
    """Move ``x_prev`` against the guidance gradient with step size delta."""
    x_prev = np.asarray(x_prev, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if x_prev.shape != grad.shape:
        raise ValueError(f"shape mismatch: {x_prev.shape} vs {grad.shape}")
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    return x_prev - delta * grad


def pixelwise_guidance(
    x0_hat: np.ndarray,
    prev_image_ds: np.ndarray,
    m: Mapping,
    dec: DecoderInterface,
    sched: Schedule,
    t: int,
    guidance_hw: tuple[int, int],
) -> tuple[float, np.ndarray]:
    """Full guidance chain for one step.

    Decode the noise-free prediction, pool it to the guidance resolution,
    compare against the previous frame's pooled prediction at the mapped
    pairs, and pull the loss gradient back to the step-t latent. Returns
    (loss, latent-shaped gradient).
    """
    img = dec.forward(x0_hat)
    gh, gw = guidance_hw
    ds = downsample_image(img, gw, gh)
    omega = guidance_loss(ds, prev_image_ds, m)
    pg = guidance_pixel_grad(ds, prev_image_ds, m)
    pg_full = downsample_image_vjp(pg, img.shape[1], img.shape[2])
    return omega, latent_gradient(dec, sched, t, pg_full, x0_hat=x0_hat)
