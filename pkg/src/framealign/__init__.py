"""Cross-frame correspondence and temporal-consistency engine.

Per-body-part dense correspondences between consecutive frames are solved
as rectangular linear assignment problems over UV/centroid-distance
features. The resulting injective pixel mappings drive three consumers:
spatial latent alignment (copying latent values across frames during the
early denoising steps), pixel-wise guidance (a gradient step shrinking
decoded differences at mapped pixels), and a matched-pixel mean-squared
temporal-consistency metric.
"""

from .alignment import StepWindow, align_latent, should_align
from .embedding import (
    EmbeddingMap,
    PartPixelSet,
    centroid,
    downsample,
    feature_matrix,
    part_pixels,
)
from .guidance import (
    DecoderInterface,
    IdentityDecoder,
    Linear2xDecoder,
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
    pixelwise_guidance,
)
from .matching import (
    Assignment,
    Mapping,
    bench_lap,
    brute_force_lap,
    cost_matrix,
    empty_mapping,
    full_mapping,
    part_mapping,
    solve_lap,
)
from .metrics import MetricReport, hmse
from .pipeline import (
    ConditionedLinearPredictor,
    FrameConditioning,
    PipelineConfig,
    PipelineTrace,
    SeededNoisePredictor,
    ZeroPredictor,
    get_predictor,
    pair_mappings,
    run_pipeline,
)
from .scene import (
    ConditioningSequence,
    PartSpec,
    SyntheticSceneSpec,
    synth_scene,
    two_part_character,
)
from .tensorio import TensorFormatError, read_ppm, read_tensor, write_ppm, write_tensor
from .viz import viz_mapping

__version__ = "0.1.0"
