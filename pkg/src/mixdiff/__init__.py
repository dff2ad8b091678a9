"""Mixed discrete-continuous diffusion for object-based scene layouts.

Scenes are fixed-size sets of slots, each slot a semantic label plus an
8-dim geometry vector (position, size, orientation as cos/sin). Labels
follow an absorbing mask-and-replace discrete diffusion; geometry follows
standard Gaussian diffusion. One transformer denoises both jointly,
conditioned on the floor plan boundary, and masked sampling reuses an
unconditional checkpoint for completion and arrangement tasks.
"""

from .categorical import (
    DiscreteSchedule, inverse_cdf_sample, loss_aux_discrete, loss_vb_discrete,
    make_mask_replace_schedule, q_posterior_discrete, q_sample_discrete,
    q_step_discrete, reverse_discrete, transition_matrix,
)
from .checkpoint import CheckpointBundle, load_checkpoint, save_checkpoint
from .config import RunConfig, config_from_dict, load_config
from .denoiser import Denoiser, DenoiserConfig, sinusoidal_embedding
from .errors import (
    InsufficientData, InvalidCheckpoint, InvalidFloor, InvalidInput, InvalidMask,
    InvalidObject, InvalidSchedule, MixdiffError, StepOutOfRange, TrainingDiverged,
    UnknownLabel, UnreachableState,
)
from .gaussian import (
    ContinuousSchedule, loss_simple, make_linear_beta, predict_x0_from_eps,
    q_posterior, q_sample, reverse_step,
)
from .metrics import MetricsReport, evaluate_scenes, kl_labels, pair_iou_3d
from .mixed import (
    DEFAULT_LAMBDA_AUX, LatentScene, MixedLossReport, MixedProcess, TorchProcess,
    corrupt_scene, make_default_process, mixed_loss, mixed_posterior, train_step,
)
from .sampler import (
    MaskSpec, Trajectory, constraints_from_scene, load_constraints,
    precompute_trajectory, sample_scene, sample_with_constraints,
)
from .scenes import (
    EMPTY_LABEL, GEOM_DIM, FloorPlan, LabelVocab, NormStats, ObjectInstance,
    SceneLayout, canonicalize, decode_object, decode_scene, encode_object,
    encode_scene, make_object, scene_from_dict, scene_to_dict,
)
from .toyrooms import ToyDataset, ToyRoomSpec, load_dataset, write_dataset

__version__ = "0.1.0"

__all__ = [
    "CheckpointBundle", "ContinuousSchedule", "DEFAULT_LAMBDA_AUX", "Denoiser",
    "DenoiserConfig", "DiscreteSchedule", "EMPTY_LABEL", "FloorPlan", "GEOM_DIM",
    "InsufficientData", "InvalidCheckpoint", "InvalidFloor", "InvalidInput",
    "InvalidMask", "InvalidObject", "InvalidSchedule", "LabelVocab", "LatentScene",
    "MaskSpec", "MetricsReport", "MixdiffError", "MixedLossReport", "MixedProcess",
    "NormStats", "ObjectInstance", "RunConfig", "SceneLayout", "StepOutOfRange",
    "ToyDataset", "ToyRoomSpec", "TorchProcess", "Trajectory", "TrainingDiverged",
    "UnknownLabel", "UnreachableState", "canonicalize", "config_from_dict",
    "constraints_from_scene", "corrupt_scene", "decode_object", "decode_scene",
    "encode_object", "encode_scene", "evaluate_scenes", "inverse_cdf_sample",
    "kl_labels", "load_checkpoint", "load_config", "load_constraints",
    "load_dataset", "loss_aux_discrete", "loss_simple", "loss_vb_discrete",
    "make_default_process", "make_linear_beta", "make_mask_replace_schedule",
    "make_object", "mixed_loss", "mixed_posterior", "pair_iou_3d",
    "precompute_trajectory", "predict_x0_from_eps", "q_posterior",
    "q_posterior_discrete", "q_sample", "q_sample_discrete", "q_step_discrete",
    "reverse_discrete", "reverse_step", "sample_scene", "sample_with_constraints",
    "save_checkpoint", "scene_from_dict", "scene_to_dict", "sinusoidal_embedding",
    "train_step", "transition_matrix", "write_dataset",
]
