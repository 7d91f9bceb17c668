"""Cross-shaped-window attention U-Net for image segmentation.

Built on a small numpy autodiff core so the whole pipeline (stripe
attention, content-aware upsampling, combined Dice/cross-entropy training,
metrics) is inspectable and verifiable end to end.
"""

from .attention import AttentionConfig, CSWinBlockParams, cswin_attention, cswin_block, partition
from .carafe import KernelPredictorParams, UpsampleConfig, carafe_upsample, predict_kernels, reassemble
from .checkpoint import Checkpoint, load_checkpoint, restore_model, save_checkpoint, snapshot
from .complexity import count_flops, count_params
from .data import SegmentationSample, generate_sample, load_dataset, synth_generate
from .losses import LossConfig, combined_loss, cross_entropy_loss, dice_loss
from .metrics import MetricsReport, dsc, evaluate_masks, hausdorff, se_sp_acc
from .network import Model, NetworkConfig, default_config, tiny_config
from .optim import SGD, OptimizerConfig
from .tensor import Tape, Tensor, backward
from .train import augment, evaluate_model, train

__all__ = [
    "AttentionConfig",
    "CSWinBlockParams",
    "Checkpoint",
    "KernelPredictorParams",
    "LossConfig",
    "MetricsReport",
    "Model",
    "NetworkConfig",
    "OptimizerConfig",
    "SGD",
    "SegmentationSample",
    "Tape",
    "Tensor",
    "UpsampleConfig",
    "augment",
    "backward",
    "carafe_upsample",
    "combined_loss",
    "count_flops",
    "count_params",
    "cross_entropy_loss",
    "cswin_attention",
    "cswin_block",
    "default_config",
    "dice_loss",
    "dsc",
    "evaluate_masks",
    "evaluate_model",
    "generate_sample",
    "hausdorff",
    "load_checkpoint",
    "load_dataset",
    "partition",
    "predict_kernels",
    "reassemble",
    "restore_model",
    "save_checkpoint",
    "se_sp_acc",
    "snapshot",
    "synth_generate",
    "tiny_config",
    "train",
]
__version__ = "0.1.0"
