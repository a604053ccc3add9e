from .checkpoint import load_framework, save_framework
from .layers import MultiChannelGAT, mgat_enhance, neighbor_table, start_features, transform, transform_raw
from .models import ABLATION_SETTINGS, AblationFlags, FrameworkConfig
from .network import FrameworkModel, FrameworkTrace, forward
from .training import build_framework, train_framework

__all__ = [
    "ABLATION_SETTINGS",
    "AblationFlags",
    "FrameworkConfig",
    "FrameworkModel",
    "FrameworkTrace",
    "MultiChannelGAT",
    "build_framework",
    "forward",
    "load_framework",
    "mgat_enhance",
    "neighbor_table",
    "save_framework",
    "start_features",
    "train_framework",
    "transform",
    "transform_raw",
]
