"""Dynamic MR reconstruction: classical solver and unrolled network."""

from .admm import AdmmConfig, reconstruct
from .encoding import Encoder, add_noise, make_pseudo_radial_mask, make_vds_mask
from .errors import FormatError, NumericalError
from .fileio import load_checkpoint, load_dmrt, save_checkpoint, save_dmrt
from .metrics import psnr, ssim
from .network import (
    NetworkConfig,
    init_network_params,
    network_backward,
    network_forward,
)
from .phantom import PhantomSpec, generate_phantom, make_phantom_dataset
from .training import TrainConfig, train_loop

__all__ = [
    "AdmmConfig",
    "Encoder",
    "FormatError",
    "NetworkConfig",
    "NumericalError",
    "PhantomSpec",
    "TrainConfig",
    "add_noise",
    "generate_phantom",
    "init_network_params",
    "load_checkpoint",
    "load_dmrt",
    "make_phantom_dataset",
    "make_pseudo_radial_mask",
    "make_vds_mask",
    "network_backward",
    "network_forward",
    "psnr",
    "reconstruct",
    "save_checkpoint",
    "save_dmrt",
    "ssim",
    "train_loop",
]

__version__ = "0.1.0"
