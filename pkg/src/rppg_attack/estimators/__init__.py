"""Pulse estimators sharing ``estimate(clip) -> Waveform``."""
from .classical import Chrom, Pos, chrom_estimate, pos_estimate
from .micronet import (LossValue, MicroNetParams, MicroPulseNet, init_params, load_params,
                       micro_backward, micro_forward, pearson_loss, save_params, zero_params)
from .training import train_micro

__all__ = [
    "Chrom", "Pos", "chrom_estimate", "pos_estimate",
    "LossValue", "MicroNetParams", "MicroPulseNet", "init_params", "load_params",
    "micro_backward", "micro_forward", "pearson_loss", "save_params", "zero_params",
    "train_micro",
]
