"""Neural jump SDE: Euler simulation, Monte-Carlo pricing and training."""

from ..tensor_net.network import disable_jumps
from .config import ModelConfig, TrainConfig
from .dynamics import (
    Batch,
    ContractSpec,
    PathState,
    PriceResult,
    StepContext,
    StepNoise,
    grad_loss,
    loss,
    loss_and_grad,
    noise_slice,
    price_call,
    price_calls,
    simulate,
    step,
)
from .noise import NoiseBank
from .training import TrainResult, TrainState, build_networks, make_bank, train

__all__ = [
    "ModelConfig", "TrainConfig", "Batch", "ContractSpec", "PathState", "PriceResult",
    "StepContext", "StepNoise", "grad_loss", "loss", "loss_and_grad", "noise_slice",
    "price_call", "price_calls", "simulate", "step", "NoiseBank", "TrainResult",
    "TrainState", "build_networks", "make_bank", "train", "disable_jumps",
]
