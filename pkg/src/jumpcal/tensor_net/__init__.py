"""Minimal feedforward networks with array-valued reverse-mode gradients."""

from .network import (
    HEADS,
    JUMP_HEADS,
    Network,
    NetworkSet,
    NetSpec,
    backward,
    constant_network_set,
    disable_jumps,
    forward,
    init,
    init_network_set,
    load_checkpoint,
    save_checkpoint,
    value_and_grad,
)
from .optim import Adam, AdamConfig
from .tape import Node, Tape

__all__ = [
    "HEADS", "JUMP_HEADS", "Network", "NetworkSet", "NetSpec", "backward", "constant_network_set",
    "disable_jumps",
    "forward", "init", "init_network_set", "load_checkpoint", "save_checkpoint",
    "value_and_grad", "Adam", "AdamConfig", "Node", "Tape",
]
