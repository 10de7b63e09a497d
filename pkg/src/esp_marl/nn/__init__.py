"""Dense networks, action distributions, reverse-mode gradients, and Adam."""

from esp_marl.nn.autograd import Tensor, concatenate, minimum, parameter
from esp_marl.nn.checkpoint import load_checkpoint, save_checkpoint
from esp_marl.nn.distributions import Categorical, DiagGaussian
from esp_marl.nn.layers import MLPArch, ParameterVector, init_mlp, mlp_forward, register_mlp
from esp_marl.nn.optim import AdamState, adam_step
from esp_marl.nn.policy import Actor, Critic

__all__ = [
    "Actor",
    "AdamState",
    "Categorical",
    "Critic",
    "DiagGaussian",
    "MLPArch",
    "ParameterVector",
    "Tensor",
    "adam_step",
    "concatenate",
    "init_mlp",
    "load_checkpoint",
    "minimum",
    "mlp_forward",
    "parameter",
    "register_mlp",
    "save_checkpoint",
]
