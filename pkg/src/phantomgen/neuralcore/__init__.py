"""Minimal tensor engine: layers, backprop, optimizers, gradient checking."""

from phantomgen.neuralcore.gradcheck import grad_check, relative_error
from phantomgen.neuralcore.kernels import backend_name
from phantomgen.neuralcore.layers import LayerSpec, ShapeError
from phantomgen.neuralcore.network import Network, mse_loss
from phantomgen.neuralcore.optim import SGD, Adam, make_optimizer
from phantomgen.neuralcore.params_io import (
    ParamsFormatError,
    load_into_network,
    load_params,
    network_layer_params,
    read_params,
    save_params,
    write_params,
)

__all__ = [
    "Adam",
    "LayerSpec",
    "Network",
    "ParamsFormatError",
    "SGD",
    "ShapeError",
    "backend_name",
    "grad_check",
    "load_into_network",
    "load_params",
    "make_optimizer",
    "mse_loss",
    "network_layer_params",
    "read_params",
    "relative_error",
    "save_params",
    "write_params",
]
