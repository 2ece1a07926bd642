"""Sequential network with backpropagation and the MSE training loss."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from phantomgen.neuralcore.layers import Layer, LayerSpec, ShapeError


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error over every element, with its gradient."""
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} vs target {target.shape}")
    diff = pred - target
    flat = diff.ravel()
    loss = float(flat @ flat) / flat.size
    diff *= 2.0 / flat.size
    return loss, diff


class Network:
    """Ordered layer stack sharing one input shape.

    ``in_shape`` is the per-sample shape: ``(L, C)`` for the conv lane or
    ``(n,)`` for the dense lane; batches prepend the sample axis.
    """

    def __init__(self, specs: Sequence[LayerSpec], in_shape, rng: np.random.Generator):
        self.in_shape = tuple(in_shape)
        self.layers = []
        shape = self.in_shape
        for spec in specs:
            layer = spec.build()
            shape = layer.initialize(shape, rng)
            self.layers.append(layer)
        self.out_shape = shape
        self._flatten_parameters()

    def _flatten_parameters(self):
        """Rebind every layer parameter as a view into one flat buffer.

        The flat vector is what the optimizer updates (a single fused
        operation per step); layer views see the updates immediately.
        """
        entries = []
        total = 0
        for layer in self.layers:
            for name, arr in layer.param_items():
                entries.append((layer, name, arr, total))
                total += arr.size
        self.flat_params = np.empty(total)
        self._flat_grads = np.zeros(total)
        self._grad_slices = []
        for layer, name, arr, offset in entries:
            view = self.flat_params[offset : offset + arr.size].reshape(arr.shape)
            view[...] = arr
            layer.params[name] = view
            self._grad_slices.append((layer, name, offset, arr.size, arr.shape))

    def gather_flat_grads(self) -> np.ndarray:
        for layer, name, offset, size, _ in self._grad_slices:
            np.copyto(
                self._flat_grads[offset : offset + size],
                layer.grads[name].reshape(size),
            )
        return self._flat_grads

    @property
    def specs(self):
        return [layer.spec for layer in self.layers]

    def forward(
        self, x: np.ndarray, train: bool = False, rng: Optional[np.random.Generator] = None
    ) -> np.ndarray:
        if x.shape[1:] != self.in_shape:
            raise ShapeError(f"expected input {self.in_shape} per sample, got {x.shape[1:]}")
        for layer in self.layers:
            x = layer.forward(x, train, rng)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def zero_grads(self):
        for layer in self.layers:
            layer.zero_grads()

    def parameters(self):
        """Flat (name, array) list; arrays are live references."""
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr in layer.param_items():
                out.append((f"layer{i}.{name}", arr))
        return out

    def gradients(self):
        out = []
        for i, layer in enumerate(self.layers):
            for name, _ in layer.param_items():
                out.append((f"layer{i}.{name}", layer.grads[name]))
        return out

    def set_parameters(self, arrays: Sequence[np.ndarray]):
        """Load parameter values (same order as ``parameters``)."""
        params = self.parameters()
        if len(arrays) != len(params):
            raise ShapeError(f"expected {len(params)} arrays, got {len(arrays)}")
        for (name, dst), src in zip(params, arrays):
            if dst.shape != src.shape:
                raise ShapeError(f"{name}: shape {src.shape} != {dst.shape}")
            dst[...] = src

    def parameter_arrays(self):
        return [arr for _, arr in self.parameters()]

    def weight_decay_mask(self) -> np.ndarray:
        """Flat 0/1 mask marking weight entries (biases are never decayed)."""
        mask = np.zeros_like(self.flat_params)
        for layer, name, offset, size, _ in self._grad_slices:
            if name == "w":
                mask[offset : offset + size] = 1.0
        return mask

    def parameter_count(self) -> int:
        return sum(arr.size for arr in self.parameter_arrays())

    def train_step(
        self,
        x: np.ndarray,
        target: np.ndarray,
        optimizer,
        rng: Optional[np.random.Generator] = None,
    ) -> float:
        """One forward/backward/update pass; returns the batch loss."""
        pred = self.forward(x, train=True, rng=rng)
        loss, grad = mse_loss(pred, target)
        self.backward(grad)
        optimizer.step([self.flat_params], [self.gather_flat_grads()])
        return loss
