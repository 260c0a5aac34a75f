"""Minimal feed-forward network with exact reverse-mode derivatives.

The network maps an input vector through tanh hidden layers to a linear
output of width ``m``.  It is deliberately tiny: dense layers only, 64-bit
floats throughout, deterministic given the seed.  Besides the forward
pass it exposes the full Jacobian of the outputs with respect to every
parameter (needed for gradient checking) and a cheaper vector-Jacobian
product used by the training steps.
"""

from __future__ import annotations

import json

import numpy as np


class Mlp:
    """Fully connected network, tanh hidden activations, linear output.

    ``layer_sizes`` lists the input width, hidden widths, and output
    width, e.g. ``[16, 10, 10, 10]``.  Weights are initialized uniformly
    in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` from a seeded generator.
    """

    def __init__(self, layer_sizes, seed: int | None = None, rng=None):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.layer_sizes = [int(s) for s in layer_sizes]
        if rng is None:
            rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    # -- forward -----------------------------------------------------------

    def _check_input(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        if arr.shape != (self.n_inputs,):
            raise ValueError(
                f"expected input of length {self.n_inputs}, got shape {arr.shape}"
            )
        return arr

    def forward_pass(self, x) -> list[np.ndarray]:
        """Activations of every layer, input first, output last."""
        a = self._check_input(x)
        acts = [a]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = w @ a + b
            a = z if i == last else np.tanh(z)
            acts.append(a)
        return acts

    def forward(self, x) -> np.ndarray:
        return self.forward_pass(x)[-1]

    # -- derivatives -------------------------------------------------------

    def backward(self, acts: list[np.ndarray], v: np.ndarray) -> np.ndarray:
        """Gradient of ``v . output`` with respect to the parameter vector.

        ``acts`` must come from :meth:`forward_pass` on the same input.
        """
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n_outputs,):
            raise ValueError(f"expected seed of length {self.n_outputs}")
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        g = v
        for i in range(len(self.weights) - 1, -1, -1):
            # hidden activations are tanh outputs, so tanh' = 1 - a**2
            if i < len(self.weights) - 1:
                g = g * (1.0 - acts[i + 1] ** 2)
            grads_w[i] = np.outer(g, acts[i])
            grads_b[i] = g
            g = self.weights[i].T @ g
        return self._flatten(grads_w, grads_b)

    def jacobian(self, x) -> np.ndarray:
        """Exact Jacobian of shape ``(n_params, n_outputs)``."""
        acts = self.forward_pass(x)
        m = self.n_outputs
        cols = [self.backward(acts, np.eye(m)[j]) for j in range(m)]
        return np.stack(cols, axis=1)

    # -- parameter vector --------------------------------------------------

    def _flatten(self, ws, bs) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(ws, bs) for a in pair])

    def get_params(self) -> np.ndarray:
        return self._flatten(self.weights, self.biases)

    def set_params(self, theta) -> None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters")
        i = 0
        for w, b in zip(self.weights, self.biases):
            w[...] = theta[i : i + w.size].reshape(w.shape)
            i += w.size
            b[...] = theta[i : i + b.size]
            i += b.size

    def apply_param_step(self, direction, alpha: float) -> None:
        """In-place ``theta <- theta - alpha * direction``."""
        direction = np.asarray(direction, dtype=float)
        if direction.shape != (self.n_params,):
            raise ValueError(f"expected direction of length {self.n_params}")
        i = 0
        for w, b in zip(self.weights, self.biases):
            w -= alpha * direction[i : i + w.size].reshape(w.shape)
            i += w.size
            b -= alpha * direction[i : i + b.size]
            i += b.size

    def copy(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.layer_sizes = list(self.layer_sizes)
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "layer_sizes": self.layer_sizes,
                "weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Mlp":
        d = json.loads(text)
        net = cls.__new__(cls)
        net.layer_sizes = [int(s) for s in d["layer_sizes"]]
        net.weights = [np.asarray(w, dtype=float) for w in d["weights"]]
        net.biases = [np.asarray(b, dtype=float) for b in d["biases"]]
        return net
