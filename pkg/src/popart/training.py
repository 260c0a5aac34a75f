"""Output-preserving rescaling and the SGD variants built on it.

The :class:`OutputLayer` is the final linear map ``W h + b`` together
with the scale/shift pair ``(sigma, mu)`` it is currently calibrated to,
so the unnormalized prediction is ``sigma * (W h + b) + mu``.  When the
statistics move, :meth:`OutputLayer.rescale_to` compensates ``W`` and
``b`` so the unnormalized outputs are unchanged pointwise.

Four per-sample squared-loss SGD steps are provided:

- :func:`popart_sgd_step`: statistics update, compensating rescale, then
  SGD on the normalized error (the full scheme).
- :func:`art_only_sgd_step`: statistics update without the compensating
  rescale (normalization alone, outputs drift).
- :func:`plain_sgd_step`: no statistics at all, SGD on raw targets.
- :func:`normalized_sgd_step`: the dual formulation that keeps the top
  layer in unnormalized space but divides the lower-layer update by the
  squared scale; from identical initializations it traces the exact same
  lower-layer parameters and unnormalized outputs as the first variant.

All steps mutate ``net`` and ``layer`` in place and return a
:class:`TrainStepReport`.  Errors follow the convention
``delta = prediction - target``, with subtractive updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import Mlp
from .stats import Normalizer


@dataclass
class TrainStepReport:
    """Per-step diagnostics, optionally fed to an instrumentation hook."""

    normalized_error: np.ndarray
    unnormalized_error: np.ndarray
    squared_loss: float
    gradient_norm: float
    scale: np.ndarray | None = None
    shift: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


class OutputLayer:
    """Final linear layer ``W h + b`` with its scale/shift calibration.

    ``k`` is the number of outputs, ``m`` the width of the feature vector
    it consumes.  ``sigma`` starts at ones and ``mu`` at zeros, matching a
    fresh identity normalization.
    """

    def __init__(
        self,
        k: int,
        m: int,
        normalizer: Normalizer | None = None,
        W: np.ndarray | None = None,
        b: np.ndarray | None = None,
        seed: int | None = None,
        rng=None,
    ):
        self.k = int(k)
        self.m = int(m)
        if W is None:
            if rng is None:
                rng = np.random.default_rng(seed)
            bound = 1.0 / np.sqrt(m)
            W = rng.uniform(-bound, bound, size=(k, m))
        self.W = np.array(W, dtype=float).reshape(k, m)
        self.b = np.zeros(k) if b is None else np.array(b, dtype=float).reshape(k)
        self.sigma = np.ones(k)
        self.mu = np.zeros(k)
        self.normalizer = normalizer

    def normalized_output(self, h) -> np.ndarray:
        return self.W @ np.asarray(h, dtype=float) + self.b

    def unnormalized_output(self, h) -> np.ndarray:
        return self.sigma * self.normalized_output(h) + self.mu

    def rescale_to(self, sigma_new, mu_new) -> None:
        """Adopt a new scale/shift without changing unnormalized outputs."""
        sigma_new = np.asarray(sigma_new, dtype=float).reshape(self.k)
        mu_new = np.asarray(mu_new, dtype=float).reshape(self.k)
        if np.any(sigma_new <= 0):
            raise ValueError("sigma_new must be componentwise positive")
        self.W *= (self.sigma / sigma_new)[:, None]
        self.b = (self.sigma * self.b + self.mu - mu_new) / sigma_new
        self.sigma = sigma_new.copy()
        self.mu = mu_new.copy()

    def set_scale_shift(self, sigma_new, mu_new) -> None:
        """Adopt a new scale/shift *without* compensation (outputs move)."""
        sigma_new = np.asarray(sigma_new, dtype=float).reshape(self.k)
        mu_new = np.asarray(mu_new, dtype=float).reshape(self.k)
        if np.any(sigma_new <= 0):
            raise ValueError("sigma_new must be componentwise positive")
        self.sigma = sigma_new.copy()
        self.mu = mu_new.copy()

    def copy(self) -> "OutputLayer":
        other = OutputLayer.__new__(OutputLayer)
        other.k = self.k
        other.m = self.m
        other.W = self.W.copy()
        other.b = self.b.copy()
        other.sigma = self.sigma.copy()
        other.mu = self.mu.copy()
        other.normalizer = self.normalizer.copy() if self.normalizer else None
        return other


def predict(net: Mlp, layer: OutputLayer, x) -> np.ndarray:
    """Unnormalized prediction ``sigma * (W h(x) + b) + mu``."""
    return layer.unnormalized_output(net.forward(x))


def _as_target(y, k: int) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape != (k,):
        raise ValueError(f"expected {k} target components, got shape {arr.shape}")
    return arr


def _apply_sgd(net, layer: OutputLayer, acts, delta, theta_seed, alpha) -> float:
    """Shared tail of every step: update theta, W, b; return gradient norm."""
    h = acts[-1]
    if net.n_params:
        g_theta = net.backward(acts, theta_seed)
        g_sq = float(g_theta @ g_theta)
    else:
        g_theta = None
        g_sq = 0.0
    d_sq = float(delta @ delta)
    grad_norm = np.sqrt(g_sq + d_sq * (1.0 + float(h @ h)))
    if g_theta is not None:
        net.apply_param_step(g_theta, alpha)
    layer.W -= alpha * np.outer(delta, h)
    layer.b -= alpha * delta
    return float(grad_norm)


def popart_sgd_update(
    net, layer: OutputLayer, x, y, sigma_new, mu_new, alpha: float, hook=None
) -> TrainStepReport:
    """One output-preserving SGD step with an externally supplied new
    scale/shift (useful when the statistics live elsewhere).

    ``W`` and ``b`` are first rescaled so unnormalized outputs are
    unchanged, then SGD consumes the normalized error under the new
    scale/shift.
    """
    y = _as_target(y, layer.k)
    layer.rescale_to(sigma_new, mu_new)
    if hook is not None:
        rescaled = {"W_rescaled": layer.W.copy(), "b_rescaled": layer.b.copy()}
    acts = net.forward_pass(x)
    delta = layer.normalized_output(acts[-1]) - (y - layer.mu) / layer.sigma
    grad_norm = _apply_sgd(net, layer, acts, delta, layer.W.T @ delta, alpha)
    report = TrainStepReport(
        normalized_error=delta,
        unnormalized_error=layer.sigma * delta,
        squared_loss=0.5 * float(delta @ delta),
        gradient_norm=grad_norm,
        scale=layer.sigma.copy(),
        shift=layer.mu.copy(),
    )
    if hook is not None:
        report.extras.update(rescaled)
        hook(report)
    return report


def popart_sgd_step(
    net, layer: OutputLayer, x, y, alpha: float, hook=None
) -> TrainStepReport:
    """One squared-loss SGD step with adaptive normalization and
    output-preserving rescale.

    Order matters: the statistics absorb the new target first, then ``W``
    and ``b`` are rescaled so outputs are unchanged, and only then does
    SGD consume the (bounded) normalized error.
    """
    nrm = layer.normalizer
    if nrm is None:
        raise ValueError("layer has no normalizer attached")
    nrm.update(y)
    return popart_sgd_update(net, layer, x, y, nrm.sigma, nrm.mu, alpha, hook=hook)


def art_only_sgd_step(
    net, layer: OutputLayer, x, y, alpha: float, hook=None
) -> TrainStepReport:
    """Like :func:`popart_sgd_step` but without the compensating rescale:
    the new scale/shift is adopted directly, so unnormalized outputs for
    other inputs drift whenever the statistics move.
    """
    y = _as_target(y, layer.k)
    nrm = layer.normalizer
    if nrm is None:
        raise ValueError("layer has no normalizer attached")
    nrm.update(y)
    layer.set_scale_shift(nrm.sigma, nrm.mu)
    acts = net.forward_pass(x)
    delta = layer.normalized_output(acts[-1]) - (y - layer.mu) / layer.sigma
    grad_norm = _apply_sgd(net, layer, acts, delta, layer.W.T @ delta, alpha)
    report = TrainStepReport(
        normalized_error=delta,
        unnormalized_error=layer.sigma * delta,
        squared_loss=0.5 * float(delta @ delta),
        gradient_norm=grad_norm,
        scale=layer.sigma.copy(),
        shift=layer.mu.copy(),
    )
    if hook is not None:
        hook(report)
    return report


def plain_sgd_step(
    net, layer: OutputLayer, x, y, alpha: float, hook=None
) -> TrainStepReport:
    """Baseline squared-loss SGD on raw targets; no statistics anywhere.

    Equivalent to :func:`art_only_sgd_step` with the scale frozen at one
    and the shift at zero.
    """
    y = _as_target(y, layer.k)
    acts = net.forward_pass(x)
    delta = layer.normalized_output(acts[-1]) - y
    grad_norm = _apply_sgd(net, layer, acts, delta, layer.W.T @ delta, alpha)
    report = TrainStepReport(
        normalized_error=delta,
        unnormalized_error=delta.copy(),
        squared_loss=0.5 * float(delta @ delta),
        gradient_norm=grad_norm,
    )
    if hook is not None:
        hook(report)
    return report


def normalized_sgd_step(
    net, layer: OutputLayer, x, y, sigma, alpha: float, hook=None
) -> TrainStepReport:
    """Scaled-update SGD: the top layer fits raw targets, while the
    lower-layer update is divided by the squared scale.

    ``sigma`` must come from the same statistics stream the adaptive
    variant would use; the layer's own scale/shift stay at identity.
    """
    y = _as_target(y, layer.k)
    sigma = np.asarray(sigma, dtype=float).reshape(layer.k)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be componentwise positive")
    acts = net.forward_pass(x)
    delta = layer.normalized_output(acts[-1]) - y
    theta_seed = layer.W.T @ (delta / sigma**2)
    grad_norm = _apply_sgd(net, layer, acts, delta, theta_seed, alpha)
    report = TrainStepReport(
        normalized_error=delta / sigma,
        unnormalized_error=delta,
        squared_loss=0.5 * float(delta @ delta),
        gradient_norm=grad_norm,
        scale=sigma.copy(),
    )
    if hook is not None:
        hook(report)
    return report
