"""Trainable per-pixel adaptive beamformer.

A small fully-connected network maps the TOF-aligned channel vector of one
pixel to a set of apodization weights; the beamformed value is the inner
product of those weights with the input. Hidden layers use antirectifier
activations, which keep both signal polarities at the cost of doubling the
width. Gradients are hand-derived reverse mode; the optimizer is Adam.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve

__all__ = [
    "WeightNetwork",
    "LossSpec",
    "PixelDataset",
    "TrainingRun",
    "GradientCheckReport",
    "antirectifier",
    "forward",
    "loss_mse",
    "loss_l1",
    "loss_smsle",
    "loss_ssim",
    "ssim",
    "distortionless_penalty",
    "train",
    "gradient_check",
    "adain",
    "save_network",
    "load_network",
]

_LN10 = math.log(10.0)
_NORM_EPS = 1e-12


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------


def antirectifier(v):
    """Mean-subtract, L2-normalize, and split into positive/negative parts.

    Maps an n-vector to a nonnegative 2n-vector ``[max(v^, 0), max(-v^, 0)]``
    with ``v^`` the normalized zero-mean input; at most one of the two halves
    is nonzero per coordinate. Batches (B, n) map to (B, 2n).
    """
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    v2 = v[None, :] if single else v
    u = v2 - v2.mean(axis=1, keepdims=True)
    r = np.linalg.norm(u, axis=1, keepdims=True)
    vhat = u / np.maximum(r, _NORM_EPS)
    out = np.concatenate([np.maximum(vhat, 0.0), np.maximum(-vhat, 0.0)], axis=1)
    return out[0] if single else out


def _antirectifier_forward(h):
    u = h - h.mean(axis=1, keepdims=True)
    r = np.linalg.norm(u, axis=1, keepdims=True)
    vhat = u / np.maximum(r, _NORM_EPS)
    out = np.concatenate([np.maximum(vhat, 0.0), np.maximum(-vhat, 0.0)], axis=1)
    return out, (vhat, r)


def _antirectifier_backward(grad_out, cache):
    vhat, r = cache
    n = vhat.shape[1]
    g_pos = grad_out[:, :n]
    g_neg = grad_out[:, n:]
    dvhat = g_pos * (vhat > 0) - g_neg * (vhat < 0)
    big = (r > _NORM_EPS)[:, 0]
    du = np.empty_like(dvhat)
    # normalized branch: d(u/r)/du = (I - vhat vhat^T) / r
    proj = (vhat * dvhat).sum(axis=1, keepdims=True)
    du[big] = (dvhat[big] - vhat[big] * proj[big]) / r[big]
    du[~big] = dvhat[~big] / _NORM_EPS
    return du - du.mean(axis=1, keepdims=True)


class WeightNetwork:
    """Per-pixel channel-weight estimator.

    ``layer_dims`` lists the dense-layer widths, e.g. (C, 128, 32, 32, 128, C);
    the first and last entries must equal the channel count. Hidden layers
    feed antirectifiers (doubling their width), the output layer is linear.
    """

    def __init__(self, layer_dims, seed=0):
        dims = tuple(int(d) for d in layer_dims)
        if len(dims) < 2:
            raise ValueError("need at least an input and an output width")
        if any(d < 1 for d in dims):
            raise ValueError("layer widths must be positive")
        if dims[0] != dims[-1]:
            raise ValueError("input and output dimension must both equal the channel count")
        self.layer_dims = dims
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        fan_in = dims[0]
        for i, n_out in enumerate(dims[1:], start=1):
            limit = math.sqrt(6.0 / (fan_in + n_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, n_out)))
            self.biases.append(np.zeros(n_out))
            fan_in = n_out if i == len(dims) - 1 else 2 * n_out

    @property
    def num_channels(self):
        return self.layer_dims[0]

    @property
    def num_params(self):
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def parameters(self):
        """Flat list [W1, b1, W2, b2, ...] of the trainable arrays."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def get_flat(self):
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, flat):
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.num_params:
            raise ValueError("flat parameter vector has the wrong length")
        i = 0
        for p in self.parameters():
            p[...] = flat[i : i + p.size].reshape(p.shape)
            i += p.size

    def forward_batch(self, z, want_cache=False):
        """Channel weights for a batch of pixel vectors z (B, C)."""
        z = np.asarray(z, dtype=float)
        if z.ndim != 2 or z.shape[1] != self.num_channels:
            raise ValueError(f"expected input (B, {self.num_channels}), got {z.shape}")
        a = z
        caches = []
        n_layers = len(self.weights)
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = a @ w + b
            if k < n_layers - 1:
                out, cache = _antirectifier_forward(h)
                caches.append((a, cache))
                a = out
            else:
                caches.append((a, None))
                a = h
        if want_cache:
            return a, caches
        return a

    def backward_batch(self, caches, grad_out):
        """Gradients of a scalar loss w.r.t. every parameter.

        ``grad_out`` is dLoss/d(output weights), shape (B, C). Returns a
        list matching :meth:`parameters`, plus dLoss/d(input).
        """
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        g = grad_out
        for k in range(len(self.weights) - 1, -1, -1):
            a_in, act_cache = caches[k]
            if act_cache is not None:
                g = _antirectifier_backward(g, act_cache)
            grads_w[k] = a_in.T @ g
            grads_b[k] = g.sum(axis=0)
            g = g @ self.weights[k].T
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.extend([gw, gb])
        return grads, g

    def kink_signature(self, z):
        """Sign pattern of every antirectifier input; changes mark a
        non-differentiable neighborhood crossing."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        a = z
        sig = []
        n_layers = len(self.weights)
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = a @ w + b
            if k < n_layers - 1:
                out, (vhat, _) = _antirectifier_forward(h)
                sig.append(np.sign(vhat).astype(np.int8))
                a = out
        return sig


def forward(net, z_pixel):
    """Network weights and beamformed output for one pixel (or a batch).

    Returns ``(weights, y)`` with ``y = weights . z``.
    """
    z = np.asarray(z_pixel, dtype=float)
    single = z.ndim == 1
    zb = z[None, :] if single else z
    w = net.forward_batch(zb)
    y = (w * zb).sum(axis=1)
    if single:
        return w[0], float(y[0])
    return w, y


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def _per_sample_sum(x):
    """Sum over within-sample axes, keeping the leading sample axis."""
    return x.reshape(x.shape[0], -1).sum(axis=1)


def loss_mse(outputs, targets):
    """Mean over samples of the squared error (summed within each sample)."""
    y, t = _check_pair(outputs, targets)
    return float(np.mean(_per_sample_sum((y - t) ** 2)))


def loss_l1(outputs, targets):
    """Mean over samples of the absolute error (summed within each sample)."""
    y, t = _check_pair(outputs, targets)
    return float(np.mean(_per_sample_sum(np.abs(y - t))))


def _check_pair(outputs, targets):
    y = np.asarray(outputs, dtype=float)
    t = np.asarray(targets, dtype=float)
    if y.shape != t.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {t.shape}")
    return y, t


def resolve_eps_log(targets, eps_log=None):
    """Default log-domain clamp: 1e-8 of the peak target magnitude."""
    if eps_log is not None:
        if not eps_log > 0:
            raise ValueError("eps_log must be positive")
        return float(eps_log)
    peak = float(np.max(np.abs(targets), initial=0.0))
    return 1e-8 * peak if peak > 0 else 1e-8


def _log_parts(x, eps):
    """log10 of the clamped positive/negative magnitudes of x."""
    pos = np.maximum(x, eps)
    neg = np.maximum(-x, eps)
    return np.log10(pos), np.log10(neg), pos, neg


def loss_smsle(outputs, targets, eps_log=None):
    """Signed mean-squared-logarithmic error.

    Compares the log10 magnitudes of the positive and negative signal parts
    separately (each clamped below at ``eps_log``), which evens out the
    contribution of samples across the dynamic range.
    """
    y, t = _check_pair(outputs, targets)
    eps = resolve_eps_log(t, eps_log)
    lp, ln_, _, _ = _log_parts(y, eps)
    lpt, lnt, _, _ = _log_parts(t, eps)
    per = _per_sample_sum((lp - lpt) ** 2) + _per_sample_sum((ln_ - lnt) ** 2)
    return float(0.5 * np.mean(per))


def _smsle_grad(y, t, eps):
    lp, ln_, pos, neg = _log_parts(y, eps)
    lpt, lnt, _, _ = _log_parts(t, eps)
    n_samples = y.shape[0]
    gp = (lp - lpt) / (pos * _LN10) * (y > eps)
    gn = -(ln_ - lnt) / (neg * _LN10) * (-y > eps)
    value = float(
        0.5 * np.mean(_per_sample_sum((lp - lpt) ** 2) + _per_sample_sum((ln_ - lnt) ** 2))
    )
    return value, (gp + gn) / n_samples


def ssim(a, b, window=7, eps1=0.36, eps2=3.24):
    """Mean structural similarity over uniform sliding windows.

    Luminance, contrast and structure are weighed equally:
    ``S = (2 mu_a mu_b + eps1)(2 cov + eps2) /
    ((mu_a^2 + mu_b^2 + eps1)(var_a + var_b + eps2))``.
    """
    s, _ = _ssim_core(np.asarray(a, float), np.asarray(b, float), window, eps1, eps2)
    return s


def _window_means(x, window):
    from numpy.lib.stride_tricks import sliding_window_view

    win = sliding_window_view(x, (window, window))
    return win.mean(axis=(-2, -1))


def _ssim_core(a, b, window, eps1, eps2):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2 or min(a.shape) < window:
        raise ValueError(f"images must be 2-D and at least {window}x{window}")
    mu_a = _window_means(a, window)
    mu_b = _window_means(b, window)
    va = _window_means(a * a, window) - mu_a**2
    vb = _window_means(b * b, window) - mu_b**2
    cov = _window_means(a * b, window) - mu_a * mu_b
    a1 = 2 * mu_a * mu_b + eps1
    a2 = 2 * cov + eps2
    b1 = mu_a**2 + mu_b**2 + eps1
    b2 = va + vb + eps2
    s_map = a1 * a2 / (b1 * b2)
    return float(s_map.mean()), (mu_a, mu_b, a1, a2, b1, b2, s_map)


def _ssim_grad_wrt_a(a, b, window, eps1, eps2):
    """d(mean SSIM)/da via the adjoint of the sliding-window averaging."""
    s, (mu_a, mu_b, a1, a2, b1, b2, s_map) = _ssim_core(a, b, window, eps1, eps2)
    n = window * window
    n_win = s_map.size
    c2 = a1 / (b1 * b2)
    c3 = -s_map / b2
    c1 = mu_b * a2 / (b1 * b2) - mu_b * c2 - s_map * mu_a / b1 - mu_a * c3
    kernel = np.ones((window, window))
    k1 = convolve(c1, kernel, mode="full", method="direct")
    k2 = convolve(c2, kernel, mode="full", method="direct")
    k3 = convolve(c3, kernel, mode="full", method="direct")
    grad = (2.0 / (n * n_win)) * (k1 + b * k2 + a * k3)
    return s, grad


def loss_ssim(outputs, targets, window=7, dynamic_range=60.0, eps1=None, eps2=None,
              eps_log=None):
    """One minus SSIM on the log-compressed positive and negative parts.

    The two polarities are log-compressed separately (clamp ``eps_log``) and
    their SSIM-losses averaged. Stabilizers default to
    ``eps1 = (0.01 L)^2``, ``eps2 = (0.03 L)^2`` with L the dynamic range.
    """
    value, _ = _ssim_loss_grad(outputs, targets, window, dynamic_range, eps1, eps2,
                               eps_log, want_grad=False)
    return value


def _ssim_loss_grad(outputs, targets, window=7, dynamic_range=60.0, eps1=None,
                    eps2=None, eps_log=None, want_grad=True):
    y, t = _check_pair(outputs, targets)
    if y.ndim != 2:
        raise ValueError("SSIM loss operates on a single 2-D image")
    if eps1 is None:
        eps1 = (0.01 * dynamic_range) ** 2
    if eps2 is None:
        eps2 = (0.03 * dynamic_range) ** 2
    eps = resolve_eps_log(t, eps_log)

    lp, ln_, pos, neg = _log_parts(y, eps)
    lpt, lnt, _, _ = _log_parts(t, eps)
    if want_grad:
        s_pos, g_pos = _ssim_grad_wrt_a(lp, lpt, window, eps1, eps2)
        s_neg, g_neg = _ssim_grad_wrt_a(ln_, lnt, window, eps1, eps2)
        # chain through the clamped log compression of each polarity;
        # the two 1-SSIM terms enter with weight 1/2 each
        dy = 0.5 * (
            -g_pos / (pos * _LN10) * (y > eps) + g_neg / (neg * _LN10) * (-y > eps)
        )
        return float(0.5 * ((1 - s_pos) + (1 - s_neg))), dy
    s_pos, _ = _ssim_core(lp, lpt, window, eps1, eps2)
    s_neg, _ = _ssim_core(ln_, lnt, window, eps1, eps2)
    return float(0.5 * ((1 - s_pos) + (1 - s_neg))), None


def distortionless_penalty(weights):
    """(sum of weights - 1)^2: pushes the response toward unit gain."""
    w = np.asarray(weights, dtype=float)
    return float((w.sum() - 1.0) ** 2)


@dataclass(frozen=True)
class LossSpec:
    """Training-loss configuration.

    ``kind`` selects the main loss; ``distortionless_weight`` scales the
    unit-gain penalty on the predicted weights; ``eps_log`` clamps the log
    compression (None = 1e-8 of the peak target magnitude).
    """

    kind: str = "smsle"
    distortionless_weight: float = 0.1
    eps_log: float | None = None
    ssim_window: int = 7
    ssim_dynamic_range: float = 60.0

    def __post_init__(self):
        if self.kind not in ("mse", "l1", "smsle", "ssim"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.distortionless_weight < 0:
            raise ValueError("distortionless_weight must be >= 0")
        if self.eps_log is not None and not self.eps_log > 0:
            raise ValueError("eps_log must be positive")


def _main_loss_grad(spec, y, t):
    """Value, dLoss/dY, and kink signature of the main loss."""
    if spec.kind == "mse":
        d = y - t
        return float(np.mean(_per_sample_sum(d**2))), 2.0 * d / y.shape[0], None
    if spec.kind == "l1":
        d = y - t
        sig = np.sign(d).astype(np.int8)
        return float(np.mean(_per_sample_sum(np.abs(d)))), sig / y.shape[0], sig
    eps = resolve_eps_log(t, spec.eps_log)
    clamp_sig = np.stack([(y > eps), (-y > eps)]).astype(np.int8)
    if spec.kind == "smsle":
        value, dy = _smsle_grad(y, t, eps)
        return value, dy, clamp_sig
    value, dy = _ssim_loss_grad(
        y, t, spec.ssim_window, spec.ssim_dynamic_range, eps_log=eps
    )
    return value, dy, clamp_sig


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PixelDataset:
    """Supervised per-pixel samples: channel vectors and target values.

    ``image_shape`` (Nx, Ny) orders the samples row-major as an image; it is
    required for the SSIM loss, which needs spatial context.
    """

    inputs: np.ndarray
    targets: np.ndarray
    image_shape: tuple | None = None

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        t = np.asarray(self.targets, dtype=float)
        if x.ndim != 2 or t.shape != (x.shape[0],):
            raise ValueError("inputs must be (N, C) with matching (N,) targets")
        if x.shape[0] < 1:
            raise ValueError("dataset must be non-empty")
        if self.image_shape is not None:
            nx, ny = self.image_shape
            if nx * ny != x.shape[0]:
                raise ValueError("image_shape does not match the sample count")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", t)

    def __len__(self):
        return self.inputs.shape[0]


@dataclass(frozen=True)
class TrainingRun:
    """Record of one optimization run (deterministic given the seed)."""

    dataset: PixelDataset
    loss_spec: LossSpec
    hyperparams: dict
    seed: int
    initial_loss: float
    loss_history: tuple


def _batch_objective(net, z, t, spec, image_shape=None):
    """Total loss (main + distortionless penalty) and parameter gradients."""
    w_out, caches = net.forward_batch(z, want_cache=True)
    y = (w_out * z).sum(axis=1)
    B = z.shape[0]
    if spec.kind == "ssim":
        if image_shape is None:
            raise ValueError("the SSIM loss needs dataset.image_shape")
        value, dy, sig = _main_loss_grad(spec, y.reshape(image_shape), t.reshape(image_shape))
        dy = dy.reshape(-1)
    else:
        value, dy, sig = _main_loss_grad(spec, y, t)
    wsum = w_out.sum(axis=1)
    lam = spec.distortionless_weight
    penalty = lam * float(np.mean((wsum - 1.0) ** 2))
    total = value + penalty
    if not math.isfinite(total):
        return total, None, sig
    grad_w = dy[:, None] * z + (2.0 * lam / B) * (wsum - 1.0)[:, None]
    grads, _ = net.backward_batch(caches, grad_w)
    return total, grads, sig


def evaluate_loss(net, dataset, spec):
    """Full-dataset objective value (main loss + penalty)."""
    w_out = net.forward_batch(dataset.inputs)
    y = (w_out * dataset.inputs).sum(axis=1)
    if spec.kind == "ssim":
        main = loss_ssim(
            y.reshape(dataset.image_shape),
            dataset.targets.reshape(dataset.image_shape),
            spec.ssim_window,
            spec.ssim_dynamic_range,
            eps_log=resolve_eps_log(dataset.targets, spec.eps_log),
        )
    elif spec.kind == "mse":
        main = loss_mse(y, dataset.targets)
    elif spec.kind == "l1":
        main = loss_l1(y, dataset.targets)
    else:
        main = loss_smsle(y, dataset.targets, resolve_eps_log(dataset.targets, spec.eps_log))
    pen = spec.distortionless_weight * float(np.mean((w_out.sum(axis=1) - 1.0) ** 2))
    return main + pen


def train(net, dataset, loss_spec=None, epochs=10, batch_size=128, step_size=1e-3,
          beta1=0.9, beta2=0.999, adam_eps=1e-8, seed=0):
    """Mini-batch Adam on the per-pixel beamforming objective.

    Shuffling is driven by ``seed`` only, so identical inputs give a
    bitwise-identical loss history. ``loss_history`` holds the mean batch
    loss of each epoch; the pre-training objective is ``initial_loss``.
    Raises FloatingPointError if the loss leaves the finite range (step size
    too large).
    """
    if loss_spec is None:
        loss_spec = LossSpec()
    if len(dataset) == 0:
        raise ValueError("dataset must be non-empty")
    if loss_spec.kind == "ssim" and dataset.image_shape is None:
        raise ValueError("the SSIM loss needs dataset.image_shape")
    spec = loss_spec
    # resolve the clamp once against the full target set so batches agree
    if spec.kind in ("smsle", "ssim") and spec.eps_log is None:
        spec = LossSpec(
            spec.kind,
            spec.distortionless_weight,
            resolve_eps_log(dataset.targets, None),
            spec.ssim_window,
            spec.ssim_dynamic_range,
        )

    rng = np.random.default_rng(seed)
    params = net.parameters()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    step = 0
    initial = evaluate_loss(net, dataset, spec)
    history = []
    n = len(dataset)
    whole_image = spec.kind == "ssim"
    for _ in range(epochs):
        order = np.arange(n) if whole_image else rng.permutation(n)
        bs = n if whole_image else batch_size
        batch_losses = []
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            loss, grads, _ = _batch_objective(
                net, dataset.inputs[idx], dataset.targets[idx], spec,
                dataset.image_shape if whole_image else None,
            )
            if not math.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss {loss} at step {step}; lower the step size"
                )
            step += 1
            for p, g, mi, vi in zip(params, grads, m, v):
                mi += (1 - beta1) * (g - mi)
                vi += (1 - beta2) * (g * g - vi)
                mhat = mi / (1 - beta1**step)
                vhat = vi / (1 - beta2**step)
                p -= step_size * mhat / (np.sqrt(vhat) + adam_eps)
            batch_losses.append(loss)
        history.append(float(np.mean(batch_losses)))
    return TrainingRun(
        dataset=dataset,
        loss_spec=spec,
        hyperparams={
            "epochs": epochs,
            "batch_size": batch_size,
            "step_size": step_size,
            "beta1": beta1,
            "beta2": beta2,
            "adam_eps": adam_eps,
        },
        seed=seed,
        initial_loss=initial,
        loss_history=tuple(history),
    )


# ---------------------------------------------------------------------------
# gradient verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GradientCheckReport:
    max_rel_err: float
    num_checked: int
    num_excluded: int


def _signature(net, z, t, spec):
    sig_net = net.kink_signature(z)
    w_out = net.forward_batch(z)
    y = (w_out * z).sum(axis=1)
    if spec.kind == "ssim" or spec.kind == "smsle":
        eps = resolve_eps_log(t, spec.eps_log)
        sig_loss = np.stack([(y > eps), (-y > eps)]).astype(np.int8)
    elif spec.kind == "l1":
        sig_loss = np.sign(y - t).astype(np.int8)
    else:
        sig_loss = None
    return sig_net, sig_loss


def _same_signature(a, b):
    nets_equal = all(np.array_equal(x, y) for x, y in zip(a[0], b[0]))
    loss_equal = (a[1] is None and b[1] is None) or np.array_equal(a[1], b[1])
    return nets_equal and loss_equal


def gradient_check(net, dataset_or_inputs, targets=None, loss_spec=None, h=1e-6,
                   num_params=50, seed=0):
    """Central-difference check of the analytic parameter gradients.

    Randomly probes ``num_params`` parameters. Probes whose +/-h evaluations
    cross a non-differentiable neighborhood (an antirectifier sign flip, an
    l1 sign flip, or a log-clamp activation change) are flagged and
    excluded. Returns the max relative error over the clean probes.
    """
    if isinstance(dataset_or_inputs, PixelDataset):
        z = dataset_or_inputs.inputs
        t = dataset_or_inputs.targets
        image_shape = dataset_or_inputs.image_shape
    else:
        z = np.atleast_2d(np.asarray(dataset_or_inputs, dtype=float))
        t = np.asarray(targets, dtype=float)
        image_shape = None
    if loss_spec is None:
        loss_spec = LossSpec(kind="mse", distortionless_weight=0.0)
    spec = loss_spec
    if spec.kind in ("smsle", "ssim") and spec.eps_log is None:
        spec = LossSpec(spec.kind, spec.distortionless_weight,
                        resolve_eps_log(t, None), spec.ssim_window,
                        spec.ssim_dynamic_range)
    if spec.kind == "ssim" and image_shape is None:
        image_shape = t.shape if np.asarray(t).ndim == 2 else None
        if image_shape is None:
            raise ValueError("the SSIM loss needs image-shaped targets")
        t = np.asarray(t).reshape(-1)

    _, grads, _ = _batch_objective(net, z, t.reshape(-1), spec, image_shape)
    flat_grad = np.concatenate([g.ravel() for g in grads])

    theta0 = net.get_flat()
    ref_sig = _signature(net, z, t.reshape(-1), spec)

    def objective(theta):
        net.set_flat(theta)
        loss, _, _ = _batch_objective(net, z, t.reshape(-1), spec, image_shape)
        sig = _signature(net, z, t.reshape(-1), spec)
        return loss, sig

    rng = np.random.default_rng(seed)
    picks = rng.choice(theta0.size, size=min(num_params, theta0.size), replace=False)
    max_rel = 0.0
    excluded = 0
    checked = 0
    try:
        for i in picks:
            hi = h * max(1.0, abs(theta0[i]))
            theta = theta0.copy()
            theta[i] = theta0[i] + hi
            lp, sig_p = objective(theta)
            theta[i] = theta0[i] - hi
            lm, sig_m = objective(theta)
            if not (_same_signature(sig_p, ref_sig) and _same_signature(sig_m, ref_sig)):
                excluded += 1
                continue
            fd = (lp - lm) / (2 * hi)
            denom = max(abs(fd), abs(flat_grad[i]), 1e-10)
            max_rel = max(max_rel, abs(fd - flat_grad[i]) / denom)
            checked += 1
    finally:
        net.set_flat(theta0)
    return GradientCheckReport(max_rel, checked, excluded)


# ---------------------------------------------------------------------------
# feature-statistics transfer
# ---------------------------------------------------------------------------


def adain(x, style_mean, style_std):
    """Re-center and re-scale a feature vector to target statistics.

    ``z = (style_std / std(x)) (x - mean(x)) + style_mean`` so that the
    output carries exactly the style mean and standard deviation. Raises on
    constant input (zero variance), where the transport is undefined.
    """
    x = np.asarray(x, dtype=float)
    s = x.std()
    if s == 0:
        raise ValueError("adain is undefined for a constant feature (std = 0)")
    return (style_std / s) * (x - x.mean()) + style_mean


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_MODEL_MAGIC = b"WNB1"


def save_network(net, path):
    """Write a network as a JSON header plus flat float64 parameter blob."""
    header = {
        "layer_dims": list(net.layer_dims),
        "activation": "antirectifier",
        "seed": net.seed,
        "param_count": net.num_params,
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(_MODEL_MAGIC + b"\n")
        f.write(f"{len(blob)}\n".encode())
        f.write(blob)
        f.write(b"\n")
        f.write(net.get_flat().astype("<f8").tobytes())


def load_network(path):
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != _MODEL_MAGIC:
            raise ValueError(f"not a weight-network blob: bad magic {magic!r}")
        n = int(f.readline())
        header = json.loads(f.read(n).decode())
        f.read(1)
        flat = np.frombuffer(f.read(), dtype="<f8")
    net = WeightNetwork(header["layer_dims"], seed=header.get("seed", 0))
    if flat.size != net.num_params:
        raise ValueError("parameter blob does not match the declared layer dims")
    net.set_flat(flat)
    return net
