"""Classical and adaptive receive beamformers.

All combiners act per transmit event on TOF-migrated data and are compounded
afterwards. Per-pixel operations (covariance estimation, MVDR weights,
postfilters) are exposed directly; ``*_images`` drivers run them vectorized
over a whole :class:`~beamforge.migrate.DelayedDataTensor`.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._parallel import parallel_chunks
from .migrate import DelayedDataTensor

__all__ = [
    "ApodizationTensor",
    "BeamformedImage",
    "CovarianceEstimate",
    "window_weights",
    "das",
    "split_events",
    "estimate_covariance",
    "mvdr_weights",
    "eigenspace_mv",
    "subarray_output",
    "coherence_factor",
    "wiener_postfilter",
    "imap",
    "coherence_factor_map",
    "mvdr_images",
    "wiener_images",
    "imap_images",
    "compound",
    "beamform_image",
]

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class ApodizationTensor:
    """Apodization weights broadcastable to (E, C, Nx, Ny).

    Storage may be broadcast-compressed, e.g. (1, C, 1, 1) for a
    pixel-independent window. ``fallback`` flags pixels whose f-number
    aperture contained no channel and fell back to the nearest element.
    """

    w: np.ndarray
    fallback: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 4:
            raise ValueError(f"weights must be 4-D (E, C, Nx, Ny broadcastable), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("apodization weights must be finite")
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class BeamformedImage:
    """Beamformed RF image (pre-envelope), shape (Nx, Ny)."""

    y: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 2:
            raise ValueError(f"image must be 2-D, got {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("beamformed image must be finite")
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class CovarianceEstimate:
    """Spatially-averaged channel covariance for one pixel.

    ``R`` is symmetric (L_sub x L_sub); ``loading`` is the diagonal-loading
    fraction already applied; ``degenerate`` marks the all-zero-data
    fallback.
    """

    R: np.ndarray
    subarray_length: int
    loading: float
    degenerate: bool = False

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        L = self.subarray_length
        if R.shape != (L, L):
            raise ValueError(f"R must be ({L}, {L}), got {R.shape}")
        if not np.allclose(R, R.T, rtol=0, atol=1e-12 * max(1.0, np.abs(R).max())):
            raise ValueError("R must be symmetric")
        object.__setattr__(self, "R", 0.5 * (R + R.T))


def _window_profile(kind, xi):
    """Window value at normalized aperture position xi in [-1, 1]."""
    if kind == "boxcar":
        return np.ones_like(xi)
    if kind == "hann":
        return 0.5 + 0.5 * np.cos(np.pi * xi)
    if kind == "hamming":
        return 0.54 + 0.46 * np.cos(np.pi * xi)
    raise ValueError(f"unknown window kind {kind!r}")


def window_weights(kind, geometry, grid, f_number=0.0):
    """Engineered apodization with f-number aperture growth.

    With ``f_number == 0`` the window spans the full array and is identical
    for every pixel. Otherwise a pixel at depth x only uses channels within
    the half-aperture ``x / (2 f_number)`` around its lateral position, with
    the window profile stretched across that aperture. Weights are
    normalized to sum to 1 per pixel (per event).

    Pixels whose aperture contains no channel fall back to the nearest
    single channel and are flagged in ``fallback``.
    """
    if f_number < 0:
        raise ValueError("f_number must be >= 0")
    y_c = geometry.lateral_positions
    C = y_c.size

    if f_number == 0.0:
        center = 0.5 * (y_c[0] + y_c[-1])
        half = max(y_c[-1] - center, 1e-30)
        w = _window_profile(kind, (y_c - center) / half)
        w = w / w.sum()
        return ApodizationTensor(w.reshape(1, C, 1, 1))

    nx, ny = grid.shape
    x = grid.x_axis[:, None, None]  # (Nx, 1, 1)
    y_px = grid.y_axis[None, :, None]  # (1, Ny, 1)
    half = x / (2.0 * f_number)  # (Nx, 1, 1)
    offset = y_c[None, None, :] - y_px  # (Nx, Ny, C) broadcast
    inside = np.abs(offset) <= half
    xi = np.where(inside, offset / np.maximum(half, 1e-30), 0.0)
    w = np.where(inside, _window_profile(kind, xi), 0.0)

    wsum = w.sum(axis=-1, keepdims=True)
    empty = wsum[..., 0] <= 0.0
    if np.any(empty):
        nearest = np.argmin(np.abs(offset), axis=-1)
        ex, ey = np.nonzero(empty)
        w[ex, ey, :] = 0.0
        w[ex, ey, nearest[ex, ey]] = 1.0
        wsum = w.sum(axis=-1, keepdims=True)
    w = w / wsum
    return ApodizationTensor(
        np.moveaxis(w, -1, 0)[None, ...], fallback=empty if np.any(empty) else None
    )


def das(z, apod):
    """Delay-and-sum: y[px] = sum_e sum_c w[e,c,px] * z[e,c,px].

    Weights are renormalized per event and pixel over the valid samples, so
    masked channels and out-of-window samples are excluded without biasing
    the output level.
    """
    if not isinstance(z, DelayedDataTensor):
        raise ValueError("z must be a DelayedDataTensor")
    w = apod.w if isinstance(apod, ApodizationTensor) else np.asarray(apod, dtype=float)
    try:
        wv = np.broadcast_to(w, z.shape) * z.valid
    except ValueError:
        raise ValueError(f"weight shape {w.shape} does not broadcast to data shape {z.shape}")
    wsum = wv.sum(axis=1)  # (E, Nx, Ny)
    num = (wv * z.z).sum(axis=1)
    scale = np.abs(w).max()
    safe = np.abs(wsum) > 1e-12 * max(scale, 1e-30)
    y = np.where(safe, num / np.where(safe, wsum, 1.0), 0.0).sum(axis=0)
    return BeamformedImage(y, {"beamformer": "das"})


def split_events(z):
    """Per-event views of a DelayedDataTensor (each with E = 1)."""
    return [DelayedDataTensor(z.z[e : e + 1], z.valid[e : e + 1]) for e in range(z.shape[0])]


def estimate_covariance(z_context, subarray_length, loading=0.0):
    """Sub-array averaged covariance of one pixel's channel data.

    Args:
        z_context: (C,) channel vector, or (C, T) with a fast-time/depth
            neighborhood of T samples to average over.
        subarray_length: sliding subaperture length L_sub (1 <= L_sub <= C).
        loading: diagonal loading fraction; adds
            ``loading * trace(R) / L_sub`` to the diagonal.

    All-zero data falls back to a tiny identity, flagged ``degenerate``.
    """
    z = np.asarray(z_context, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2:
        raise ValueError("z_context must be (C,) or (C, T)")
    C, T = z.shape
    L = int(subarray_length)
    if not 1 <= L <= C:
        raise ValueError(f"subarray_length must be in [1, {C}], got {L}")
    if loading < 0:
        raise ValueError("loading must be >= 0")

    subs = sliding_window_view(z, L, axis=0)  # (C-L+1, T, L)
    flat = subs.reshape(-1, L)
    R = flat.T @ flat / flat.shape[0]
    tr = np.trace(R)
    if tr <= 0.0:
        return CovarianceEstimate(np.eye(L) * 1e-30, L, loading, degenerate=True)
    R = R + loading * (tr / L) * np.eye(L)
    return CovarianceEstimate(R, L, loading)


def mvdr_weights(cov):
    """Minimum-variance distortionless weights w = (R^-1 1) / (1' R^-1 1).

    The weights minimize the output power w' R w subject to the unit-gain
    constraint w' 1 = 1. Raises if the loaded covariance is ill-conditioned
    (condition number above 1e12); increase the diagonal loading in that
    case.
    """
    R = cov.R
    evals = np.linalg.eigvalsh(R)
    if evals[0] <= 0 or evals[-1] / evals[0] > _COND_LIMIT:
        raise np.linalg.LinAlgError(
            "covariance is ill-conditioned; increase the diagonal loading"
        )
    w0 = np.linalg.solve(R, np.ones(R.shape[0]))
    return w0 / w0.sum()


def eigenspace_mv(cov, w_mv, subspace_fraction):
    """Project MVDR weights onto the dominant eigenspace of the covariance.

    Keeps eigenvectors whose eigenvalue is at least
    ``subspace_fraction * lambda_max``; the projection is idempotent and the
    maximal eigenvector is always retained.
    """
    if not 0 < subspace_fraction <= 1:
        raise ValueError("subspace_fraction must be in (0, 1]")
    evals, evecs = np.linalg.eigh(cov.R)
    keep = evals >= subspace_fraction * evals[-1]
    basis = evecs[:, keep]
    return basis @ (basis.T @ np.asarray(w_mv, dtype=float))


def subarray_output(z_pixel, w):
    """Beamformed value: mean over sliding subarrays of w' z_sub."""
    z = np.asarray(z_pixel, dtype=float)
    w = np.asarray(w, dtype=float)
    subs = sliding_window_view(z, w.size)  # (C-L+1, L)
    return float(np.mean(subs @ w))


def coherence_factor(z_pixel):
    """Ratio of coherent to total energy across channels, in [0, 1].

    CF = |sum_c z_c|^2 / (C sum_c z_c^2); defined as 0 for all-zero input.
    """
    z = np.asarray(z_pixel, dtype=float)
    denom = z.size * np.sum(z**2)
    if denom == 0.0:
        return 0.0
    return float(np.sum(z) ** 2 / denom)


def wiener_postfilter(z_pixel, w_mv, noise_cov=None):
    """MMSE scaling of the MVDR output.

    The MVDR output is scaled by ``|A|^2 / (|A|^2 + w' R_n w)`` where the
    signal power |A|^2 is estimated as the squared MVDR output. With
    ``noise_cov=None`` the noise is taken as white with variance equal to
    the mean squared difference between the MVDR output and the channel
    samples. Returns 0 when signal and noise power are both zero.
    """
    z = np.asarray(z_pixel, dtype=float)
    w = np.asarray(w_mv, dtype=float)
    y = subarray_output(z, w)
    if noise_cov is None:
        sigma_n2 = float(np.mean((z - y) ** 2))
        noise_term = sigma_n2 * float(w @ w)
    else:
        noise_term = float(w @ np.asarray(noise_cov, dtype=float) @ w)
    denom = y * y + noise_term
    if denom == 0.0:
        return 0.0
    return float((y * y / denom) * y)


def imap(z_pixel, iterations=10, floor=None):
    """Iterative MAP shrinkage of the channel mean.

    Alternates signal/noise variance estimates with a Gaussian-prior gain:
    starting from the channel mean, each step computes
    ``sigma_a^2 = y^2 + floor``, ``sigma_n^2 = mean((z - y)^2)`` and updates
    ``y = sigma_a^2 / (sigma_a^2 + sigma_n^2) * mean(z)``. Stops after
    ``iterations`` or when the relative update falls below 1e-6.
    """
    z = np.asarray(z_pixel, dtype=float)
    if z.size < 1:
        raise ValueError("need at least one channel")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if floor is None:
        floor = 1e-12 * float(np.max(z**2, initial=0.0))
    mean = float(np.mean(z))
    y = mean
    for _ in range(iterations):
        sigma_a2 = y * y + floor
        sigma_n2 = float(np.mean((z - y) ** 2))
        denom = sigma_a2 + sigma_n2
        y_new = (sigma_a2 / denom) * mean if denom > 0.0 else 0.0
        done = abs(y_new - y) / (abs(y_new) + floor + 1e-300) < 1e-6
        y = y_new
        if done:
            break
    return y


# ---------------------------------------------------------------------------
# image-level drivers (vectorized over pixels, one output per transmit event)
# ---------------------------------------------------------------------------


def _depth_context(zc, K):
    """(Nx*Ny, C, 2K+1) depth-neighborhood context of every pixel.

    Neighbor indices are clamped at the depth edges; the window center is
    always the pixel's own depth.
    """
    C, nx, ny = zc.shape
    nbrs = np.clip(np.arange(nx)[:, None] + np.arange(-K, K + 1)[None, :], 0, nx - 1)
    ctx = zc[:, nbrs, :]  # (C, Nx, T, Ny)
    return np.ascontiguousarray(ctx.transpose(1, 3, 0, 2).reshape(nx * ny, C, 2 * K + 1))


def _mvdr_event(zc, L, K, delta, subspace_fraction=None):
    """Batched MVDR over the pixels of one event block zc (C, Nx, Ny).

    Returns (y, w) with y (Nx*Ny,) and w (Nx*Ny, L). With the default
    positive loading the condition number of the loaded covariance is
    analytically bounded by L/delta + 1, so no per-pixel check is needed;
    with delta == 0 an explicit eigenvalue check guards the solve.
    """
    C, nx, ny = zc.shape
    npx = nx * ny
    n_sub = C - L + 1
    T = 2 * K + 1
    ctx = _depth_context(zc, K)
    z_own = ctx[:, :, K]

    y = np.empty(npx)
    w_all = np.empty((npx, L))

    def work(indices):
        b = np.asarray(indices)
        sub = sliding_window_view(ctx[b], L, axis=1)  # (B, n_sub, T, L)
        X = sub.reshape(b.size, n_sub * T, L)
        R = np.matmul(X.transpose(0, 2, 1), X) / (n_sub * T)
        tr = np.trace(R, axis1=1, axis2=2)
        dead = tr <= 0.0
        lam = np.where(dead, 1e-30, delta * tr / L)
        idx = np.arange(L)
        R[:, idx, idx] += lam[:, None]
        if delta <= 0.0:
            evals = np.linalg.eigvalsh(R)
            bad = (evals[:, 0] <= 0) | (evals[:, -1] > _COND_LIMIT * evals[:, 0])
            if np.any(bad & ~dead):
                raise np.linalg.LinAlgError(
                    "covariance is ill-conditioned; increase the diagonal loading"
                )
        w0 = np.linalg.solve(R, np.ones((b.size, L, 1)))[:, :, 0]
        w = w0 / w0.sum(axis=1, keepdims=True)
        if subspace_fraction is not None:
            evals, evecs = np.linalg.eigh(R)
            keep = evals >= subspace_fraction * evals[:, -1:]
            coef = np.einsum("blk,bl->bk", evecs, w) * keep
            w = np.einsum("blk,bk->bl", evecs, coef)
        z_sub = sliding_window_view(z_own[b], L, axis=1)  # (B, n_sub, L)
        y[b] = np.einsum("bpl,bl->bp", z_sub, w).mean(axis=1)
        w_all[b] = w

    parallel_chunks(work, np.arange(npx), min_chunk=256)
    return y, w_all, z_own


def _resolve_mvdr_params(C, subarray_length, loading):
    L = C // 2 if subarray_length is None else int(subarray_length)
    if not 1 <= L <= C:
        raise ValueError(f"subarray_length must be in [1, {C}]")
    delta = 1.0 / (10.0 * L) if loading is None else float(loading)
    return L, delta


def mvdr_images(z, subarray_length=None, temporal_halfwidth=2, loading=None,
                subspace_fraction=None, return_weights=False):
    """Per-event MVDR (optionally eigenspace-projected) images.

    Defaults: L_sub = C // 2, temporal halfwidth K = 2 depth samples,
    diagonal loading 1 / (10 L_sub).
    """
    E, C, nx, ny = z.shape
    L, delta = _resolve_mvdr_params(C, subarray_length, loading)
    prov = {
        "beamformer": "eigenspace_mv" if subspace_fraction is not None else "mvdr",
        "subarray_length": L,
        "temporal_halfwidth": temporal_halfwidth,
        "loading": delta,
    }
    if subspace_fraction is not None:
        prov["subspace_fraction"] = subspace_fraction
    images, weights = [], []
    for e in range(E):
        y, w, _ = _mvdr_event(z.z[e], L, temporal_halfwidth, delta, subspace_fraction)
        images.append(BeamformedImage(y.reshape(nx, ny), dict(prov)))
        weights.append(w.reshape(nx, ny, L))
    if return_weights:
        return images, weights
    return images


def wiener_images(z, subarray_length=None, temporal_halfwidth=2, loading=None):
    """Per-event Wiener postfilter: MVDR scaled by its estimated SNR gain."""
    E, C, nx, ny = z.shape
    L, delta = _resolve_mvdr_params(C, subarray_length, loading)
    images = []
    for e in range(E):
        y, w, z_own = _mvdr_event(z.z[e], L, temporal_halfwidth, delta)
        sigma_n2 = np.mean((z_own - y[:, None]) ** 2, axis=1)
        noise_term = sigma_n2 * np.sum(w**2, axis=1)
        denom = y**2 + noise_term
        gain = np.divide(y**2, denom, out=np.zeros_like(y), where=denom > 0)
        images.append(
            BeamformedImage(
                (gain * y).reshape(nx, ny),
                {"beamformer": "wiener", "subarray_length": L, "loading": delta},
            )
        )
    return images


def imap_images(z, iterations=10):
    """Per-event iterative-MAP postfilter images (vectorized iteration)."""
    E, C, nx, ny = z.shape
    images = []
    for e in range(E):
        zc = z.z[e].reshape(C, -1)
        floor = 1e-12 * np.max(zc**2, axis=0, initial=0.0)
        mean = zc.mean(axis=0)
        y = mean.copy()
        for _ in range(iterations):
            sigma_a2 = y**2 + floor
            sigma_n2 = np.mean((zc - y[None, :]) ** 2, axis=0)
            denom = sigma_a2 + sigma_n2
            y = np.where(denom > 0, sigma_a2 / np.where(denom > 0, denom, 1.0) * mean, 0.0)
        images.append(
            BeamformedImage(y.reshape(nx, ny), {"beamformer": "imap", "iterations": iterations})
        )
    return images


def coherence_factor_map(z):
    """(E, Nx, Ny) coherence factor of each pixel, valid samples only."""
    count = z.valid.sum(axis=1)
    total = (z.z**2).sum(axis=1) * count
    coh = z.z.sum(axis=1) ** 2
    return np.divide(coh, total, out=np.zeros_like(coh), where=total > 0)


def compound(images, mode="mean"):
    """Combine per-event beamformed images pixelwise (coherent sum or mean)."""
    if len(images) == 0:
        raise ValueError("need at least one image")
    shape = images[0].y.shape
    for img in images:
        if img.y.shape != shape:
            raise ValueError("images must share the same grid")
    stack = np.stack([img.y for img in images])
    if mode == "coherent_sum":
        y = stack.sum(axis=0)
    elif mode == "mean":
        y = stack.mean(axis=0)
    else:
        raise ValueError(f"unknown compound mode {mode!r}")
    prov = dict(images[0].provenance)
    prov.update({"compound": mode, "events": len(images)})
    return BeamformedImage(y, prov)


def beamform_image(z, method="das", apod=None, compound_mode="mean", **params):
    """One-stop driver: per-event beamforming followed by compounding.

    ``method`` is one of das, das_cf, mvdr, eigenspace_mv, wiener, imap.
    ``apod`` (an :class:`ApodizationTensor`) is required for the DAS-based
    methods. Extra keyword arguments are forwarded to the per-event driver.
    """
    if method in ("das", "das_cf"):
        if apod is None:
            apod = ApodizationTensor(np.full((1, z.shape[1], 1, 1), 1.0 / z.shape[1]))
        imgs = [das(ze, apod) for ze in split_events(z)]
        if method == "das_cf":
            cf = coherence_factor_map(z)
            imgs = [
                BeamformedImage(img.y * cf[e], {**img.provenance, "beamformer": "das_cf"})
                for e, img in enumerate(imgs)
            ]
    elif method == "mvdr":
        imgs = mvdr_images(z, **params)
    elif method == "eigenspace_mv":
        params.setdefault("subspace_fraction", 0.5)
        imgs = mvdr_images(z, **params)
    elif method == "wiener":
        imgs = wiener_images(z, **params)
    elif method == "imap":
        imgs = imap_images(z, **params)
    else:
        raise ValueError(f"unknown beamformer {method!r}")
    return compound(imgs, compound_mode)
