"""Per-pixel floating-point operation counts of the beamformers.

Counts are reported under two multiply-add conventions:

* ``mac``  -- one fused multiply-add counts as 1 operation,
* ``flop`` -- multiply and add count separately (a dense layer of shape
  n_in x n_out costs ``2 n_in n_out + n_out``).

For the adaptive-weight network, the published per-pixel count for the
128-channel variant of this architecture (74,656 operations) is included as
``reference`` for comparison; the exact counting convention behind that
figure is not specified, so equality with either convention is not implied.
"""

import numpy as np

__all__ = ["flop_ledger", "DEFAULT_LAYER_DIMS_128", "REFERENCE_NETWORK_FLOPS"]

DEFAULT_LAYER_DIMS_128 = (128, 128, 32, 32, 128, 128)
REFERENCE_NETWORK_FLOPS = 74656


def _network_counts(layer_dims):
    """Dense + antirectifier cost of the weight network.

    Hidden activations double their width (antirectifier), so layer k has
    input dimension ``2 * layer_dims[k-1]`` for k >= 2. The antirectifier on
    an n-vector costs about 7n (mean removal, normalization, two
    rectifications) plus a square root and a division.
    """
    dims = list(layer_dims)
    mac = 0
    flop = 0
    act = 0
    n_in = dims[0]
    for i, n_out in enumerate(dims[1:], start=1):
        mac += n_in * n_out + n_out
        flop += 2 * n_in * n_out + n_out
        last = i == len(dims) - 1
        if not last:
            act += 7 * n_out + 2
            n_in = 2 * n_out
        else:
            n_in = n_out
    # applying the weights to the channel vector: one inner product
    c = dims[-1]
    return {
        "mac": mac + act + c,
        "flop": flop + act + (2 * c - 1),
        "dense_mac": mac,
        "dense_flop": flop,
        "activation": act,
    }


def flop_ledger(beamformer, num_channels, subarray_length=None, temporal_halfwidth=2,
                layer_dims=None):
    """Per-pixel operation counts for one beamformer.

    Args:
        beamformer: "das", "mvdr", or "network".
        num_channels: array channel count C.
        subarray_length: MVDR subaperture length (default C).
        temporal_halfwidth: covariance depth-averaging halfwidth K.
        layer_dims: network layer widths (default: the 128-channel layout
            scaled to C via :data:`DEFAULT_LAYER_DIMS_128`).

    Returns a dict of counts. For MVDR the cubic solve term is isolated as
    ``solve`` (L_sub^3) alongside the quadratic covariance/apply terms.
    """
    C = int(num_channels)
    if beamformer == "das":
        return {"beamformer": "das", "mac": C, "flop": 2 * C - 1}
    if beamformer == "mvdr":
        L = C if subarray_length is None else int(subarray_length)
        if not 1 <= L <= C:
            raise ValueError(f"subarray_length must be in [1, {C}]")
        n_sub = C - L + 1
        t = 2 * temporal_halfwidth + 1
        solve = L**3
        covariance = n_sub * t * L * L
        apply_w = n_sub * L
        return {
            "beamformer": "mvdr",
            "solve": solve,
            "covariance": covariance,
            "apply": apply_w,
            "mac": solve + covariance + apply_w,
            "flop": 2 * (solve + covariance + apply_w),
        }
    if beamformer == "network":
        if layer_dims is None:
            scale = C / 128.0
            layer_dims = tuple(
                max(1, int(round(d * scale))) for d in DEFAULT_LAYER_DIMS_128
            )
            layer_dims = (C,) + layer_dims[1:-1] + (C,)
        layer_dims = tuple(int(d) for d in layer_dims)
        if layer_dims[0] != C or layer_dims[-1] != C:
            raise ValueError("network input and output widths must equal the channel count")
        counts = _network_counts(layer_dims)
        counts.update(
            {
                "beamformer": "network",
                "layer_dims": layer_dims,
                "reference": REFERENCE_NETWORK_FLOPS if C == 128 else None,
            }
        )
        return counts
    raise ValueError(f"unknown beamformer {beamformer!r}")
