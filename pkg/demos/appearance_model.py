"""Tour of the sparse-coding histogram appearance model.

Samples a patch dictionary from a textured window, encodes patches with
the nonnegative LASSO, pools coefficients into histogram weights, applies
the spatial kernel, and prints the mixed ground-distance matrix that the
EMD consumes.
"""

import numpy as np

from emdtrack import (
    GroundParams,
    PatchScheme,
    build_dictionary,
    build_histogram,
    encode_patch,
    ground_distance_matrix,
    kernel_weight_gradient,
    kernel_weights,
    max_alignment_pool,
)
from emdtrack.appearance import extract_patches


def textured(rng, shape):
    img = rng.random(shape)
    for _ in range(2):
        img = (img + np.roll(img, 1, 0) + np.roll(img, 1, 1)) / 3.0
    img -= img.min()
    return img / img.max()


rng = np.random.default_rng(7)
scheme = PatchScheme(patch_height=8, patch_width=8, step=4,
                     window_height=16, window_width=16)
print(f"patch grid: {scheme.patch_count} patches of {scheme.patch_pixels} px")

window = textured(rng, (16, 16))
second = textured(rng, (16, 16))
dictionary = build_dictionary([window, second], scheme)
print(f"dictionary: {dictionary.atoms.shape[1]} atoms "
      f"({dictionary.template_count} templates x {scheme.patch_count} positions)")

# Encode one patch against the raw atoms and pool it.
patch = extract_patches(window, scheme)[:, 0]
code = encode_patch(patch, dictionary, lam=0.01)
weight, position = max_alignment_pool(code, dictionary.template_count,
                                      scheme.patch_count)
nonzero = int((code.coefficients > 1e-9).sum())
print(f"\nencoded patch 1: {nonzero} active atoms, "
      f"pooled weight {weight:.3f} at grid position {position}")

# Full histogram: weights sum to one, each bin keeps pixels and a center.
signature = build_histogram(window, dictionary, lam=0.01)
print("\nhistogram weights:", np.round(signature.weights, 3))
print("bin centers (relative to window center):")
print(signature.centers)

params = GroundParams(alpha=0.5, bandwidth=0.5 * np.hypot(16, 16),
                      spatial_scale=1.0 / np.hypot(16, 16),
                      feature_scale=1.0 / scheme.patch_pixels)
weighted = kernel_weights(signature, [0.0, 0.0], params)
print("\nkernel-weighted:", np.round(weighted, 3),
      "(center bins now dominate)")

grads = kernel_weight_gradient(signature, [0.0, 0.0], params)
print("per-bin displacement gradients:\n", np.round(grads, 4))

other = build_histogram(second, dictionary, lam=0.01)
costs = ground_distance_matrix(signature, other, params)
print("\nground distance between the two windows' signatures:")
print(np.round(costs, 3))
print("diagonal (same grid position, feature term only):",
      np.round(np.diag(costs), 3))
