"""Reference oracle, implemented verbatim from PROTOCOL.md.

One PCG64 stream, two sign-fixed QR draws, einsum application, unit-norm
features. Kept free of any dependency on the client package: the protocol
document is the only shared contract.
"""

from __future__ import annotations

import numpy as np


def orthonormal_columns(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    gauss = rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(gauss)
    signs = np.where(np.diag(r) >= 0.0, 1.0, -1.0)
    return q * signs


class ReferenceOracle:
    """Linear-then-normalize generator/extractor pair, fixed by its seed."""

    model_name = "reference-oracle"
    normalized = True

    def __init__(self, latent_dim: int, feature_dim: int, image_dim: int, seed: int):
        if not 1 <= feature_dim <= latent_dim <= image_dim:
            raise ValueError(
                "dims must satisfy 1 <= feature_dim <= latent_dim <= image_dim, "
                f"got D={feature_dim}, L={latent_dim}, M={image_dim}"
            )
        self.latent_dim = latent_dim
        self.feature_dim = feature_dim
        self.image_shape = [image_dim]
        rng = np.random.default_rng(seed)
        self._gen_map = orthonormal_columns(rng, image_dim, latent_dim)
        basis = orthonormal_columns(rng, image_dim, image_dim)
        self._proj = basis[:, :feature_dim].T

    def generate(self, latents: np.ndarray) -> np.ndarray:
        return np.einsum("ij,kj->ik", latents, self._gen_map)

    def extract(self, images: np.ndarray) -> np.ndarray:
        raw = np.einsum("ij,kj->ik", images, self._proj)
        norms = np.sqrt(np.einsum("ij,ij->i", raw, raw))
        if (norms == 0.0).any():
            bad = int(np.flatnonzero(norms == 0.0)[0])
            raise ValueError(f"all-zero feature at batch row {bad}")
        return raw / norms[:, None]
