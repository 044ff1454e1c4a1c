"""Black-box generator/extractor contracts, distances, and synthetic reference models.

The generator maps latent vectors to opaque "image" payloads; the extractor
maps images to feature vectors. Both are treated as pure black boxes by the
search engine. The synthetic oracles below stand in for real deep models at
desk scale: the orthonormal oracle has an exact preimage for any target built
from a known latent, the nonlinear one does not.
"""

from __future__ import annotations

import math
from typing import Callable, Protocol, runtime_checkable

import numpy as np

from .errors import DimensionMismatchError, InvalidConfigError, ZeroVectorError

FloatArray = np.ndarray


@runtime_checkable
class Generator(Protocol):
    """Maps a batch of latent vectors to a batch of image tensors."""

    latent_dim: int
    image_shape: tuple[int, ...]

    def generate(self, latents: FloatArray) -> FloatArray: ...


@runtime_checkable
class Extractor(Protocol):
    """Maps a batch of image tensors to a batch of feature vectors."""

    feature_dim: int
    normalized: bool

    def extract(self, images: FloatArray) -> FloatArray: ...


def _as_pair(a, b) -> tuple[FloatArray, FloatArray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or b.ndim != 1:
        raise DimensionMismatchError("expected 1-D vectors")
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def cosine_distance(a, b) -> float:
    """1 - cos(a, b), in [0, 2]. Raises on zero vectors or mismatched dims."""
    a, b = _as_pair(a, b)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine distance undefined for an all-zero vector")
    if np.array_equal(a, b):
        return 0.0
    sim = float(np.dot(a, b) / (na * nb))
    sim = max(-1.0, min(1.0, sim))
    return 1.0 - sim


def euclidean_distance(a, b) -> float:
    """L2 distance between two equal-length vectors."""
    a, b = _as_pair(a, b)
    return float(np.linalg.norm(a - b))


def normalized_similarity(a, b) -> float:
    """Affine rescale of cosine similarity onto [0, 1]: (1 + cos) / 2.

    This is the score scale used throughout the evaluation harness; thresholds
    calibrated on it are not transferable to any other normalization.
    """
    return 1.0 - cosine_distance(a, b) / 2.0


_METRICS: dict[str, Callable[[FloatArray, FloatArray], float]] = {
    "cosine": cosine_distance,
    "euclidean": euclidean_distance,
}


def resolve_metric(name: str) -> Callable[[FloatArray, FloatArray], float]:
    try:
        return _METRICS[name]
    except KeyError:
        raise InvalidConfigError(
            f"unknown distance metric {name!r}; expected one of {sorted(_METRICS)}"
        ) from None


def _apply_map(batch: FloatArray, matrix: FloatArray) -> FloatArray:
    # einsum keeps per-row reduction order independent of batch size, so
    # batched evaluation is bitwise identical to member-wise evaluation
    # (BLAS matmul does not guarantee that).
    return np.einsum("ij,kj->ik", batch, matrix)


def _check_batch(batch, dim: int, what: str) -> FloatArray:
    arr = np.asarray(batch, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, dim)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionMismatchError(
            f"{what} batch must have shape (n, {dim}), got {arr.shape}"
        )
    return arr


class LinearGenerator:
    """Applies a fixed matrix to each latent vector; the 'image' is a plain vector."""

    def __init__(self, matrix: FloatArray, model_id: str):
        self._matrix = np.asarray(matrix, dtype=float)
        self.latent_dim = self._matrix.shape[1]
        self.image_shape = (self._matrix.shape[0],)
        self.model_id = model_id

    def generate(self, latents: FloatArray) -> FloatArray:
        latents = _check_batch(latents, self.latent_dim, "latent")
        return _apply_map(latents, self._matrix)


class TanhGenerator:
    """Fixed linear map followed by entry-wise tanh; outputs stay in (-1, 1)."""

    def __init__(self, matrix: FloatArray, model_id: str):
        self._matrix = np.asarray(matrix, dtype=float)
        self.latent_dim = self._matrix.shape[1]
        self.image_shape = (self._matrix.shape[0],)
        self.model_id = model_id

    def generate(self, latents: FloatArray) -> FloatArray:
        latents = _check_batch(latents, self.latent_dim, "latent")
        return np.tanh(_apply_map(latents, self._matrix))


class ProjectionExtractor:
    """Row-orthonormal projection of the image followed by L2 normalization."""

    normalized = True

    def __init__(self, matrix: FloatArray, model_id: str):
        self._matrix = np.asarray(matrix, dtype=float)
        self.feature_dim = self._matrix.shape[0]
        self.image_dim = self._matrix.shape[1]
        self.model_id = model_id

    def extract(self, images: FloatArray) -> FloatArray:
        images = _check_batch(images, self.image_dim, "image")
        raw = _apply_map(images, self._matrix)
        norms = np.sqrt(np.einsum("ij,ij->i", raw, raw))
        bad = np.flatnonzero(norms == 0.0)
        if bad.size:
            raise ZeroVectorError(
                f"extractor produced an all-zero feature at batch index {int(bad[0])}"
            )
        return raw / norms[:, None]


def _orthonormal_columns(rng: np.random.Generator, rows: int, cols: int) -> FloatArray:
    """QR-orthonormalized Gaussian draw, sign-fixed so the result is canonical."""
    gauss = rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(gauss)
    signs = np.where(np.diag(r) >= 0.0, 1.0, -1.0)
    return q * signs


def _check_dims(latent_dim: int, feature_dim: int, image_dim: int) -> None:
    if not (1 <= feature_dim <= latent_dim <= image_dim):
        raise InvalidConfigError(
            "oracle dims must satisfy 1 <= feature_dim <= latent_dim <= image_dim, "
            f"got feature_dim={feature_dim}, latent_dim={latent_dim}, image_dim={image_dim}"
        )


def make_orthonormal_oracle(
    latent_dim: int,
    feature_dim: int,
    seed: int,
    image_dim: int | None = None,
) -> tuple[LinearGenerator, ProjectionExtractor]:
    """Linear-then-normalize reference pipeline with an exact preimage.

    The generator applies a column-orthonormal map (latent -> image), the
    extractor a row-orthonormal projection (image -> feature) plus unit-norm
    normalization. Any target built as extract(generate(z*)) is attained
    exactly at z*, which makes the global optimum of the search known.

    The construction is fully determined by the seed; see PROTOCOL.md for the
    exact draw order, which external servers re-implement verbatim.
    """
    image_dim = latent_dim if image_dim is None else image_dim
    _check_dims(latent_dim, feature_dim, image_dim)
    rng = np.random.default_rng(seed)
    gen_map = _orthonormal_columns(rng, image_dim, latent_dim)
    basis = _orthonormal_columns(rng, image_dim, image_dim)
    proj = basis[:, :feature_dim].T
    tag = f"orthonormal(L={latent_dim},D={feature_dim},M={image_dim},seed={seed})"
    return LinearGenerator(gen_map, tag), ProjectionExtractor(proj, tag)


def make_nonlinear_oracle(
    latent_dim: int,
    feature_dim: int,
    seed: int,
    image_dim: int | None = None,
) -> tuple[TanhGenerator, ProjectionExtractor]:
    """Non-convex reference pipeline: random linear map, tanh, then projection.

    No closed-form preimage exists, so this oracle stresses the search on a
    landscape with genuine local structure. The 1/sqrt(latent_dim) scaling
    keeps pre-activations near unit variance and tanh away from saturation.
    """
    image_dim = latent_dim if image_dim is None else image_dim
    _check_dims(latent_dim, feature_dim, image_dim)
    rng = np.random.default_rng(seed)
    gen_map = rng.standard_normal((image_dim, latent_dim)) / math.sqrt(latent_dim)
    basis = _orthonormal_columns(rng, image_dim, image_dim)
    proj = basis[:, :feature_dim].T
    tag = f"nonlinear(L={latent_dim},D={feature_dim},M={image_dim},seed={seed})"
    return TanhGenerator(gen_map, tag), ProjectionExtractor(proj, tag)
