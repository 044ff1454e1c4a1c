"""Synthetic identity world: users with repeated latent "captures".

Identity lives in latent space (a shared base latent per user, samples are
Gaussian perturbations of it), so the extractor genuinely mediates how
separable users are in feature space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidConfigError
from .models import Extractor, FloatArray, Generator


@dataclass
class WorldUser:
    user_id: str
    samples: FloatArray  # (n_samples, latent_dim)


@dataclass
class SyntheticWorld:
    users: list[WorldUser]
    intra_class_sigma: float
    seed: int

    @property
    def latent_dim(self) -> int:
        return self.users[0].samples.shape[1]

    @property
    def samples_per_user(self) -> int:
        return self.users[0].samples.shape[0]

    def describe(self) -> dict:
        return {
            "kind": "synthetic",
            "n_users": len(self.users),
            "samples_per_user": self.samples_per_user,
            "latent_dim": self.latent_dim,
            "intra_class_sigma": self.intra_class_sigma,
            "seed": self.seed,
        }


def generate_world(
    n_users: int,
    samples_per_user: int,
    latent_dim: int,
    sigma: float,
    seed: int,
) -> SyntheticWorld:
    """Per user: base ~ N(0, I), samples = base + sigma * N(0, I)."""
    if n_users < 2:
        raise InvalidConfigError("need at least 2 users")
    if samples_per_user < 1:
        raise InvalidConfigError("need at least 1 sample per user")
    if latent_dim < 1:
        raise InvalidConfigError("latent_dim must be positive")
    if sigma < 0:
        raise InvalidConfigError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    users = []
    for i in range(n_users):
        base = rng.standard_normal(latent_dim)
        noise = rng.standard_normal((samples_per_user, latent_dim))
        users.append(WorldUser(f"user_{i:03d}", base[None, :] + sigma * noise))
    return SyntheticWorld(users=users, intra_class_sigma=sigma, seed=seed)


# Template store: user_id -> (n_samples, feature_dim) array. Sample 0 is the
# enrolled/compromised template; sample 1 is the type-II comparison sample.
TemplateStore = dict[str, FloatArray]


def enroll(
    world: SyntheticWorld, generator: Generator, extractor: Extractor
) -> TemplateStore:
    """Extract features for every sample of every user, batched per world."""
    all_latents = np.concatenate([u.samples for u in world.users], axis=0)
    images = np.asarray(generator.generate(all_latents), dtype=float)
    features = np.asarray(
        extractor.extract(images.reshape(len(all_latents), -1)), dtype=float
    )
    store: TemplateStore = {}
    offset = 0
    for user in world.users:
        k = user.samples.shape[0]
        store[user.user_id] = features[offset : offset + k]
        offset += k
    return store


def save_world(world: SyntheticWorld, path: str | Path) -> None:
    payload = {
        "seed": world.seed,
        "intra_class_sigma": world.intra_class_sigma,
        "latent_dim": world.latent_dim,
        "users": [
            {"user_id": u.user_id, "samples": u.samples.tolist()}
            for u in world.users
        ],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_world(path: str | Path) -> SyntheticWorld:
    payload = json.loads(Path(path).read_text())
    users = [
        WorldUser(u["user_id"], np.asarray(u["samples"], dtype=float))
        for u in payload["users"]
    ]
    return SyntheticWorld(
        users=users,
        intra_class_sigma=float(payload["intra_class_sigma"]),
        seed=int(payload["seed"]),
    )


def export_templates(store: TemplateStore, path: str | Path) -> None:
    """JSON-lines export: one {user_id, sample_index, vector} record per line.

    The same format imports real compromised templates.
    """
    with open(path, "w") as fh:
        for user_id in store:
            for idx, vector in enumerate(store[user_id]):
                record = {
                    "user_id": user_id,
                    "sample_index": idx,
                    "vector": vector.tolist(),
                }
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_templates(path: str | Path) -> TemplateStore:
    rows: dict[str, dict[int, list[float]]] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            rows.setdefault(record["user_id"], {})[int(record["sample_index"])] = record[
                "vector"
            ]
    store: TemplateStore = {}
    for user_id, by_index in rows.items():
        vectors = [by_index[i] for i in sorted(by_index)]
        store[user_id] = np.asarray(vectors, dtype=float)
    return store
