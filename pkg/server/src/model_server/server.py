"""Request loop for the stdio JSON model protocol (PROTOCOL.md, version 1).

One line in, one line out, strictly in order. Bad input of any kind gets an
ok=false reply; the loop never dies on a request.
"""

from __future__ import annotations

import argparse
import importlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .oracle import ReferenceOracle

PROTOCOL_VERSION = 1


@dataclass
class ServerConfig:
    latent_dim: int = 8
    image_shape: list[int] = field(default_factory=lambda: [16])
    feature_dim: int = 8
    seed: int = 0
    kind: str = "oracle"  # oracle | hook
    hook: str | None = None  # "package.module:factory" for kind=hook

    @classmethod
    def from_file(cls, path: str | Path) -> "ServerConfig":
        data = json.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def build_model(config: ServerConfig):
    if config.kind == "oracle":
        image_dim = int(np.prod(config.image_shape))
        return ReferenceOracle(
            config.latent_dim, config.feature_dim, image_dim, config.seed
        )
    if config.kind == "hook":
        if not config.hook:
            raise ValueError("kind=hook needs a 'hook' entry 'module:factory'")
        module_name, _, attr = config.hook.partition(":")
        factory = getattr(importlib.import_module(module_name), attr)
        return factory(config)
    raise ValueError(f"unknown model kind {config.kind!r}")


def _batch(payload, width: int, what: str) -> np.ndarray:
    arr = np.asarray(payload, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, width)
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ValueError(f"{what} batch must have shape (n, {width}), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{what} batch contains non-finite values")
    return arr


def handle_request(request: dict, model, config: ServerConfig) -> dict:
    op = request.get("op")
    if op == "info":
        return {
            "ok": True,
            "protocol": PROTOCOL_VERSION,
            "latent_dim": model.latent_dim,
            "image_shape": list(model.image_shape),
            "feature_dim": model.feature_dim,
            "normalized": bool(model.normalized),
            "model_name": str(model.model_name),
        }
    if op == "generate":
        latents = _batch(request.get("latents", []), model.latent_dim, "latent")
        images = np.asarray(model.generate(latents), dtype=float)
        return {"ok": True, "images": images.reshape(len(latents), -1).tolist()
                if len(latents) else []}
    if op == "extract":
        width = int(np.prod(model.image_shape))
        images = _batch(request.get("images", []), width, "image")
        features = np.asarray(model.extract(images), dtype=float)
        return {"ok": True, "features": features.tolist() if len(images) else []}
    return {"ok": False, "error": f"unknown op {op!r}"}


def serve(config: ServerConfig, stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    model = build_model(config)
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
        except (json.JSONDecodeError, ValueError) as exc:
            reply = {"ok": False, "error": f"bad request: {exc}"}
        else:
            try:
                reply = handle_request(request, model, config)
            except Exception as exc:  # noqa: BLE001  (loop must survive anything)
                reply = {"ok": False, "error": str(exc)}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="model-server",
        description="Serve a generator/extractor pair over stdio JSON.",
    )
    parser.add_argument("--config", required=True, help="JSON server configuration")
    args = parser.parse_args(argv)
    try:
        config = ServerConfig.from_file(args.config)
        serve(config)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"model-server: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
