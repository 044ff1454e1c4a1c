"""Scriptable stdio servers for exercising the bridge client.

Modes:
  oracle L D SEED [IMAGE_DIM]  serve the in-process reference oracle
  crash-after N                like oracle 8 4 0, but exit after N requests
  garbage                      reply with a non-JSON line
  badfields                    info reply missing required fields
  badversion                   info reply declaring protocol 99
  error                        reply ok=false to everything
  silent                       read requests, never reply
"""

import json
import sys

import numpy as np

from zinvert.models import make_orthonormal_oracle


def send(payload):
    sys.stdout.write(json.dumps(payload) + "\n")
    sys.stdout.flush()


def serve_oracle(latent_dim, feature_dim, seed, image_dim=None, max_requests=None):
    gen, ext = make_orthonormal_oracle(latent_dim, feature_dim, seed, image_dim)
    handled = 0
    for line in sys.stdin:
        handled += 1
        if max_requests is not None and handled > max_requests:
            return  # simulate a crash mid-conversation
        try:
            request = json.loads(line)
        except json.JSONDecodeError:
            send({"ok": False, "error": "request is not valid JSON"})
            continue
        op = request.get("op")
        if op == "info":
            send(
                {
                    "ok": True,
                    "protocol": 1,
                    "latent_dim": gen.latent_dim,
                    "image_shape": list(gen.image_shape),
                    "feature_dim": ext.feature_dim,
                    "normalized": ext.normalized,
                    "model_name": "stub-oracle",
                }
            )
        elif op == "generate":
            latents = np.asarray(request.get("latents", []), dtype=float)
            if latents.size == 0:
                send({"ok": True, "images": []})
                continue
            send({"ok": True, "images": gen.generate(latents).tolist()})
        elif op == "extract":
            images = np.asarray(request.get("images", []), dtype=float)
            if images.size == 0:
                send({"ok": True, "features": []})
                continue
            send({"ok": True, "features": ext.extract(images).tolist()})
        else:
            send({"ok": False, "error": f"unknown op {op!r}"})


def main():
    mode = sys.argv[1]
    if mode == "oracle":
        dims = [int(v) for v in sys.argv[2:]]
        image_dim = dims[3] if len(dims) > 3 else None
        serve_oracle(dims[0], dims[1], dims[2], image_dim)
    elif mode == "crash-after":
        serve_oracle(8, 4, 0, max_requests=int(sys.argv[2]))
    elif mode == "garbage":
        for _ in sys.stdin:
            sys.stdout.write("this is not json\n")
            sys.stdout.flush()
    elif mode == "badfields":
        for _ in sys.stdin:
            send({"ok": True, "latent_dim": 8})
    elif mode == "badversion":
        for _ in sys.stdin:
            send(
                {
                    "ok": True,
                    "protocol": 99,
                    "latent_dim": 8,
                    "image_shape": [8],
                    "feature_dim": 4,
                    "normalized": True,
                    "model_name": "future",
                }
            )
    elif mode == "error":
        for _ in sys.stdin:
            send({"ok": False, "error": "deliberate failure"})
    elif mode == "silent":
        for _ in sys.stdin:
            pass
    else:
        raise SystemExit(f"unknown stub mode {mode!r}")


if __name__ == "__main__":
    main()
