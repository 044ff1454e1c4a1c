"""Client for driving a generator/extractor pair in a separate process.

Transport is the child's stdin/stdout with newline-delimited UTF-8 JSON, one
request in flight at a time. See PROTOCOL.md for the wire format. This keeps
the black-box assumption literal: the engine sees only batches in, batches
out, across a process boundary.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass

import numpy as np

from .errors import (
    BridgeTimeoutError,
    DimensionMismatchError,
    ProtocolError,
    ServerReportedError,
    VersionMismatchError,
)
from .models import FloatArray

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class BridgeSpec:
    latent_dim: int
    image_shape: tuple[int, ...]
    feature_dim: int
    normalized: bool
    model_name: str


class BridgeClient:
    """Owns one server process and one serial request channel to it."""

    def __init__(self, command: str | list[str], timeout: float = 30.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._lock = threading.Lock()
        self._spec: BridgeSpec | None = None
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
        )
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for raw in self._proc.stdout:
            self._lines.put(raw)
        self._lines.put(None)  # EOF sentinel: server exited or closed stdout

    def _request(self, payload: dict) -> dict:
        with self._lock:
            if self._proc.poll() is not None and self._lines.empty():
                raise ProtocolError("server process has exited")
            line = json.dumps(payload) + "\n"
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.write(line.encode("utf-8"))
                self._proc.stdin.flush()
            except (BrokenPipeError, ValueError) as exc:
                raise ProtocolError(f"cannot write to server: {exc}") from exc
            try:
                raw = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                raise BridgeTimeoutError(
                    f"no reply within {self.timeout:.1f}s"
                ) from None
        if raw is None:
            raise ProtocolError("server closed the connection mid-request")
        try:
            reply = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"reply is not valid JSON: {exc}") from exc
        if not isinstance(reply, dict) or "ok" not in reply:
            raise ProtocolError("reply lacks the 'ok' field")
        if not reply["ok"]:
            raise ServerReportedError(str(reply.get("error", "unspecified error")))
        return reply

    def handshake(self) -> BridgeSpec:
        reply = self._request({"op": "info"})
        version = reply.get("protocol", PROTOCOL_VERSION)
        if version != PROTOCOL_VERSION:
            raise VersionMismatchError(
                f"server speaks protocol {version}, client supports {PROTOCOL_VERSION}"
            )
        try:
            spec = BridgeSpec(
                latent_dim=int(reply["latent_dim"]),
                image_shape=tuple(int(d) for d in reply["image_shape"]),
                feature_dim=int(reply["feature_dim"]),
                normalized=bool(reply["normalized"]),
                model_name=str(reply.get("model_name", "unnamed")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed info reply: {exc}") from exc
        if spec.latent_dim < 1 or spec.feature_dim < 1 or not spec.image_shape:
            raise ProtocolError(f"info reply declares illegal dims: {spec}")
        self._spec = spec
        return spec

    @property
    def spec(self) -> BridgeSpec:
        if self._spec is None:
            self.handshake()
        return self._spec

    def generate(self, latents) -> FloatArray:
        spec = self.spec
        batch = np.asarray(latents, dtype=float)
        if batch.size == 0:
            batch = batch.reshape(0, spec.latent_dim)
        if batch.ndim != 2 or batch.shape[1] != spec.latent_dim:
            raise DimensionMismatchError(
                f"latent batch must have shape (n, {spec.latent_dim}), got {batch.shape}"
            )
        reply = self._request({"op": "generate", "latents": batch.tolist()})
        images = self._payload(reply, "images", int(np.prod(spec.image_shape)))
        return images.reshape(len(batch), *spec.image_shape)

    def extract(self, images) -> FloatArray:
        spec = self.spec
        flat_dim = int(np.prod(spec.image_shape))
        batch = np.asarray(images, dtype=float)
        if batch.size == 0:
            batch = batch.reshape(0, flat_dim)
        else:
            batch = batch.reshape(len(batch), -1)
        if batch.shape[1] != flat_dim:
            raise DimensionMismatchError(
                f"image batch must flatten to (n, {flat_dim}), got {batch.shape}"
            )
        reply = self._request({"op": "extract", "images": batch.tolist()})
        return self._payload(reply, "features", spec.feature_dim)

    @staticmethod
    def _payload(reply: dict, key: str, width: int) -> FloatArray:
        try:
            rows = reply[key]
            arr = np.asarray(rows, dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed {key} payload: {exc}") from exc
        if arr.size == 0:
            return arr.reshape(0, width)
        if arr.ndim != 2 or arr.shape[1] != width:
            raise ProtocolError(
                f"{key} payload has shape {arr.shape}, expected (n, {width})"
            )
        return arr

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
                self._proc.wait(timeout=2.0)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "BridgeClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class RemoteGenerator:
    """Generator-contract adapter over a bridge connection."""

    def __init__(self, client: BridgeClient):
        self._client = client
        spec = client.spec
        self.latent_dim = spec.latent_dim
        self.image_shape = spec.image_shape
        self.model_id = f"bridge:{spec.model_name}"

    def generate(self, latents) -> FloatArray:
        return self._client.generate(latents)


class RemoteExtractor:
    """Extractor-contract adapter over a bridge connection."""

    def __init__(self, client: BridgeClient):
        self._client = client
        spec = client.spec
        self.feature_dim = spec.feature_dim
        self.normalized = spec.normalized
        self.model_id = f"bridge:{spec.model_name}"

    def extract(self, images) -> FloatArray:
        return self._client.extract(images)


def connect(command: str | list[str], timeout: float = 30.0) -> tuple[
    RemoteGenerator, RemoteExtractor, BridgeClient
]:
    """Launch a server and return engine-ready model adapters plus the client
    handle (callers own closing it)."""
    client = BridgeClient(command, timeout=timeout)
    try:
        client.handshake()
    except Exception:
        client.close()
        raise
    return RemoteGenerator(client), RemoteExtractor(client), client
