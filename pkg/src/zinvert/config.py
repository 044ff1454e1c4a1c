"""Run configuration: file loading, flag overrides, and model resolution.

A run is described by one TOML or JSON file; command-line flags override file
values, which override defaults. The resolved configuration has a canonical
dict form whose hash is embedded in every output file.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import bridge as bridge_mod
from .engine import GaConfig
from .errors import InvalidConfigError
from .models import make_nonlinear_oracle, make_orthonormal_oracle

ORACLE_KINDS = ("orthonormal-oracle", "nonlinear-oracle")
MODEL_KINDS = ORACLE_KINDS + ("bridge",)


@dataclass(frozen=True)
class ModelChoice:
    kind: str = "orthonormal-oracle"
    latent_dim: int = 16
    feature_dim: int = 8
    image_dim: int | None = None
    seed: int = 0
    command: str | None = None  # bridge only
    timeout: float = 30.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvalidConfigError(
                f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}"
            )
        if self.kind == "bridge" and not self.command:
            raise InvalidConfigError("bridge model needs a 'command' line")

    def to_dict(self) -> dict:
        if self.kind == "bridge":
            return {"kind": self.kind, "command": self.command}
        return {
            "kind": self.kind,
            "latent_dim": self.latent_dim,
            "feature_dim": self.feature_dim,
            "image_dim": self.image_dim,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class WorldConfig:
    n_users: int = 10
    samples_per_user: int = 2
    latent_dim: int | None = None  # defaults to the generator's latent dim
    sigma: float = 0.1
    seed: int = 1

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunConfig:
    ga: GaConfig = field(default_factory=GaConfig)
    sysc: ModelChoice = field(default_factory=ModelChoice)
    syst: ModelChoice = field(default_factory=ModelChoice)
    world: WorldConfig = field(default_factory=WorldConfig)
    templates_c: str | None = None
    templates_t: str | None = None
    far_targets: list[float] = field(default_factory=lambda: [0.0, 0.001, 0.01, 0.1])
    roc_grid: int = 50
    bins: int = 20
    max_imposter_pairs: int | None = None
    ablate_repeats: int = 10
    figures: bool = True

    def __post_init__(self):
        if sorted(self.far_targets) != list(self.far_targets):
            raise InvalidConfigError("far_targets must be sorted ascending")
        for far in self.far_targets:
            if not 0.0 <= far <= 1.0:
                raise InvalidConfigError(f"far target {far} outside [0, 1]")
        if (self.templates_c is None) != (self.templates_t is None):
            raise InvalidConfigError(
                "template-file mode needs both templates_c and templates_t"
            )

    def digest_payload(self, **command_params) -> dict:
        payload = {
            "ga": dataclasses.asdict(self.ga),
            "models": {"sysc": self.sysc.to_dict(), "syst": self.syst.to_dict()},
            "far_targets": list(self.far_targets),
            "roc_grid": self.roc_grid,
            "bins": self.bins,
            "max_imposter_pairs": self.max_imposter_pairs,
        }
        if self.templates_c is not None:
            payload["templates"] = {"sysc": self.templates_c, "syst": self.templates_t}
        else:
            payload["world"] = self.world.to_dict()
        payload.update(command_params)
        return payload


def _mapping_or_empty(data: dict, key: str) -> dict:
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise InvalidConfigError(f"config section {key!r} must be a table/object")
    return value


def _build(cls, data: dict, what: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise InvalidConfigError(f"unknown {what} keys: {sorted(unknown)}")
    return cls(**data)


def config_from_mapping(data: dict) -> RunConfig:
    data = dict(data)
    ga = _build(GaConfig, _mapping_or_empty(data, "ga"), "ga")
    models = _mapping_or_empty(data, "models")
    sysc = _build(ModelChoice, _mapping_or_empty(models, "sysc"), "models.sysc")
    syst_map = _mapping_or_empty(models, "syst")
    syst = _build(ModelChoice, syst_map, "models.syst") if syst_map else sysc
    world = _build(WorldConfig, _mapping_or_empty(data, "world"), "world")
    templates = _mapping_or_empty(data, "templates")
    known = {
        "far_targets",
        "roc_grid",
        "bins",
        "max_imposter_pairs",
        "ablate_repeats",
        "figures",
    }
    unknown = set(data) - known - {"ga", "models", "world", "templates"}
    if unknown:
        raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {k: data[k] for k in known if k in data}
    if "far_targets" in kwargs:
        kwargs["far_targets"] = [float(f) for f in kwargs["far_targets"]]
    return RunConfig(
        ga=ga,
        sysc=sysc,
        syst=syst,
        world=world,
        templates_c=templates.get("sysc"),
        templates_t=templates.get("syst"),
        **kwargs,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise InvalidConfigError(f"config file not found: {path}")
    if path.suffix == ".toml":
        data = tomllib.loads(path.read_text())
    elif path.suffix == ".json":
        data = json.loads(path.read_text())
    else:
        raise InvalidConfigError(
            f"config must be a .toml or .json file, got {path.suffix!r}"
        )
    return config_from_mapping(data)


@dataclass
class ResolvedModels:
    """Engine-ready models plus the bridge clients that must be closed."""

    generator: object
    sysc_extractor: object
    syst_extractor: object
    clients: list = field(default_factory=list)

    def close(self) -> None:
        for client in self.clients:
            client.close()

    def __enter__(self) -> "ResolvedModels":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _resolve_one(choice: ModelChoice):
    if choice.kind == "orthonormal-oracle":
        gen, ext = make_orthonormal_oracle(
            choice.latent_dim, choice.feature_dim, choice.seed, choice.image_dim
        )
        return gen, ext, None
    if choice.kind == "nonlinear-oracle":
        gen, ext = make_nonlinear_oracle(
            choice.latent_dim, choice.feature_dim, choice.seed, choice.image_dim
        )
        return gen, ext, None
    gen, ext, client = bridge_mod.connect(choice.command, timeout=choice.timeout)
    return gen, ext, client


def resolve_models(config: RunConfig, need_syst: bool = True) -> ResolvedModels:
    """Build the attack generator and both extractors.

    The generator always comes from the compromised-system choice; the
    targeted system contributes only its extractor, which must accept the
    generator's image payloads.
    """
    gen, ext_c, client_c = _resolve_one(config.sysc)
    clients = [c for c in (client_c,) if c is not None]
    if not need_syst or config.syst == config.sysc:
        return ResolvedModels(gen, ext_c, ext_c, clients)
    try:
        _, ext_t, client_t = _resolve_one(config.syst)
    except Exception:
        for c in clients:
            c.close()
        raise
    if client_t is not None:
        clients.append(client_t)
    image_dim = int(np.prod(gen.image_shape))
    ext_t_dim = getattr(ext_t, "image_dim", image_dim)
    if ext_t_dim != image_dim:
        for c in clients:
            c.close()
        raise InvalidConfigError(
            "targeted-system extractor expects images of size "
            f"{ext_t_dim}, generator produces {image_dim}"
        )
    return ResolvedModels(gen, ext_c, ext_t, clients)
