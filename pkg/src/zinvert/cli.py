"""Command-line front end: invert, attack, ablate, roc.

Every command writes its artifacts into --out, stamps them with the resolved
config digest, and is deterministic under a fixed seed. Errors leave as JSON
on stderr with exit code 1 (internal), 2 (user input) or 3 (bridge/protocol).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import figures, reporting
from .config import RunConfig, config_from_mapping, resolve_models
from .engine import run_inversion, run_inversion_multi
from .errors import (
    BridgeError,
    DimensionMismatchError,
    EmptyScoresError,
    InsufficientSamplesError,
    InvalidAxisError,
    InvalidConfigError,
    ZinvertError,
)
from .evaluation import emit_distributions, emit_roc, run_attack_from_templates, run_attack_simulation
from .models import euclidean_distance, normalized_similarity
from .world import generate_world, load_templates

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USER = 2
EXIT_BRIDGE = 3


class ParseError(ZinvertError):
    """A user-supplied file could not be parsed."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zinvert",
        description=(
            "Reconstruct generator latents whose features match a compromised "
            "template, and evaluate the resulting impersonation risk."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="TOML or JSON run configuration")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, help="override the search seed")
        p.add_argument(
            "--metric", choices=["cosine", "euclidean"], help="override the fitness metric"
        )
        p.add_argument(
            "--bridge-cmd",
            help="serve both systems' models from this external command",
        )
        p.add_argument(
            "--no-figures", action="store_true", help="skip rendering PNG figures"
        )

    p_invert = sub.add_parser("invert", help="invert a single template")
    common(p_invert)
    p_invert.add_argument("--template", type=Path, help='JSON file {"vector": [...]}')
    p_invert.add_argument(
        "--target-seed",
        type=int,
        help="synthesize the target from a seeded latent instead of a file",
    )
    p_invert.add_argument("--restarts", type=int, help="override restart count")

    p_attack = sub.add_parser("attack", help="run the full attack simulation")
    common(p_attack)
    p_attack.add_argument(
        "--far",
        action="append",
        help="FAR target(s), comma separated; repeatable",
    )

    p_ablate = sub.add_parser("ablate", help="sweep one search parameter")
    common(p_ablate)
    p_ablate.add_argument(
        "--axis", required=True, choices=["population", "crossover", "mutation"]
    )
    p_ablate.add_argument(
        "--values", required=True, help="comma-separated sweep values"
    )
    p_ablate.add_argument("--repeats", type=int, help="seeded repeats per value")
    p_ablate.add_argument(
        "--report-metric",
        choices=["fitness", "mse"],
        default="fitness",
        help="report the raw final fitness or the feature-space MSE",
    )

    p_roc = sub.add_parser("roc", help="recompute ROC/distribution tables from scores")
    common(p_roc)
    p_roc.add_argument("--scores", type=Path, required=True, help="scores.csv file")
    p_roc.add_argument("--grid", type=int, default=50, help="ROC grid size")
    p_roc.add_argument("--bins", type=int, default=20, help="histogram bins")

    return parser


def _load_mapping(path: Path | None) -> dict:
    # Keep the raw mapping so flag overrides can be layered before
    # validation happens in config_from_mapping.
    if path is None:
        return {}
    if not path.exists():
        raise InvalidConfigError(f"config file not found: {path}")
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            return tomllib.loads(path.read_text())
        except Exception as exc:
            raise ParseError(f"cannot parse {path}: {exc}") from exc
    if path.suffix == ".json":
        try:
            return json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"cannot parse {path}: {exc}") from exc
    raise InvalidConfigError(f"config must be .toml or .json, got {path.suffix!r}")


def _apply_overrides(mapping: dict, args: argparse.Namespace) -> RunConfig:
    mapping = json.loads(json.dumps(mapping))  # deep copy, plain types
    ga = mapping.setdefault("ga", {})
    if args.seed is not None:
        ga["rng_seed"] = args.seed
    if args.metric is not None:
        ga["distance_metric"] = args.metric
    if getattr(args, "restarts", None) is not None:
        ga["restarts"] = args.restarts
    if args.bridge_cmd:
        mapping.setdefault("models", {})["sysc"] = {
            "kind": "bridge",
            "command": args.bridge_cmd,
        }
        mapping["models"]["syst"] = {"kind": "bridge", "command": args.bridge_cmd}
    fars = getattr(args, "far", None)
    if fars:
        values = []
        for chunk in fars:
            values.extend(float(v) for v in chunk.split(",") if v)
        mapping["far_targets"] = sorted(values)
    if args.no_figures:
        mapping["figures"] = False
    return config_from_mapping(mapping)


def _read_template(path: Path) -> np.ndarray:
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot parse template file {path}: {exc}") from exc
    if not isinstance(payload, dict) or "vector" not in payload:
        raise ParseError(f'template file {path} must be a JSON object with a "vector"')
    vector = np.asarray(payload["vector"], dtype=float)
    if vector.ndim != 1 or vector.size == 0 or not np.isfinite(vector).all():
        raise ParseError(f"template file {path} holds no finite 1-D vector")
    return vector


def cmd_invert(args: argparse.Namespace) -> int:
    config = _apply_overrides(_load_mapping(args.config), args)
    if (args.template is None) == (args.target_seed is None):
        raise InvalidConfigError("provide exactly one of --template or --target-seed")
    out = _prepare_out(args.out)

    with resolve_models(config, need_syst=False) as models:
        gen, ext = models.generator, models.sysc_extractor
        if args.target_seed is not None:
            z_true = np.random.default_rng(args.target_seed).standard_normal(
                gen.latent_dim
            )
            image = np.asarray(gen.generate(z_true[None, :]), dtype=float)
            target = np.asarray(ext.extract(image.reshape(1, -1)), dtype=float)[0]
            source = {"target_seed": args.target_seed}
        else:
            target = _read_template(args.template)
            if target.shape != (ext.feature_dim,):
                raise DimensionMismatchError(
                    f"template has dim {target.shape[0]}, extractor expects "
                    f"{ext.feature_dim}"
                )
            source = {"template": str(args.template)}

        digest = reporting.config_digest(
            config.digest_payload(command="invert", **source)
        )
        multi = run_inversion_multi(target, gen, ext, config.ga)
        best = multi.best
        recon_image = np.asarray(gen.generate(best.best_latent[None, :]), dtype=float)
        recon_feature = np.asarray(
            ext.extract(recon_image.reshape(1, -1)), dtype=float
        )[0]
        similarity = normalized_similarity(recon_feature, target)

    reporting.write_latent_json(
        best.best_latent, best.best_fitness, similarity, multi.best_index, digest,
        out / "best_latent.json",
    )
    reporting.write_trace_csv(best.trace, out / "trace.csv", digest)
    if config.ga.restarts > 1:
        for k, run in enumerate(multi.runs):
            reporting.write_trace_csv(run.trace, out / f"trace_restart{k}.csv", digest)
    summary = {
        "config_digest": digest,
        "similarity": similarity,
        "fitness": best.best_fitness,
        "best_restart": multi.best_index,
        "metric": config.ga.distance_metric,
        "restarts": [
            {
                "final_fitness": run.best_fitness,
                "generations": run.trace.generations,
                "terminated_by": run.trace.terminated_by,
            }
            for run in multi.runs
        ],
    }
    summary.update(source)
    reporting.write_json(summary, out / "summary.json")
    if config.figures:
        figures.save_trace_figure(multi.traces, out / "trace.png")
    print(f"inverted: similarity={similarity:.4f} fitness={best.best_fitness:.6f}")
    print(f"artifacts in {out}")
    return EXIT_OK


def cmd_attack(args: argparse.Namespace) -> int:
    config = _apply_overrides(_load_mapping(args.config), args)
    out = _prepare_out(args.out)
    digest = reporting.config_digest(config.digest_payload(command="attack"))

    with resolve_models(config) as models:
        gen = models.generator
        if config.templates_c is not None:
            store_c = load_templates(config.templates_c)
            store_t = load_templates(config.templates_t)
            result = run_attack_from_templates(
                store_c,
                store_t,
                gen,
                models.sysc_extractor,
                models.syst_extractor,
                config.ga,
                config.far_targets,
                config.max_imposter_pairs,
                metadata={"config_digest": digest},
            )
        else:
            latent_dim = config.world.latent_dim or gen.latent_dim
            if latent_dim != gen.latent_dim:
                raise InvalidConfigError(
                    f"world latent_dim {latent_dim} does not match the "
                    f"generator's {gen.latent_dim}"
                )
            world = generate_world(
                config.world.n_users,
                config.world.samples_per_user,
                latent_dim,
                config.world.sigma,
                config.world.seed,
            )
            result = run_attack_simulation(
                world,
                gen,
                models.sysc_extractor,
                models.syst_extractor,
                config.ga,
                config.far_targets,
                config.max_imposter_pairs,
                metadata={"config_digest": digest},
            )

    (out / "report.json").write_text(result.report.to_json())
    reporting.write_scores_csv(result.scores, out / "scores.csv", digest)
    roc_rows = emit_roc(result.scores, config.roc_grid)
    reporting.write_roc_csv(roc_rows, out / "roc.csv", digest)
    hist_rows = emit_distributions(result.scores, config.bins)
    reporting.write_distributions_csv(hist_rows, out / "distributions.csv", digest)
    if config.figures:
        figures.save_roc_figure(roc_rows, out / "roc.png")
        figures.save_distributions_figure(hist_rows, out / "distributions.png")
    for point in result.report.operating_points:
        print(
            f"FAR<={point.far_target:g}: threshold={point.threshold:.4f} "
            f"TAR={point.tar:.4f} SAR1={point.sar_type1:.4f} SAR2={point.sar_type2:.4f}"
        )
    print(f"artifacts in {out}")
    return EXIT_OK


AXIS_FIELDS = {
    "population": ("population_size", int),
    "crossover": ("selection_rate", float),
    "mutation": ("mutation_ratio", float),
}


def run_sweep(
    config: RunConfig,
    axis: str,
    values: list[float],
    repeats: int,
    report_metric: str = "fitness",
) -> tuple[list[float], list[float]]:
    """Mean and stddev of the final error per sweep value.

    Each repeat synthesizes a fresh target from a derived seed and runs a
    single-restart inversion; `mse` reports feature-space mean squared error
    instead of the raw fitness.
    """
    field_name, cast = AXIS_FIELDS[axis]
    means, stds = [], []
    with resolve_models(config, need_syst=False) as models:
        gen, ext = models.generator, models.sysc_extractor
        for value in values:
            try:
                ga = dataclasses.replace(config.ga, **{field_name: cast(value)})
            except InvalidConfigError as exc:
                raise InvalidAxisError(f"value {value} invalid for {axis}: {exc}")
            finals = []
            for r in range(repeats):
                z_true = np.random.default_rng(
                    10_000 + config.ga.rng_seed + r
                ).standard_normal(gen.latent_dim)
                image = np.asarray(gen.generate(z_true[None, :]), dtype=float)
                target = np.asarray(ext.extract(image.reshape(1, -1)), dtype=float)[0]
                ga_r = dataclasses.replace(
                    ga, rng_seed=config.ga.rng_seed + r, restarts=1
                )
                outcome = run_inversion(target, gen, ext, ga_r)
                if report_metric == "mse":
                    recon = np.asarray(
                        gen.generate(outcome.best_latent[None, :]), dtype=float
                    )
                    feat = np.asarray(
                        ext.extract(recon.reshape(1, -1)), dtype=float
                    )[0]
                    finals.append(euclidean_distance(feat, target) ** 2 / feat.size)
                else:
                    finals.append(outcome.best_fitness)
            means.append(float(np.mean(finals)))
            stds.append(float(np.std(finals)))
    return means, stds


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _apply_overrides(_load_mapping(args.config), args)
    out = _prepare_out(args.out)
    try:
        values = [float(v) for v in args.values.split(",") if v]
    except ValueError as exc:
        raise InvalidAxisError(f"cannot parse sweep values: {exc}") from exc
    if not values:
        raise InvalidAxisError("no sweep values given")
    repeats = args.repeats or config.ablate_repeats
    digest = reporting.config_digest(
        config.digest_payload(
            command="ablate",
            axis=args.axis,
            values=values,
            repeats=repeats,
            report_metric=args.report_metric,
        )
    )
    means, stds = run_sweep(config, args.axis, values, repeats, args.report_metric)
    shown = [int(v) if args.axis == "population" else v for v in values]
    reporting.write_sweep_csv(shown, means, stds, out / "sweep.csv", digest)
    if config.figures:
        figures.save_sweep_figure(shown, means, stds, args.axis, out / "sweep.png")
    for value, mean, std in zip(shown, means, stds):
        print(f"{args.axis}={value}: mean={mean:.6f} stddev={std:.6f}")
    print(f"artifacts in {out}")
    return EXIT_OK


def cmd_roc(args: argparse.Namespace) -> int:
    config = _apply_overrides(_load_mapping(args.config), args)
    out = _prepare_out(args.out)
    try:
        scores = reporting.read_scores_csv(args.scores)
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot read scores file {args.scores}: {exc}") from exc
    digest = reporting.config_digest(
        config.digest_payload(command="roc", scores=str(args.scores))
    )
    roc_rows = emit_roc(scores, args.grid)
    reporting.write_roc_csv(roc_rows, out / "roc.csv", digest)
    hist_rows = emit_distributions(scores, args.bins)
    reporting.write_distributions_csv(hist_rows, out / "distributions.csv", digest)
    if config.figures:
        figures.save_roc_figure(roc_rows, out / "roc.png")
        figures.save_distributions_figure(hist_rows, out / "distributions.png")
    print(f"artifacts in {out}")
    return EXIT_OK


def _prepare_out(out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    return out


def _error_kind(exc: Exception) -> tuple[str, int]:
    if isinstance(exc, ParseError):
        return "parse", EXIT_USER
    if isinstance(exc, BridgeError):
        return "bridge", EXIT_BRIDGE
    if isinstance(
        exc,
        (
            InvalidConfigError,
            InvalidAxisError,
            DimensionMismatchError,
            InsufficientSamplesError,
            EmptyScoresError,
        ),
    ):
        return "config", EXIT_USER
    if isinstance(exc, ZinvertError):
        return "internal", EXIT_INTERNAL
    return "internal", EXIT_INTERNAL


COMMANDS = {
    "invert": cmd_invert,
    "attack": cmd_attack,
    "ablate": cmd_ablate,
    "roc": cmd_roc,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001  (single exit point for error JSON)
        kind, code = _error_kind(exc)
        print(
            json.dumps({"error": {"kind": kind, "message": str(exc)}}),
            file=sys.stderr,
        )
        return code


if __name__ == "__main__":
    sys.exit(main())
