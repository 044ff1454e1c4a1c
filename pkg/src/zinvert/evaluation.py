"""Attack evaluation: score sets, FAR-calibrated thresholds, TAR/SAR reports.

Score taxonomy: genuine (same-person bona fide pairs), imposter (cross-person
bona fide pairs), mated-attack type-1 (reconstructed sample vs the very
template it was inverted from) and type-2 (reconstructed sample vs a different
sample of the same person). All scores live on the [0, 1] normalized
similarity scale. "Above threshold" is strict everywhere, which keeps FAR=0
well defined at the imposter maximum.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import GaConfig, MultiInversionResult, run_inversion_multi
from .errors import (
    EmptyScoresError,
    InsufficientSamplesError,
    InvalidConfigError,
)
from .models import Extractor, FloatArray, Generator, normalized_similarity
from .world import SyntheticWorld, TemplateStore, enroll

CATEGORIES = ("genuine", "imposter", "mated_attack_type1", "mated_attack_type2")


def _score_array(values, name: str) -> FloatArray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise InvalidConfigError(f"{name} scores must lie in [0, 1]")
    return arr


@dataclass
class ScoreSet:
    genuine: FloatArray
    imposter: FloatArray
    mated_attack_type1: FloatArray
    mated_attack_type2: FloatArray

    def __post_init__(self):
        for name in CATEGORIES:
            setattr(self, name, _score_array(getattr(self, name), name))

    def category(self, name: str) -> FloatArray:
        if name not in CATEGORIES:
            raise InvalidConfigError(f"unknown score category {name!r}")
        return getattr(self, name)


@dataclass
class OperatingPoint:
    far_target: float
    threshold: float
    tar: float
    sar_type1: float
    sar_type2: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "OperatingPoint":
        return cls(**{f.name: data[f.name] for f in dataclasses.fields(cls)})


@dataclass
class AttackReport:
    operating_points: list[OperatingPoint]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "operating_points": [p.to_dict() for p in self.operating_points],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "AttackReport":
        return cls(
            operating_points=[
                OperatingPoint.from_dict(p) for p in data["operating_points"]
            ],
            metadata=data.get("metadata", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "AttackReport":
        return cls.from_dict(json.loads(text))


def threshold_at_far(imposter, far: float) -> float:
    """Smallest imposter score value whose strictly-above fraction is <= far.

    Restricting candidates to observed imposter values makes the calibration
    reproducible; the imposter maximum always qualifies, so FAR=0 is defined.
    """
    scores = np.asarray(imposter, dtype=float).reshape(-1)
    if scores.size == 0:
        raise EmptyScoresError("imposter scores are empty")
    if not 0.0 <= far <= 1.0:
        raise InvalidConfigError(f"far target must be in [0, 1], got {far}")
    candidates = np.sort(scores)
    above = candidates.size - np.searchsorted(candidates, candidates, side="right")
    ok = above / candidates.size <= far
    return float(candidates[int(np.argmax(ok))])


def rate_above(scores, threshold: float) -> float:
    """Fraction of scores strictly above the threshold."""
    arr = np.asarray(scores, dtype=float).reshape(-1)
    if arr.size == 0:
        raise EmptyScoresError("cannot compute a rate over an empty score list")
    return float(np.mean(arr > threshold))


def build_report(
    scores: ScoreSet, far_targets, metadata: dict | None = None
) -> AttackReport:
    """One operating point per FAR target, sorted by target ascending."""
    for name in CATEGORIES:
        if scores.category(name).size == 0:
            raise EmptyScoresError(f"score list {name!r} is empty")
    targets = sorted(float(f) for f in far_targets)
    points = []
    for far in targets:
        tau = threshold_at_far(scores.imposter, far)
        points.append(
            OperatingPoint(
                far_target=far,
                threshold=tau,
                tar=rate_above(scores.genuine, tau),
                sar_type1=rate_above(scores.mated_attack_type1, tau),
                sar_type2=rate_above(scores.mated_attack_type2, tau),
            )
        )
    return AttackReport(operating_points=points, metadata=metadata or {})


@dataclass
class RocRow:
    far: float
    tar: float
    sar_type1: float
    sar_type2: float


def emit_roc(scores: ScoreSet, grid_size: int = 50) -> list[RocRow]:
    """Rates over a log-spaced FAR grid from 1/len(imposter) up to 1."""
    if grid_size < 2:
        raise InvalidConfigError("grid_size must be at least 2")
    for name in CATEGORIES:
        if scores.category(name).size == 0:
            raise EmptyScoresError(f"score list {name!r} is empty")
    lo = 1.0 / scores.imposter.size
    fars = np.logspace(np.log10(lo), 0.0, grid_size)
    rows = []
    for far in fars:
        tau = threshold_at_far(scores.imposter, float(far))
        rows.append(
            RocRow(
                far=float(far),
                tar=rate_above(scores.genuine, tau),
                sar_type1=rate_above(scores.mated_attack_type1, tau),
                sar_type2=rate_above(scores.mated_attack_type2, tau),
            )
        )
    return rows


@dataclass
class HistogramRow:
    category: str
    bin_low: float
    bin_high: float
    mass: float


def emit_distributions(scores: ScoreSet, bins: int = 20) -> list[HistogramRow]:
    """Per-category normalized histograms over [0, 1]; masses sum to 1.

    Bins are half-open [low, high) except the last, which includes 1.0.
    """
    if bins < 2:
        raise InvalidConfigError("bins must be at least 2")
    edges = np.linspace(0.0, 1.0, bins + 1)
    rows = []
    for name in CATEGORIES:
        values = scores.category(name)
        if values.size == 0:
            raise EmptyScoresError(f"score list {name!r} is empty")
        counts, _ = np.histogram(values, bins=edges)
        masses = counts / values.size
        for k in range(bins):
            rows.append(
                HistogramRow(
                    category=name,
                    bin_low=float(edges[k]),
                    bin_high=float(edges[k + 1]),
                    mass=float(masses[k]),
                )
            )
    return rows


@dataclass
class UserAttackSummary:
    user_id: str
    best_fitness: float
    best_restart: int
    restarts: list[dict]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class AttackSimulationResult:
    report: AttackReport
    scores: ScoreSet
    summaries: list[UserAttackSummary]


# Per-user seed stride; keeps restart streams (seed, seed+1, ...) disjoint
# across users for any restart count below the stride.
USER_SEED_STRIDE = 1000


def user_seed(base_seed: int, user_index: int) -> int:
    return base_seed + USER_SEED_STRIDE * (user_index + 1)


def bona_fide_scores(
    store: TemplateStore,
    max_imposter_pairs: int | None = None,
    pair_seed: int = 0,
) -> tuple[FloatArray, FloatArray]:
    """Genuine (within-user) and imposter (cross-user) similarity scores.

    All pairs are enumerated; the imposter list is subsampled deterministically
    when it exceeds the cap.
    """
    user_ids = list(store)
    genuine = []
    for uid in user_ids:
        feats = store[uid]
        for i in range(len(feats)):
            for j in range(i + 1, len(feats)):
                genuine.append(normalized_similarity(feats[i], feats[j]))
    imposter = []
    for a in range(len(user_ids)):
        for b in range(a + 1, len(user_ids)):
            for fa in store[user_ids[a]]:
                for fb in store[user_ids[b]]:
                    imposter.append(normalized_similarity(fa, fb))
    imposter_arr = np.asarray(imposter, dtype=float)
    if max_imposter_pairs is not None and imposter_arr.size > max_imposter_pairs:
        rng = np.random.default_rng(pair_seed)
        keep = rng.choice(imposter_arr.size, size=max_imposter_pairs, replace=False)
        imposter_arr = imposter_arr[np.sort(keep)]
    return np.asarray(genuine, dtype=float), imposter_arr


def _model_id(model) -> str:
    return getattr(model, "model_id", type(model).__name__)


def run_attack_simulation(
    world: SyntheticWorld,
    generator: Generator,
    sysc_extractor: Extractor,
    syst_extractor: Extractor,
    ga_config: GaConfig,
    far_targets,
    max_imposter_pairs: int | None = None,
    metadata: dict | None = None,
) -> AttackSimulationResult:
    """Full impersonation-attack protocol on a synthetic world.

    Per user: invert the compromised template (sample 0 under the compromised
    system's extractor), regenerate the sample, then score it in the targeted
    system against the same enrolled sample (type-1) and against a different
    sample of the same user (type-2). Genuine/imposter scores come from bona
    fide samples under the targeted system's extractor.
    """
    store_c = enroll(world, generator, sysc_extractor)
    store_t = enroll(world, generator, syst_extractor)
    extra = dict(metadata or {})
    extra.setdefault("dataset", world.describe())
    return _attack_core(
        store_c,
        store_t,
        generator,
        sysc_extractor,
        syst_extractor,
        ga_config,
        far_targets,
        max_imposter_pairs,
        extra,
    )


def run_attack_from_templates(
    store_c: TemplateStore,
    store_t: TemplateStore,
    generator: Generator,
    sysc_extractor: Extractor,
    syst_extractor: Extractor,
    ga_config: GaConfig,
    far_targets,
    max_imposter_pairs: int | None = None,
    metadata: dict | None = None,
) -> AttackSimulationResult:
    """Same protocol, driven by imported template stores instead of a world."""
    extra = dict(metadata or {})
    extra.setdefault("dataset", {"kind": "templates", "n_users": len(store_c)})
    return _attack_core(
        store_c,
        store_t,
        generator,
        sysc_extractor,
        syst_extractor,
        ga_config,
        far_targets,
        max_imposter_pairs,
        extra,
    )


def _attack_core(
    store_c: TemplateStore,
    store_t: TemplateStore,
    generator: Generator,
    sysc_extractor: Extractor,
    syst_extractor: Extractor,
    ga_config: GaConfig,
    far_targets,
    max_imposter_pairs: int | None,
    metadata: dict,
) -> AttackSimulationResult:
    if set(store_c) != set(store_t):
        raise InvalidConfigError(
            "compromised and targeted template stores cover different users"
        )
    user_ids = list(store_c)
    for uid in user_ids:
        if len(store_t[uid]) < 2:
            raise InsufficientSamplesError(
                f"user {uid!r} needs at least 2 samples for a type-2 attack"
            )

    genuine, imposter = bona_fide_scores(
        store_t, max_imposter_pairs, pair_seed=ga_config.rng_seed
    )

    mated1 = []
    mated2 = []
    summaries = []
    for index, uid in enumerate(user_ids):
        target = store_c[uid][0]
        cfg = dataclasses.replace(
            ga_config, rng_seed=user_seed(ga_config.rng_seed, index)
        )
        multi = run_inversion_multi(target, generator, sysc_extractor, cfg)
        recon_image = np.asarray(
            generator.generate(multi.best.best_latent[None, :]), dtype=float
        )
        recon_feature = np.asarray(
            syst_extractor.extract(recon_image.reshape(1, -1)), dtype=float
        )[0]
        mated1.append(normalized_similarity(recon_feature, store_t[uid][0]))
        mated2.append(normalized_similarity(recon_feature, store_t[uid][1]))
        summaries.append(_summarize(uid, multi))

    scores = ScoreSet(
        genuine=genuine,
        imposter=imposter,
        mated_attack_type1=mated1,
        mated_attack_type2=mated2,
    )
    metadata = dict(metadata)
    metadata.update(
        {
            "sysc_extractor": _model_id(sysc_extractor),
            "syst_extractor": _model_id(syst_extractor),
            "generator": _model_id(generator),
            "ga": dataclasses.asdict(ga_config),
            "n_genuine": int(scores.genuine.size),
            "n_imposter": int(scores.imposter.size),
            "users": [s.to_dict() for s in summaries],
        }
    )
    report = build_report(scores, far_targets, metadata)
    return AttackSimulationResult(report=report, scores=scores, summaries=summaries)


def _summarize(uid: str, multi: MultiInversionResult) -> UserAttackSummary:
    return UserAttackSummary(
        user_id=uid,
        best_fitness=multi.best.best_fitness,
        best_restart=multi.best_index,
        restarts=[
            {
                "final_fitness": run.best_fitness,
                "generations": run.trace.generations,
                "terminated_by": run.trace.terminated_by,
            }
            for run in multi.runs
        ],
    )


def load_report(path: str | Path) -> AttackReport:
    return AttackReport.from_json(Path(path).read_text())
