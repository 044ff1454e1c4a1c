"""zinvert: black-box feature inversion over a generator latent space.

Given a compromised feature template and black-box access to the
generator/extractor pipeline, a population-based search recovers a latent
vector whose generated output yields matching features. The evaluation
harness quantifies the impersonation risk of the reconstructions with
FAR-calibrated thresholds, TAR, and type-1/type-2 successful-attack rates.
"""

from .bridge import BridgeClient, BridgeSpec, RemoteExtractor, RemoteGenerator, connect
from .engine import (
    FitnessTrace,
    GaConfig,
    Individual,
    InversionResult,
    MultiInversionResult,
    Population,
    crossover,
    evaluate_fitness,
    init_population,
    mutate,
    run_inversion,
    run_inversion_multi,
    select_parents,
    step_generation,
    tuned_config,
)
from .errors import (
    BridgeError,
    BridgeTimeoutError,
    DimensionMismatchError,
    EmptyScoresError,
    InsufficientSamplesError,
    InvalidAxisError,
    InvalidConfigError,
    ModelFailureError,
    ProtocolError,
    ServerReportedError,
    UnevaluatedPopulationError,
    VersionMismatchError,
    ZeroVectorError,
    ZinvertError,
)
from .evaluation import (
    AttackReport,
    AttackSimulationResult,
    OperatingPoint,
    ScoreSet,
    build_report,
    emit_distributions,
    emit_roc,
    rate_above,
    run_attack_from_templates,
    run_attack_simulation,
    threshold_at_far,
)
from .models import (
    Extractor,
    Generator,
    cosine_distance,
    euclidean_distance,
    make_nonlinear_oracle,
    make_orthonormal_oracle,
    normalized_similarity,
)
from .world import (
    SyntheticWorld,
    enroll,
    export_templates,
    generate_world,
    load_templates,
    load_world,
    save_world,
)

__version__ = "0.1.0"
