"""Search engine: population mechanics, operators, stopping, determinism."""

import dataclasses

import numpy as np
import pytest

import zinvert.engine as engine_mod
from zinvert import (
    DimensionMismatchError,
    GaConfig,
    Individual,
    InvalidConfigError,
    ModelFailureError,
    Population,
    UnevaluatedPopulationError,
    cosine_distance,
    crossover,
    evaluate_fitness,
    euclidean_distance,
    init_population,
    make_nonlinear_oracle,
    make_orthonormal_oracle,
    mutate,
    normalized_similarity,
    run_inversion,
    run_inversion_multi,
    select_parents,
    step_generation,
)
from zinvert.engine import FitnessTrace, InversionResult


class IdentityGenerator:
    def __init__(self, dim):
        self.latent_dim = dim
        self.image_shape = (dim,)

    def generate(self, latents):
        return np.asarray(latents, dtype=float)


class UnitNormExtractor:
    normalized = True

    def __init__(self, dim):
        self.feature_dim = dim

    def extract(self, images):
        arr = np.asarray(images, dtype=float)
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        return arr / norms


class ConstantExtractor:
    """Every image maps to the same unit feature."""

    normalized = True

    def __init__(self, dim):
        self.feature_dim = dim

    def extract(self, images):
        out = np.zeros((len(images), self.feature_dim))
        out[:, 0] = 1.0
        return out


class RotatingExtractor:
    """Each batch call returns features strictly closer to [1, 0, ...]."""

    normalized = True

    def __init__(self, dim):
        self.feature_dim = dim
        self.calls = 0

    def extract(self, images):
        angle = 1.0 * (0.99**self.calls)
        self.calls += 1
        out = np.zeros((len(images), self.feature_dim))
        out[:, 0] = np.cos(angle)
        out[:, 1] = np.sin(angle)
        return out


def axis_target(dim):
    target = np.zeros(dim)
    target[0] = 1.0
    return target


def identity_pipeline(dim):
    return IdentityGenerator(dim), UnitNormExtractor(dim)


class TestInitPopulation:
    def test_default_scale(self):
        pop = init_population(256, 512, np.random.default_rng(7))
        assert len(pop) == 256
        assert all(m.latent.shape == (512,) for m in pop.members)
        assert all(m.fitness is None for m in pop.members)
        assert pop.generation_index == 0

    def test_minimum_sizes(self):
        pop = init_population(2, 1, np.random.default_rng(0))
        assert len(pop) == 2
        assert pop.members[0].latent.shape == (1,)

    def test_entries_are_standard_gaussian(self):
        pop = init_population(1000, 8, np.random.default_rng(1))
        entries = np.concatenate([m.latent for m in pop.members])
        assert abs(entries.mean()) < 0.1
        assert abs(entries.var() - 1.0) < 0.15

    def test_invalid_sizes(self):
        with pytest.raises(InvalidConfigError):
            init_population(1, 4, np.random.default_rng(0))
        with pytest.raises(InvalidConfigError):
            init_population(4, 0, np.random.default_rng(0))


class TestEvaluateFitness:
    def test_self_match_has_zero_fitness(self):
        gen, ext = identity_pipeline(4)
        z0 = np.array([0.5, -1.0, 2.0, 0.25])
        target = ext.extract(gen.generate(z0[None, :]))[0]
        pop = Population([Individual(z0), Individual(np.ones(4))])
        evaluate_fitness(pop, gen, ext, target, "cosine")
        assert pop.members[0].fitness == 0.0
        assert pop.members[1].fitness > 0.0

    def test_matches_external_recomputation_euclidean(self):
        gen, ext = make_orthonormal_oracle(8, 4, seed=1)
        rng = np.random.default_rng(2)
        target = ext.extract(gen.generate(rng.standard_normal((1, 8))))[0]
        pop = Population([Individual(rng.standard_normal(8)) for _ in range(4)])
        evaluate_fitness(pop, gen, ext, target, "euclidean")
        for member in pop.members:
            feat = ext.extract(gen.generate(member.latent[None, :]))[0]
            assert member.fitness == euclidean_distance(feat, target)

    def test_mismatched_target_dimension(self):
        gen, ext = identity_pipeline(4)
        pop = init_population(2, 4, np.random.default_rng(0))
        with pytest.raises(ModelFailureError):
            evaluate_fitness(pop, gen, ext, np.ones(3), "cosine")

    def test_nonfinite_model_output_names_the_member(self):
        gen, _ = identity_pipeline(3)

        class BrokenExtractor:
            feature_dim = 3
            normalized = False

            def extract(self, images):
                out = np.asarray(images, dtype=float).copy()
                out[2, 0] = np.nan
                return out

        pop = init_population(4, 3, np.random.default_rng(0))
        with pytest.raises(ModelFailureError) as err:
            evaluate_fitness(pop, gen, BrokenExtractor(), np.ones(3), "euclidean")
        assert err.value.index == 2

    def test_cached_fitness_not_recomputed(self):
        gen, ext = identity_pipeline(3)

        calls = {"n": 0}
        orig = gen.generate

        def counting(latents):
            calls["n"] += 1
            return orig(latents)

        gen.generate = counting
        target = np.array([1.0, 0.0, 0.0])
        pop = init_population(4, 3, np.random.default_rng(1))
        evaluate_fitness(pop, gen, ext, target)
        assert calls["n"] == 1
        evaluate_fitness(pop, gen, ext, target)
        assert calls["n"] == 1  # everyone cached: no model traffic


class TestSelectParents:
    def make_pop(self, fitnesses):
        return Population(
            [Individual(np.zeros(2), fitness=f) for f in fitnesses]
        )

    def test_smallest_fitness_selected(self):
        pop = self.make_pop([0.9, 0.1, 0.5, 0.3, 0.8, 0.2, 0.7, 0.6, 0.4, 1.0])
        parents = select_parents(pop, 0.3)
        assert sorted(p.fitness for p in parents) == [0.1, 0.2, 0.3]

    def test_ties_broken_by_index(self):
        pop = self.make_pop([0.5, 0.5, 0.5, 0.5])
        parents = select_parents(pop, 0.5)
        assert parents[0] is pop.members[0]
        assert parents[1] is pop.members[1]

    def test_ceil_arithmetic(self):
        pop = self.make_pop(list(np.linspace(0, 1, 256)))
        assert len(select_parents(pop, 0.3)) == 77

    def test_unevaluated_member_rejected(self):
        pop = self.make_pop([0.1, 0.2, 0.3])
        pop.members[1].fitness = None
        with pytest.raises(UnevaluatedPopulationError):
            select_parents(pop, 0.5)


class TestCrossover:
    def test_definition(self):
        a = np.array([1.0, 1.0, 1.0, 1.0])
        b = np.array([2.0, 2.0, 2.0, 2.0])
        seed = next(
            s for s in range(100) if np.random.default_rng(s).integers(1, 4) == 2
        )
        child = crossover(a, b, np.random.default_rng(seed))
        assert child.tolist() == [1.0, 1.0, 2.0, 2.0]

    def test_identical_parents(self):
        a = np.array([3.0, -1.0, 0.5])
        child = crossover(a, a.copy(), np.random.default_rng(0))
        assert np.array_equal(child, a)

    def test_length_two_forces_the_cut(self):
        a = np.array([1.0, 2.0])
        b = np.array([10.0, 20.0])
        child = crossover(a, b, np.random.default_rng(0))
        assert child.tolist() == [1.0, 20.0]

    def test_child_entries_come_from_exactly_one_parent(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            a = rng.standard_normal(10)
            b = rng.standard_normal(10)
            child = crossover(a, b, rng)
            from_a = child == a
            from_b = child == b
            assert np.all(from_a | from_b)
            # single point: a-prefix then b-suffix
            cut = int(np.argmin(from_a)) if not from_a.all() else 10
            assert from_a[:cut].all() and from_b[cut:].all()

    def test_matches_declared_cut_distribution(self):
        a = np.arange(5.0)
        b = -np.arange(5.0)
        rng = np.random.default_rng(9)
        witness = np.random.default_rng(9)
        for _ in range(50):
            child = crossover(a, b, rng)
            cut = int(witness.integers(1, 5))
            assert np.array_equal(child, np.concatenate([a[:cut], b[cut:]]))

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            crossover(np.zeros(3), np.zeros(4), np.random.default_rng(0))


class TestMutate:
    def test_zero_ratio_is_identity(self):
        latent = np.random.default_rng(0).standard_normal(32)
        out = mutate(latent, 0.0, np.random.default_rng(1))
        assert np.array_equal(out, latent)

    def test_full_ratio_adds_standard_gaussian(self):
        latent = np.zeros(10_000)
        out = mutate(latent, 1.0, np.random.default_rng(2))
        assert abs(out.mean()) < 0.05
        assert abs(out.var() - 1.0) < 0.1

    def test_partial_ratio_hits_expected_fraction(self):
        latent = np.zeros(10_000)
        out = mutate(latent, 0.3, np.random.default_rng(3))
        changed = np.mean(out != 0.0)
        assert abs(changed - 0.3) < 0.03

    def test_invalid_ratio(self):
        with pytest.raises(InvalidConfigError):
            mutate(np.zeros(4), 1.5, np.random.default_rng(0))


class TestStepGeneration:
    def config(self, **kw):
        base = dict(
            population_size=10,
            selection_rate=0.3,
            mutation_ratio=0.3,
            max_generations=50,
            patience=10,
            restarts=1,
            rng_seed=0,
        )
        base.update(kw)
        return GaConfig(**base)

    def test_parent_child_split(self):
        gen, ext = identity_pipeline(4)
        target = axis_target(4)
        cfg = self.config()
        rng = np.random.default_rng(0)
        pop = init_population(10, 4, rng)
        nxt = step_generation(pop, cfg, gen, ext, target, rng)
        assert len(nxt) == 10
        assert nxt.generation_index == 1
        parents = select_parents(pop, 0.3)
        assert all(nxt.members[i] is parents[i] for i in range(3))
        assert all(m.fitness is not None for m in nxt.members)

    def test_elitism_keeps_best_from_rising(self):
        gen, ext = identity_pipeline(6)
        target = axis_target(6)
        cfg = self.config(population_size=12)
        rng = np.random.default_rng(5)
        pop = init_population(12, 6, rng)
        evaluate_fitness(pop, gen, ext, target)
        for _ in range(20):
            best_before = pop.best().fitness
            pop = step_generation(pop, cfg, gen, ext, target, rng)
            assert len(pop) == 12
            assert pop.best().fitness <= best_before

    def test_constant_extractor_freezes_fitness(self):
        gen = IdentityGenerator(4)
        ext = ConstantExtractor(4)
        target = axis_target(4)
        cfg = self.config()
        rng = np.random.default_rng(1)
        pop = init_population(10, 4, rng)
        evaluate_fitness(pop, gen, ext, target)
        reference = pop.best().fitness
        for _ in range(5):
            pop = step_generation(pop, cfg, gen, ext, target, rng)
            assert all(m.fitness == reference for m in pop.members)


class TestRunInversion:
    def test_constant_fitness_stops_by_patience(self):
        gen = IdentityGenerator(4)
        ext = ConstantExtractor(4)
        cfg = GaConfig(
            population_size=8,
            selection_rate=0.5,
            mutation_ratio=0.3,
            max_generations=500,
            patience=20,
            restarts=1,
            rng_seed=0,
        )
        result = run_inversion(axis_target(4), gen, ext, cfg)
        assert result.trace.terminated_by == "patience"
        assert result.trace.generations == 20
        assert len(result.trace.best_fitness_per_generation) == 21

    def test_strict_decrease_runs_to_the_cap(self):
        gen = IdentityGenerator(4)
        ext = RotatingExtractor(4)
        cfg = GaConfig(
            population_size=4,
            selection_rate=0.5,
            mutation_ratio=0.1,
            max_generations=1000,
            patience=20,
            restarts=1,
            rng_seed=0,
        )
        result = run_inversion(axis_target(4), gen, ext, cfg)
        assert result.trace.terminated_by == "max_generations"
        assert result.trace.generations == 1000
        best = result.trace.best_fitness_per_generation
        assert all(b2 < b1 for b1, b2 in zip(best, best[1:]))

    def test_seeded_regression_anchor(self):
        gen, ext = make_orthonormal_oracle(8, 4, seed=11)
        z_star = np.random.default_rng(42).standard_normal(8)
        target = ext.extract(gen.generate(z_star[None, :]))[0]
        cfg = GaConfig(
            population_size=64,
            selection_rate=0.3,
            mutation_ratio=0.1,
            max_generations=1000,
            patience=20,
            restarts=1,
            rng_seed=3,
        )
        result = run_inversion(target, gen, ext, cfg)
        assert result.best_fitness < 0.05
        # pinned from the first run of this exact configuration
        assert result.best_fitness == pytest.approx(1.2933242312662685e-06, abs=1e-12)

    def test_determinism(self):
        gen, ext = make_nonlinear_oracle(8, 4, seed=2)
        target = ext.extract(gen.generate(np.random.default_rng(0).standard_normal((1, 8))))[0]
        cfg = GaConfig(
            population_size=16,
            selection_rate=0.3,
            mutation_ratio=0.3,
            max_generations=30,
            patience=10,
            restarts=1,
            rng_seed=12345,
        )
        first = run_inversion(target, gen, ext, cfg)
        second = run_inversion(target, gen, ext, cfg)
        assert np.array_equal(first.best_latent, second.best_latent)
        assert first.trace.best_fitness_per_generation == second.trace.best_fitness_per_generation
        assert first.trace.mean_fitness_per_generation == second.trace.mean_fitness_per_generation

    def test_trace_is_monotone_and_fitness_recomputable(self):
        gen, ext = make_orthonormal_oracle(8, 4, seed=6)
        target = ext.extract(gen.generate(np.random.default_rng(1).standard_normal((1, 8))))[0]
        cfg = GaConfig(
            population_size=16,
            selection_rate=0.3,
            mutation_ratio=0.2,
            max_generations=25,
            patience=25,
            restarts=1,
            rng_seed=4,
        )
        rng = np.random.default_rng(cfg.rng_seed)
        pop = init_population(16, 8, rng)
        evaluate_fitness(pop, gen, ext, target)
        for _ in range(10):
            pop = step_generation(pop, cfg, gen, ext, target, rng)
        for member in pop.members:
            feat = ext.extract(gen.generate(member.latent[None, :]))[0]
            assert cosine_distance(feat, target) == member.fitness


class TestRunInversionMulti:
    def oracle_setup(self):
        gen, ext = make_orthonormal_oracle(8, 4, seed=8)
        target = ext.extract(
            gen.generate(np.random.default_rng(3).standard_normal((1, 8)))
        )[0]
        return gen, ext, target

    def base_config(self, restarts, seed=70):
        return GaConfig(
            population_size=16,
            selection_rate=0.3,
            mutation_ratio=0.2,
            max_generations=40,
            patience=15,
            restarts=restarts,
            rng_seed=seed,
        )

    def test_single_restart_equals_plain_run(self):
        gen, ext, target = self.oracle_setup()
        cfg = self.base_config(restarts=1)
        multi = run_inversion_multi(target, gen, ext, cfg)
        single = run_inversion(target, gen, ext, cfg)
        assert multi.best_index == 0
        assert np.array_equal(multi.best.best_latent, single.best_latent)
        assert multi.best.best_fitness == single.best_fitness

    def test_picks_the_smallest_final_fitness(self, monkeypatch):
        outcomes = iter([0.4, 0.2, 0.3])

        def fake_run(target, gen, ext, config):
            f = next(outcomes)
            return InversionResult(
                best_latent=np.zeros(2),
                best_fitness=f,
                trace=FitnessTrace([f], [f], "patience"),
            )

        monkeypatch.setattr(engine_mod, "run_inversion", fake_run)
        multi = engine_mod.run_inversion_multi(
            np.ones(2), None, None, self.base_config(restarts=3)
        )
        assert multi.best_index == 1
        assert multi.best.best_fitness == 0.2

    def test_never_worse_than_any_single_restart(self):
        gen, ext, target = self.oracle_setup()
        cfg = self.base_config(restarts=3)
        multi = run_inversion_multi(target, gen, ext, cfg)
        singles = [
            run_inversion(
                target, gen, ext, dataclasses.replace(cfg, rng_seed=cfg.rng_seed + k)
            )
            for k in range(3)
        ]
        for single in singles:
            assert multi.best.best_fitness <= single.best_fitness
        assert multi.best.best_fitness == min(s.best_fitness for s in singles)


class TestGaConfig:
    def test_defaults(self):
        cfg = GaConfig()
        assert cfg.population_size == 256
        assert cfg.selection_rate == 0.3
        assert cfg.mutation_ratio == 0.3
        assert cfg.max_generations == 1000
        assert cfg.patience == 20
        assert cfg.restarts == 3

    def test_parent_pool_must_allow_crossover(self):
        with pytest.raises(InvalidConfigError):
            GaConfig(population_size=4, selection_rate=0.1)

    def test_rate_bounds(self):
        with pytest.raises(InvalidConfigError):
            GaConfig(selection_rate=0.0)
        with pytest.raises(InvalidConfigError):
            GaConfig(selection_rate=1.0)
        with pytest.raises(InvalidConfigError):
            GaConfig(mutation_ratio=-0.1)

    def test_unknown_metric(self):
        with pytest.raises(InvalidConfigError):
            GaConfig(distance_metric="manhattan")

    def test_tuned_preset(self):
        from zinvert import tuned_config

        cfg = tuned_config(rng_seed=4)
        assert cfg.selection_rate == 0.2
        assert cfg.mutation_ratio == 0.1
        assert cfg.population_size == 256
        assert cfg.rng_seed == 4
