import numpy as np
import pytest

from spreadcodes.correlation import evaluate_chips, evaluate_family
from spreadcodes.ga import (
    GaConfig,
    Individual,
    crossover_uniform,
    ga_run,
    mutate,
    select_parent,
    selection_probabilities,
)
from spreadcodes.nes import TRAINLOG_COLUMNS, write_trainlog_csv


def synthetic_population(objectives):
    pop = []
    for f in objectives:
        genome = np.zeros(8, dtype=np.uint8)
        report = evaluate_chips(genome.reshape(2, 4))
        report = type(report)(f_ac=f, f_cc=f, f=f)
        pop.append(Individual(genome=genome, report=report))
    return pop


def test_config_validation():
    with pytest.raises(ValueError):
        GaConfig(2, 63, mutation_rate=0.0)
    with pytest.raises(ValueError):
        GaConfig(2, 63, mutation_rate=1.0)
    with pytest.raises(ValueError):
        GaConfig(2, 63, population_size=1)
    with pytest.raises(ValueError):
        GaConfig(1, 63)


def test_elite_count():
    assert GaConfig(2, 63).elite_count == 1  # 0.01 * 100
    assert GaConfig(2, 63, population_size=50).elite_count == 1
    assert GaConfig(2, 63, population_size=300, elite_rate=0.01).elite_count == 3


def test_uniform_selection_for_equal_objectives():
    population = synthetic_population([0.3, 0.3, 0.3, 0.3])
    rng = np.random.default_rng(0)
    counts = np.zeros(4)
    draws = 10_000
    ids = {id(ind): i for i, ind in enumerate(population)}
    for _ in range(draws):
        counts[ids[id(select_parent(population, rng))]] += 1
    expected = draws / 4
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    assert chi2 < 11.345  # chi-square critical value, df=3, alpha=0.01


def test_selection_ratio_three_to_one():
    # Transformed fitness (f_max - f) + eps gives weights 3 : 1 : ~0 here.
    population = synthetic_population([0.0, 0.2, 0.3])
    probs = selection_probabilities(np.array([0.0, 0.2, 0.3]))
    assert probs[0] == pytest.approx(3 * probs[1], rel=1e-9)
    rng = np.random.default_rng(1)
    counts = np.zeros(3)
    draws = 10_000
    ids = {id(ind): i for i, ind in enumerate(population)}
    for _ in range(draws):
        counts[ids[id(select_parent(population, rng))]] += 1
    for member in (0, 1):
        p = probs[member]
        sigma = np.sqrt(p * (1 - p) / draws)
        assert abs(counts[member] / draws - p) < 3 * sigma


def test_single_member_population_always_selected():
    population = synthetic_population([0.5])
    rng = np.random.default_rng(2)
    for _ in range(20):
        assert select_parent(population, rng) is population[0]


def test_crossover_identical_parents():
    rng = np.random.default_rng(3)
    genome = np.array([0, 1, 1, 0, 1], dtype=np.uint8)
    c1, c2 = crossover_uniform(genome, genome, rng)
    assert np.array_equal(c1, genome) and np.array_equal(c2, genome)


def test_crossover_children_bits_come_from_parents():
    rng = np.random.default_rng(4)
    for _ in range(50):
        a = rng.integers(0, 2, size=20).astype(np.uint8)
        b = rng.integers(0, 2, size=20).astype(np.uint8)
        c1, c2 = crossover_uniform(a, b, rng)
        for child in (c1, c2):
            assert np.all((child == a) | (child == b))
        # complementarity: where c1 took a, c2 took b
        assert np.all((c1 == a) | (c1 == b))
        assert np.array_equal(c1 ^ c2, a ^ b)


def test_crossover_inheritance_frequency():
    # Complementary parents expose which side each bit came from.
    rng = np.random.default_rng(5)
    positions = 32
    a = np.zeros(positions, dtype=np.uint8)
    b = np.ones(positions, dtype=np.uint8)
    from_a = np.zeros(positions)
    trials = 10_000
    for _ in range(trials):
        c1, _ = crossover_uniform(a, b, rng)
        from_a += c1 == 0
    freq = from_a / trials
    sigma = np.sqrt(0.25 / trials)
    assert np.all(np.abs(freq - 0.5) < 3 * sigma)


def test_crossover_length_mismatch():
    rng = np.random.default_rng(6)
    with pytest.raises(ValueError):
        crossover_uniform(np.zeros(4, dtype=np.uint8), np.zeros(5, dtype=np.uint8), rng)


def test_mutate_rate_zero_and_one():
    rng = np.random.default_rng(7)
    genome = rng.integers(0, 2, size=30).astype(np.uint8)
    assert np.array_equal(mutate(genome, 0.0, rng), genome)
    assert np.array_equal(mutate(genome, 1.0, rng), genome ^ 1)


def test_mutate_expected_flip_count():
    rng = np.random.default_rng(8)
    genome = np.zeros(635, dtype=np.uint8)
    trials = 10_000
    total_flips = 0
    for _ in range(trials):
        total_flips += int(mutate(genome, 0.005, rng).sum())
    mean_flips = total_flips / trials
    sigma_mean = np.sqrt(635 * 0.005 * 0.995 / trials)
    assert abs(mean_flips - 635 * 0.005) < 3 * sigma_mean


def test_identical_population_is_fixed_point_without_mutation():
    # select -> crossover -> mutate(rate 0) cannot leave the single genotype.
    rng = np.random.default_rng(9)
    genome = rng.integers(0, 2, size=12).astype(np.uint8)
    population = [Individual(genome=genome.copy(), report=evaluate_chips(genome.reshape(2, 6))) for _ in range(6)]
    for _ in range(25):
        pa = select_parent(population, rng)
        pb = select_parent(population, rng)
        c1, c2 = crossover_uniform(pa.genome, pb.genome, rng)
        assert np.array_equal(mutate(c1, 0.0, rng), genome)
        assert np.array_equal(mutate(c2, 0.0, rng), genome)


def quick_cfg(**kw):
    base = dict(num_codes=2, code_length=16, population_size=10, num_iterations=15, master_seed=4)
    base.update(kw)
    return GaConfig(**base)


def test_ga_run_deterministic():
    a, b = ga_run(quick_cfg()), ga_run(quick_cfg())
    assert a.report == b.report
    assert a.best == b.best
    assert a.log.records == b.log.records


def test_ga_run_monotone_best_and_constant_rows():
    res = ga_run(quick_cfg(num_iterations=30))
    curve = res.log.best_f_curve()
    assert np.all(np.diff(curve) <= 0.0)
    mins = np.array([r.min_f for r in res.log.records])
    # elitism: the per-generation population minimum never worsens either
    assert np.all(np.diff(mins) <= 0.0)
    assert len(res.log.records) == 30


def test_ga_best_reevaluates_exactly():
    res = ga_run(quick_cfg())
    assert evaluate_family(res.best) == res.report


def test_ga_cached_objective_matches_reevaluation():
    res = ga_run(quick_cfg(num_iterations=5))
    fam = res.best
    assert evaluate_chips(fam.chips) == res.report


def test_ga_trainlog_schema(tmp_path):
    res = ga_run(quick_cfg(num_iterations=4))
    path = tmp_path / "ga.csv"
    write_trainlog_csv(path, res.log)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(TRAINLOG_COLUMNS)
    assert len(lines) == 5
    row = lines[1].split(",")
    assert row[0] == "0"
    assert float(row[3]) == res.log.records[0].mean_f  # baseline column = mean
    assert float(row[5]) == 0.0  # no gradient


@pytest.mark.slow
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_ga_improves_over_initial_population(seed):
    cfg = GaConfig(num_codes=3, code_length=63, population_size=100, num_iterations=1500, master_seed=seed)
    res = ga_run(cfg)
    assert res.report.f < res.log.records[0].min_f
