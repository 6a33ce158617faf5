import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from consensus_fusion.core import EnsembleInput
from consensus_fusion.errors import ValidationError
from consensus_fusion.harness import learners
from consensus_fusion.harness.data import (
    PRESETS,
    SyntheticSpec,
    generate_synthetic,
    run_base_methods,
    split_indices,
    synthetic_ensemble,
)
from consensus_fusion.harness.experiments import (
    EPSILON_GRID,
    ScalingSpec,
    build_ensembles,
    derive_seed,
    epsilon_tradeoff,
    fit_poly,
    fusion_quality,
    imbalance,
    parallel_map,
    parameter_grid,
    parameter_sweep,
    robustness,
    scaling_experiment,
    scaling_fits,
)
from consensus_fusion.harness.noise import (
    ablate_component,
    inject_imbalance,
    inject_random_classifier,
    inject_random_clusterer,
    random_partition,
)
from consensus_fusion.harness.report import ExperimentReport, format_table
from consensus_fusion.objective import ObjectiveParams

SMALL = SyntheticSpec(n=120, l=3, feature_dim=2, separation=3.0)


@pytest.fixture(scope="module")
def small_ensembles():
    return build_ensembles(SMALL, [0, 1])


class TestSynthetic:
    def test_well_separated_nearest_centroid(self):
        x, y = generate_synthetic(SyntheticSpec(300, 3, 2, 10.0, seed=4))
        centers = np.stack([x[y == k].mean(axis=0) for k in (1, 2, 3)])
        pred = np.argmin(((x[:, None] - centers[None]) ** 2).sum(axis=-1), axis=1) + 1
        assert np.mean(pred == y) >= 0.99
        assert np.mean(learners.nearest_centroid(x, y, x) == y) >= 0.99

    def test_deterministic(self):
        a = generate_synthetic(SyntheticSpec(50, 3, seed=9))
        b = generate_synthetic(SyntheticSpec(50, 3, seed=9))
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_one_point_per_class(self):
        _, y = generate_synthetic(SyntheticSpec(4, 4, feature_dim=3))
        np.testing.assert_array_equal(np.sort(y), [1, 2, 3, 4])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 200), st.integers(1, 5))
    def test_near_balanced(self, l, extra, d):
        _, y = generate_synthetic(SyntheticSpec(l + extra, l, feature_dim=d))
        counts = np.bincount(y, minlength=l + 1)[1:]
        assert counts.max() - counts.min() <= 1

    def test_centers_at_separation(self):
        x, y = generate_synthetic(SyntheticSpec(30_000, 3, 2, 5.0, seed=1))
        c = np.stack([x[y == k].mean(axis=0) for k in (1, 2, 3)])
        dist = [np.linalg.norm(c[i] - c[j]) for i in range(3) for j in range(i + 1, 3)]
        assert min(dist) == pytest.approx(5.0, abs=0.1)

    def test_invalid_spec(self):
        with pytest.raises(ValidationError):
            SyntheticSpec(2, 3)
        with pytest.raises(ValidationError):
            SyntheticSpec(10, 2, separation=0.0)

    def test_presets_valid(self):
        assert PRESETS["iris"].n == 150
        assert PRESETS["blobs3"].n == 600


class TestBaseMethods:
    def test_shapes_and_test_partition(self):
        x, y = generate_synthetic(SMALL)
        run = run_base_methods(x, y, seed=0)
        ens = run.ensemble
        assert ens.num_classifiers == 3 and ens.num_clusterers == 2
        assert ens.num_objects == run.split.test.size == 24
        np.testing.assert_array_equal(ens.true_labels, y[run.split.test])

    def test_well_separated_accuracy(self):
        for seed in range(3):
            x, y = generate_synthetic(SyntheticSpec(300, 3, 2, 10.0, seed=seed))
            ens = run_base_methods(x, y, seed=seed).ensemble
            for labels in ens.classifier_outputs:
                assert np.mean(labels == ens.true_labels) >= 0.95

    def test_kmeans_identical_points(self):
        x = np.ones((20, 2))
        assert np.unique(learners.kmeans(x, 3)).size == 1
        assert np.unique(learners.kmeans_auto(x, 3)).size == 1

    def test_single_linkage_cut(self):
        x = np.array([[0.0], [0.1], [5.0], [5.1], [9.0]])
        ids = learners.single_linkage(x, 3)
        assert ids[0] == ids[1] and ids[2] == ids[3] and len(set(ids)) == 3

    def test_degenerate_split(self):
        with pytest.raises(ValidationError):
            split_indices(1, 0)
        with pytest.raises(ValidationError):
            split_indices(10, 0, (0.5, 0.5, 0.1))

    def test_split_partitions(self):
        s = split_indices(100, 3)
        assert (s.train.size, s.validation.size, s.test.size) == (60, 20, 20)
        np.testing.assert_array_equal(np.sort(np.concatenate([s.train, s.validation, s.test])), np.arange(100))


class TestInjection:
    def test_count_zero_unchanged(self, toy_input):
        assert inject_random_classifier(toy_input, 0, 1) is toy_input
        assert inject_random_clusterer(toy_input, 0, 1) is toy_input

    def test_counts_increase(self, toy_input):
        assert inject_random_classifier(toy_input, 10, 1).num_classifiers == 12
        assert inject_random_clusterer(toy_input, 5, 1).num_clusterers == 7

    def test_classifier_histogram_uniform(self):
        n, l = 10_000, 4
        base = EnsembleInput(l, np.ones((1, n), dtype=int))
        col = inject_random_classifier(base, 1, 11).classifier_outputs[1]
        counts = np.bincount(col, minlength=l + 1)[1:]
        sigma = np.sqrt(n * (1 / l) * (1 - 1 / l))
        assert np.abs(counts - n / l).max() <= 3 * sigma

    def test_deterministic(self, toy_input):
        a = inject_random_clusterer(toy_input, 3, 5)
        b = inject_random_clusterer(toy_input, 3, 5)
        np.testing.assert_array_equal(a.clustering_outputs, b.clustering_outputs)

    def test_inputs_not_mutated(self, toy_input):
        clf = toy_input.classifier_outputs.copy()
        clu = toy_input.clustering_outputs.copy()
        inject_random_classifier(toy_input, 3, 0)
        inject_random_clusterer(toy_input, 3, 0)
        np.testing.assert_array_equal(toy_input.classifier_outputs, clf)
        np.testing.assert_array_equal(toy_input.clustering_outputs, clu)

    def test_negative_count(self, toy_input):
        with pytest.raises(ValidationError):
            inject_random_classifier(toy_input, -1, 0)

    def test_single_cluster_when_c_is_one(self):
        class One:
            def integers(self, lo, hi, size=None):
                return 1 if size is None else np.zeros(size, dtype=int)

        np.testing.assert_array_equal(random_partition(6, One()), np.ones(6))

    def test_c_equal_n_gives_singletons(self):
        class Full(np.random.Generator):
            def integers(self, lo, hi=None, size=None, **kw):
                if size is None:
                    return hi - 1
                return super().integers(lo, hi, size=size, **kw)

        ids = random_partition(30, Full(np.random.PCG64(2)))
        np.testing.assert_array_equal(np.sort(ids), np.arange(1, 31))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 60), st.integers(0, 2**31 - 1))
    def test_no_empty_clusters(self, n, seed):
        ids = random_partition(n, np.random.default_rng(seed))
        assert ids.size == n
        np.testing.assert_array_equal(np.unique(ids), np.arange(1, ids.max() + 1))


class TestImbalance:
    def test_zero_percent_unchanged(self):
        x, y = generate_synthetic(SMALL)
        xr, yr, _ = inject_imbalance(x, y, 0, 1)
        np.testing.assert_array_equal(xr, x)
        np.testing.assert_array_equal(yr, y)

    def test_thirty_percent_of_hundred(self):
        x, y = generate_synthetic(SyntheticSpec(300, 3, seed=2))
        _, yr, target = inject_imbalance(x, y, 30, 7)
        before = np.bincount(y, minlength=4)
        after = np.bincount(yr, minlength=4)
        removed = before - after
        assert removed[target] == 30
        assert removed.sum() == 30

    def test_cannot_empty_class(self):
        with pytest.raises(ValidationError):
            inject_imbalance(np.zeros((4, 1)), [1, 1, 2, 2], 100, 0)

    def test_percent_range(self):
        with pytest.raises(ValidationError):
            inject_imbalance(np.zeros((4, 1)), [1, 1, 2, 2], 101, 0)


class TestAblation:
    def test_drop_delta(self):
        p = ablate_component(ObjectiveParams(), 4)
        np.testing.assert_allclose(p.as_tuple(), (0.25 / 0.95, 0.35 / 0.95, 0.35 / 0.95, 0.0))
        np.testing.assert_allclose(p.as_tuple(), (0.2632, 0.3684, 0.3684, 0.0), atol=5e-5)

    def test_idempotent(self):
        for comp in (1, 2, 3, 4):
            once = ablate_component(ObjectiveParams(), comp)
            twice = ablate_component(once, comp)
            np.testing.assert_allclose(once.as_tuple(), twice.as_tuple(), atol=1e-15)

    def test_alpha_floor(self):
        p = ablate_component(ObjectiveParams(), 1)
        assert p.alpha == 1e-6
        assert sum(p.as_tuple()) == pytest.approx(1.0)

    def test_bad_component(self):
        with pytest.raises(ValidationError):
            ablate_component(ObjectiveParams(), 5)


class TestGrid:
    def test_contains_default(self):
        grid = {tuple(round(v, 9) for v in p.as_tuple()) for p in parameter_grid()}
        assert (0.25, 0.35, 0.35, 0.05) in grid

    def test_all_points_on_simplex(self):
        for p in parameter_grid():
            assert sum(p.as_tuple()) == pytest.approx(1.0, abs=1e-9)
            assert p.alpha > 0

    def test_multiplier_grid_half_sum(self):
        grid = parameter_grid(normalization="multipliers")
        assert grid
        for p in grid:
            a, b, g, d = p.as_tuple()
            assert abs(a / 2 + b / 2 + g + d - 1) <= 1e-9

    def test_sizes(self):
        assert len(parameter_grid()) == 1540
        assert len(parameter_grid(0.25)) == 20

    def test_bad_step(self):
        with pytest.raises(ValueError):
            parameter_grid(0.3)


class TestExperiments:
    def test_sweep_histograms(self, small_ensembles):
        rep = parameter_sweep(small_ensembles[:1], step=0.25)
        assert len(rep.rows) == 20
        assert {r["parameter"] for r in rep.aggregate} == {"alpha", "beta", "gamma", "delta"}
        for name in ("alpha", "beta", "gamma", "delta"):
            total = sum(r["fraction"] for r in rep.aggregate if r["parameter"] == name)
            assert total == pytest.approx(1.0)
        assert rep.config["selected_points"] >= 1

    def test_sweep_parallel_matches_serial(self, small_ensembles):
        a = parameter_sweep(small_ensembles[:1], step=0.25)
        b = parameter_sweep(small_ensembles[:1], step=0.25, jobs=2)
        assert a.to_dict() == b.to_dict()

    def test_epsilon_rows(self, small_ensembles):
        rep = epsilon_tradeoff(small_ensembles)
        assert [r["epsilon"] for r in rep.rows] == sorted(EPSILON_GRID, reverse=True)
        ref = next(r for r in rep.rows if r["epsilon"] == 0.005)
        assert ref["normalized_auc"] == 1.0
        its = [r["iterations"] for r in rep.rows]
        assert all(a <= b for a, b in zip(its, its[1:]))
        # looser thresholds never take meaningfully longer than the tightest one
        ref_t = next(t for t in rep.timings if t["epsilon"] == 0.005)["runtime_s"]
        for t in rep.timings:
            assert t["runtime_s"] <= 1.5 * ref_t + 0.05

    def test_robustness_structure(self, small_ensembles):
        rep = robustness(small_ensembles, k_values=[2])
        assert len(rep.rows) == 2 * 2 * 2
        base = [r for r in rep.aggregate if r["k"] == 0]
        assert all(r["normalized_auc"] == 1.0 for r in base)

    def test_quality_structure(self, small_ensembles):
        rep = fusion_quality(small_ensembles)
        assert len(rep.rows) == 2
        for row in rep.rows:
            assert 0 <= row["iec3_auc"] <= 1
            assert row["best_classifier_auc"] >= 0.5

    def test_aggregate_recomputable(self, small_ensembles):
        rep = fusion_quality(small_ensembles)
        for entry in rep.aggregate:
            vals = [r[entry["metric"]] for r in rep.rows]
            assert entry["mean"] == pytest.approx(np.mean(vals))
            assert entry["sd"] == pytest.approx(np.std(vals, ddof=1))

    def test_imbalance_rows_and_reference(self):
        rep = imbalance(SMALL, x_values=[0, 20], repeats=2)
        assert len(rep.rows) == 4
        assert rep.aggregate[0]["ec3_auc_retained"] == 1.0
        sizes = {(r["x"], r["repeat"]): r["n_objects"] for r in rep.rows}
        assert sizes[(20.0, 0)] == 120 - 8

    def test_report_reproducible(self):
        a = imbalance(SMALL, x_values=[0, 10], repeats=2)
        b = imbalance(SMALL, x_values=[0, 10], repeats=2, jobs=2)
        assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)

    def test_report_files(self, small_ensembles, tmp_path):
        rep = fusion_quality(small_ensembles)
        paths = rep.write(tmp_path)
        for key in ("report", "timings"):
            assert "schema" in json.loads(paths[key].read_text())
        header = paths["rows"].read_text().splitlines()[0].split(",")
        assert "iec3_auc" in header
        assert "iec3_auc" in format_table(rep.aggregate)

    def test_report_drops_nonfinite(self):
        rep = ExperimentReport("x", {}, [{"v": float("nan"), "w": np.float64(1 / 3)}])
        row = rep.to_dict()["rows"][0]
        assert row["v"] is None and row["w"] == float("0.333333333333")


class TestScalingPieces:
    def test_fit_poly_exact(self):
        x = np.arange(1, 8)
        fit = fit_poly(x, 2 * x**2 + 1, 2)
        np.testing.assert_allclose(fit["coefficients"], [2, 0, 1], atol=1e-9)
        assert fit["r2"] == pytest.approx(1.0)

    def test_synthetic_ensemble_sizes(self):
        ens = synthetic_ensemble(50, 4, 2, 3, seed=1)
        assert (ens.num_objects, ens.num_classes, ens.num_classifiers, ens.num_clusterers) == (50, 4, 2, 3)

    def test_tiny_experiment(self):
        spec = ScalingSpec(
            n_max=200, n_fractions=(0.5, 1.0), methods=(2, 3), classes=(2, 3, 4), base_n=100, rounds=1, iterations=2
        )
        rep = scaling_experiment(spec)
        assert [r["sweep"] for r in rep.rows] == ["objects"] * 2 + ["methods"] * 2 + ["classes"] * 3
        assert [f["sweep"] for f in scaling_fits(rep)] == ["objects", "methods", "classes"]
        assert "fit" not in json.dumps(rep.to_dict())


def test_parallel_map_order():
    assert parallel_map(abs, [-3, 1, -2], jobs=2) == [3, 1, 2]


def test_derive_seed_stable():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(2, 1)
