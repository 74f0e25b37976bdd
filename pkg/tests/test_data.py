"""Tests for schema files, CSV ingestion, encoding, splits and the benchmark corpus."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.exceptions import NotFittedError

from condsynth.benchmark import BenchmarkSpec, benchmark_schema, make_benchmark
from condsynth.dataset import (
    Dataset, RawTable, TabularEncoder, class_histogram, dequantize_onehot,
    discretize_onehot, load_csv, split_stratified, write_csv,
)
from condsynth.errors import ContractError, DataError
from condsynth.schema import Feature, Schema, parse_schema, read_schema, write_schema


@pytest.fixture
def toy_schema():
    return Schema(
        features=(
            Feature("temp", "numeric"),
            Feature("humidity", "numeric"),
            Feature("activity", "categorical", ("seated", "standing", "walking")),
        ),
        label="preference",
        classes=("Warmer", "NoChange", "Cooler"),
    )


def write_toy_csv(path, rows, header="temp,humidity,activity,preference"):
    path.write_text(header + "\n" + "\n".join(rows) + ("\n" if rows else ""))
    return path


class TestSchema:
    def test_round_trip_through_file(self, toy_schema, tmp_path):
        p = tmp_path / "schema.ini"
        write_schema(p, toy_schema)
        assert read_schema(p) == toy_schema

    def test_parse_rejects_missing_sections(self):
        with pytest.raises(DataError):
            parse_schema("[features]\nx = numeric\n")

    def test_parse_rejects_bad_kind(self):
        with pytest.raises(DataError, match="kind"):
            parse_schema("[features]\nx = integer\n\n[label]\nname = y\nclasses = a, b\n")

    def test_duplicate_names_rejected(self):
        with pytest.raises(DataError):
            Schema((Feature("x", "numeric"), Feature("x", "numeric")), "y", ("a", "b"))

    def test_label_name_collision_rejected(self):
        with pytest.raises(DataError):
            Schema((Feature("y", "numeric"),), "y", ("a", "b"))

    def test_needs_two_classes(self):
        with pytest.raises(DataError):
            Schema((Feature("x", "numeric"),), "y", ("only",))

    def test_encoded_layout(self, toy_schema):
        assert toy_schema.encoded_width == 5
        blocks = toy_schema.encoded_blocks()
        assert [(b[1], b[2]) for b in blocks] == [(0, 1), (1, 2), (2, 5)]
        assert toy_schema.onehot_blocks() == [(2, 5)]

    def test_digest_is_stable_and_order_sensitive(self, toy_schema):
        assert toy_schema.digest() == parse_schema(toy_schema.to_text()).digest()
        flipped = Schema(toy_schema.features, toy_schema.label, ("Cooler", "NoChange", "Warmer"))
        assert flipped.digest() != toy_schema.digest()


class TestLoadCsv:
    def test_three_valid_rows(self, toy_schema, tmp_path):
        p = write_toy_csv(tmp_path / "d.csv", [
            "20.0,40,seated,Warmer",
            "22.5,45,standing,NoChange",
            "25.0,50,walking,Cooler",
        ])
        table = load_csv(p, toy_schema)
        assert table.n_rows == 3
        assert table.columns["temp"] == [20.0, 22.5, 25.0]
        assert table.columns["activity"][2] == "walking"

    def test_unknown_label_names_row_and_column(self, toy_schema, tmp_path):
        p = write_toy_csv(tmp_path / "d.csv", [
            "20.0,40,seated,Warmer",
            "21.0,41,seated,warmish",
        ])
        with pytest.raises(DataError, match=r"row 2.*'preference'"):
            load_csv(p, toy_schema)

    def test_header_only_gives_empty_table(self, toy_schema, tmp_path):
        p = write_toy_csv(tmp_path / "d.csv", [])
        table = load_csv(p, toy_schema)
        assert table.n_rows == 0

    def test_header_order_insensitive(self, toy_schema, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("preference,activity,temp,humidity\nWarmer,seated,20.0,40\n")
        table = load_csv(p, toy_schema)
        assert table.columns["temp"] == [20.0]

    def test_missing_column_rejected(self, toy_schema, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("temp,humidity,preference\n20.0,40,Warmer\n")
        with pytest.raises(DataError, match="activity"):
            load_csv(p, toy_schema)

    def test_unparseable_number(self, toy_schema, tmp_path):
        p = write_toy_csv(tmp_path / "d.csv", ["warm,40,seated,Warmer"])
        with pytest.raises(DataError, match=r"row 1.*'temp'"):
            load_csv(p, toy_schema)

    def test_unknown_level(self, toy_schema, tmp_path):
        p = write_toy_csv(tmp_path / "d.csv", ["20.0,40,sprinting,Warmer"])
        with pytest.raises(DataError, match="sprinting"):
            load_csv(p, toy_schema)

    def test_missing_cell_rejected(self, toy_schema, tmp_path):
        p = write_toy_csv(tmp_path / "d.csv", ["20.0,,seated,Warmer"])
        with pytest.raises(DataError, match=r"row 1.*'humidity'"):
            load_csv(p, toy_schema)

    def test_quoted_cells(self, toy_schema, tmp_path):
        p = write_toy_csv(tmp_path / "d.csv", ['"20.0","40","seated","Warmer"'])
        assert load_csv(p, toy_schema).columns["temp"] == [20.0]


class TestEncoder:
    def make_table(self, toy_schema):
        return RawTable(toy_schema, {
            "temp": [0.0, 2.0, 0.0, 2.0],
            "humidity": [40.0, 44.0, 40.0, 44.0],
            "activity": ["seated", "standing", "walking", "seated"],
            "preference": ["Warmer", "NoChange", "Cooler", "Warmer"],
        })

    def test_two_point_column_standardizes_to_pm_one(self, toy_schema):
        ds = TabularEncoder(toy_schema).fit(self.make_table(toy_schema)).transform(self.make_table(toy_schema))
        assert np.allclose(sorted(set(ds.X[:, 0])), [-1.0, 1.0])

    def test_one_hot_rows_sum_to_one(self, toy_schema):
        ds = TabularEncoder(toy_schema).fit(self.make_table(toy_schema)).transform(self.make_table(toy_schema))
        assert np.array_equal(ds.X[:, 2:5].sum(axis=1), np.ones(4))
        assert np.array_equal(ds.X[0, 2:5], [1.0, 0.0, 0.0])

    def test_label_ids_follow_schema_order(self, toy_schema):
        ds = TabularEncoder(toy_schema).fit(self.make_table(toy_schema)).transform(self.make_table(toy_schema))
        assert ds.y.tolist() == [0, 1, 2, 0]

    def test_stats_reuse_shifts_test_means(self, toy_schema):
        enc = TabularEncoder(toy_schema).fit(self.make_table(toy_schema))
        shifted = self.make_table(toy_schema)
        shifted.columns["temp"] = [10.0, 12.0, 10.0, 12.0]
        ds = enc.transform(shifted)
        assert abs(ds.X[:, 0].mean()) > 1.0  # training stats, not refitted

    def test_zero_variance_rejected(self, toy_schema):
        table = self.make_table(toy_schema)
        table.columns["humidity"] = [40.0] * 4
        with pytest.raises(DataError, match="humidity"):
            TabularEncoder(toy_schema).fit(table)

    def test_requires_fit(self, toy_schema):
        with pytest.raises(NotFittedError):
            TabularEncoder(toy_schema).transform(self.make_table(toy_schema))

    def test_inverse_round_trips_raw_values(self, toy_schema):
        table = self.make_table(toy_schema)
        enc = TabularEncoder(toy_schema).fit(table)
        back = enc.inverse_transform(enc.transform(table))
        assert np.abs(np.array(back.columns["temp"]) - np.array(table.columns["temp"])).max() < 1e-10
        assert back.columns["activity"] == table.columns["activity"]
        assert back.columns["preference"] == table.columns["preference"]

    def test_from_stats_round_trip(self, toy_schema):
        enc = TabularEncoder(toy_schema).fit(self.make_table(toy_schema))
        clone = TabularEncoder.from_stats(toy_schema, enc.stats_)
        a = enc.transform(self.make_table(toy_schema))
        b = clone.transform(self.make_table(toy_schema))
        assert np.array_equal(a.X, b.X)

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=2, max_size=40))
    def test_encode_destandardize_round_trip(self, values):
        if np.std(values) == 0.0:
            values = values + [values[0] + 1.0]
        schema = Schema((Feature("v", "numeric"),), "y", ("a", "b"))
        table = RawTable(schema, {"v": [float(v) for v in values],
                                  "y": ["a", "b"] * (len(values) // 2) + ["a"] * (len(values) % 2)})
        enc = TabularEncoder(schema).fit(table)
        ds = enc.transform(table)
        back = np.array(enc.inverse_transform(ds).columns["v"])
        scale = max(1.0, np.abs(values).max())
        assert np.abs(back - np.array(values, dtype=float)).max() <= 1e-10 * scale


class TestSplit:
    def make_dataset(self, toy_schema, counts=(65, 18, 17), seed=0):
        rng = np.random.default_rng(seed)
        n = sum(counts)
        X = rng.normal(size=(n, toy_schema.encoded_width))
        y = np.repeat(np.arange(3), counts)
        order = rng.permutation(n)
        return Dataset(X[order], y[order], toy_schema)

    def test_per_class_rounding(self, toy_schema):
        ds = self.make_dataset(toy_schema)
        train, test = split_stratified(ds, 0.2, seed=1)
        assert class_histogram(test).tolist() == [13, 4, 3]
        assert class_histogram(train).tolist() == [52, 14, 14]

    def test_same_seed_same_indices(self, toy_schema):
        ds = self.make_dataset(toy_schema)
        a_train, a_test = split_stratified(ds, 0.2, seed=9)
        b_train, b_test = split_stratified(ds, 0.2, seed=9)
        assert np.array_equal(a_test.X, b_test.X)
        assert np.array_equal(a_train.X, b_train.X)

    def test_partition_property(self, toy_schema):
        ds = self.make_dataset(toy_schema)
        train, test = split_stratified(ds, 0.2, seed=3)
        combined = np.concatenate([train.X, test.X])
        assert combined.shape[0] == ds.n
        # every original row appears exactly once across the two splits
        original = {tuple(r) for r in ds.X}
        assert {tuple(r) for r in combined} == original

    def test_small_class_rejected(self, toy_schema):
        ds = self.make_dataset(toy_schema, counts=(10, 1, 10))
        with pytest.raises(DataError, match="NoChange"):
            split_stratified(ds, 0.2, seed=0)

    def test_frac_bounds(self, toy_schema):
        ds = self.make_dataset(toy_schema)
        for bad in (0.0, 0.5, 0.9):
            with pytest.raises(ContractError):
                split_stratified(ds, bad, seed=0)

    def test_provenance_tags(self, toy_schema):
        ds = self.make_dataset(toy_schema)
        train, test = split_stratified(ds, 0.2, seed=5)
        assert train.provenance.endswith(":train") and test.provenance.endswith(":test")
        assert train.provenance.split(":")[1] == test.provenance.split(":")[1]

    def test_raw_table_split(self, toy_schema):
        table = RawTable(toy_schema, {
            "temp": [float(i) for i in range(10)],
            "humidity": [float(i) for i in range(10)],
            "activity": ["seated"] * 10,
            "preference": ["Warmer"] * 5 + ["NoChange"] * 3 + ["Cooler"] * 2,
        })
        train, test = split_stratified(table, 0.4, seed=0)
        assert train.n_rows + test.n_rows == 10
        merged = sorted(train.columns["temp"] + test.columns["temp"])
        assert merged == [float(i) for i in range(10)]


class TestHistogram:
    def test_empty_dataset(self, toy_schema):
        ds = Dataset(np.zeros((0, toy_schema.encoded_width)), np.zeros(0, dtype=int), toy_schema)
        assert class_histogram(ds).tolist() == [0, 0, 0]

    def test_counts_sum_to_n(self, toy_schema):
        rng = np.random.default_rng(0)
        y = rng.integers(0, 3, size=57)
        ds = Dataset(np.zeros((57, toy_schema.encoded_width)), y, toy_schema)
        assert class_histogram(ds).sum() == 57


class TestBenchmark:
    def test_default_counts(self):
        spec = BenchmarkSpec()
        assert spec.class_counts().tolist() == [3250, 875, 875]
        table = make_benchmark(spec)
        assert class_histogram(table).tolist() == [3250, 875, 875]

    def test_degenerate_prior(self):
        spec = BenchmarkSpec(n=60, d=4, priors=(1.0, 0.0, 0.0), seed=0)
        table = make_benchmark(spec)
        assert class_histogram(table).tolist() == [60, 0, 0]

    def test_same_seed_identical(self):
        a = make_benchmark(BenchmarkSpec(n=200, d=4, seed=7))
        b = make_benchmark(BenchmarkSpec(n=200, d=4, seed=7))
        assert a.columns == b.columns

    def test_priors_must_sum_to_one(self):
        with pytest.raises(ContractError):
            BenchmarkSpec(priors=(0.6, 0.2, 0.1))

    def test_class_means_near_spec_means(self):
        spec = BenchmarkSpec()
        table = make_benchmark(spec)
        means = spec.mean_matrix()
        counts = spec.class_counts()
        y = table.labels_as_ints()
        X = np.column_stack([table.columns[f.name] for f in table.schema.features])
        for c in range(3):
            sample_mean = X[y == c].mean(axis=0)
            bound = 3.0 * spec.sigma / np.sqrt(counts[c])
            assert np.abs(sample_mean - means[c]).max() < bound

    def test_pairwise_mean_distances(self):
        spec = BenchmarkSpec()
        m = spec.mean_matrix()
        for i in range(3):
            for j in range(i + 1, 3):
                assert np.linalg.norm(m[i] - m[j]) == pytest.approx(2.0)

    def test_csv_round_trip(self, tmp_path):
        spec = BenchmarkSpec(n=120, d=3, seed=1)
        table = make_benchmark(spec)
        p = tmp_path / "bench.csv"
        write_csv(p, table)
        back = load_csv(p, benchmark_schema(spec))
        assert back.columns == table.columns


class TestOneHotHelpers:
    def test_dequantize_only_touches_onehot(self, toy_schema):
        X = np.zeros((4, 5))
        X[:, 2] = 1.0
        out = dequantize_onehot(X, toy_schema, np.random.default_rng(0))
        assert np.array_equal(out[:, :2], X[:, :2])
        assert ((out[:, 2:5] - X[:, 2:5]) >= 0).all()
        assert ((out[:, 2:5] - X[:, 2:5]) < 0.05).all()

    def test_discretize_snaps_argmax(self, toy_schema):
        X = np.array([[0.3, -0.1, 0.2, 0.9, 0.1]])
        out = discretize_onehot(X, toy_schema)
        assert out[0, 2:5].tolist() == [0.0, 1.0, 0.0]
        assert out[0, 0] == 0.3

    def test_dequantize_then_discretize_is_identity_on_onehot(self, toy_schema):
        rng = np.random.default_rng(3)
        X = np.zeros((50, 5))
        X[np.arange(50), 2 + rng.integers(0, 3, size=50)] = 1.0
        noisy = dequantize_onehot(X, toy_schema, rng)
        assert np.array_equal(discretize_onehot(noisy, toy_schema)[:, 2:5], X[:, 2:5])
