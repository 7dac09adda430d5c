import numpy as np
import pytest

from e2b.data import (
    BasisSpec,
    CsvSchema,
    Dataset,
    build_problem,
    demean,
    evaluate_density,
    expand_basis,
    load_csv,
    treatment_density,
)
from e2b.errors import DataError, DegenerateDataError, ParseError, SchemaError


def make_dataset(rng, n=20, r=3):
    return Dataset(x=rng.standard_normal((n, r)), a=rng.standard_normal(n), y=rng.standard_normal(n))


class TestDataset:
    def test_rejects_single_row(self):
        with pytest.raises(DataError):
            Dataset(x=np.ones((1, 2)), a=np.ones(1), y=np.ones(1))

    def test_rejects_non_finite(self):
        with pytest.raises(DataError):
            Dataset(x=np.array([[1.0], [np.inf]]), a=np.zeros(2), y=np.zeros(2))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(DataError):
            Dataset(x=np.ones((3, 2)), a=np.ones(2), y=np.ones(3))


class TestDemean:
    def test_simple_treatment_centering(self):
        d = Dataset(x=np.array([[0.0], [0.0]]), a=np.array([1.0, 3.0]), y=np.zeros(2))
        centered, _ = demean(d)
        np.testing.assert_allclose(centered.a, [-1.0, 1.0])

    def test_idempotent(self, rng):
        d = make_dataset(rng)
        once, exp_once = demean(d)
        twice, exp_twice = demean(once)
        np.testing.assert_allclose(twice.a, once.a, atol=1e-12)
        np.testing.assert_allclose(exp_twice.phi, exp_once.phi, atol=1e-12)

    def test_poly2_column_count_and_centering(self, rng):
        d = make_dataset(rng, n=50, r=2)
        _, expansion = demean(d, BasisSpec("poly2"))
        assert expansion.K == 2 + 3  # r + r(r+1)/2
        np.testing.assert_allclose(expansion.phi.mean(axis=0), 0.0, atol=1e-12)

    def test_constant_treatment_errors(self):
        d = Dataset(x=np.zeros((3, 1)), a=np.ones(3), y=np.zeros(3))
        with pytest.raises(DegenerateDataError):
            demean(d)

    def test_basis_ordering_is_stable(self, rng):
        x = rng.standard_normal((10, 3))
        first = expand_basis(x, BasisSpec("poly2"))
        second = expand_basis(x.copy(), BasisSpec("poly2"))
        assert first.tobytes() == second.tobytes()


class TestBuildProblem:
    def test_hand_instance(self):
        d = Dataset(x=np.array([[-1.0], [1.0]]), a=np.array([-2.0, 2.0]), y=np.zeros(2))
        centered, expansion = demean(d)
        p = build_problem(centered, expansion, np.zeros(2))
        np.testing.assert_allclose(p.constraints, [[-1.0, 1.0], [-2.0, 2.0], [2.0, 2.0]])

    def test_wrong_ell_length(self, rng):
        centered, expansion = demean(make_dataset(rng, n=5))
        with pytest.raises(DataError):
            build_problem(centered, expansion, np.zeros(4))

    def test_requires_demeaned_flags(self, rng):
        d = make_dataset(rng, n=5)
        _, expansion = demean(d)
        with pytest.raises(DataError):
            build_problem(d, expansion, np.zeros(5))

    def test_columns_match_independent_recomputation(self, rng):
        d = make_dataset(rng, n=5, r=2)
        centered, expansion = demean(d)
        p = build_problem(centered, expansion, np.zeros(5))
        # column-by-column oracle, scalar arithmetic only
        for i in range(5):
            phi_i = expansion.phi[i]
            a_i = centered.a[i]
            expected = np.concatenate([phi_i, [a_i], a_i * phi_i])
            np.testing.assert_allclose(p.constraints[:, i], expected, atol=0)

    def test_first_block_row_means_vanish(self, rng):
        d = make_dataset(rng, n=40, r=3)
        centered, expansion = demean(d)
        p = build_problem(centered, expansion, np.zeros(40))
        row_means = p.constraints.mean(axis=1)
        np.testing.assert_allclose(row_means[: expansion.K + 1], 0.0, atol=1e-10)


class TestTreatmentDensity:
    def test_two_point_closed_form(self):
        feats = treatment_density(np.array([0.0, 1.0]), bandwidth=1.0)
        standard_normal_pdf = lambda t: np.exp(-0.5 * t**2) / np.sqrt(2 * np.pi)  # noqa: E731
        expected = 0.5 * (standard_normal_pdf(0.0) + standard_normal_pdf(1.0))
        np.testing.assert_allclose(feats.p_hat[0], expected, rtol=1e-12)

    def test_matches_standard_normal_density_near_zero(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal(1000)
        feats = treatment_density(a)
        near_zero = np.abs(a) < 0.05
        assert near_zero.any()
        np.testing.assert_allclose(feats.p_hat[near_zero], 0.3989, atol=0.05)

    def test_constant_treatment_errors(self):
        with pytest.raises(DegenerateDataError):
            treatment_density(np.ones(5))

    def test_integrates_to_one(self, rng):
        a = rng.standard_normal(200) * 2.0 + 1.0
        feats = treatment_density(a)
        h = feats.bandwidth
        grid = np.linspace(a.min() - 4 * h, a.max() + 4 * h, 4000)
        density = evaluate_density(a, grid, h)
        assert abs(np.trapezoid(density, grid) - 1.0) < 1e-3


class TestLoadCsv:
    def write(self, tmp_path, text):
        path = tmp_path / "data.csv"
        path.write_text(text, encoding="utf-8")
        return path

    def test_three_row_file(self, tmp_path):
        path = self.write(tmp_path, "PM2.5,CMR,z1,z2\n1,10,0.1,0.2\n2,20,0.3,0.4\n3,30,0.5,0.6\n")
        d = load_csv(path, CsvSchema(treatment="PM2.5", response="CMR"))
        assert d.n == 3 and d.r == 2
        np.testing.assert_allclose(d.a, [1.0, 2.0, 3.0])
        np.testing.assert_allclose(d.y, [10.0, 20.0, 30.0])
        assert d.columns == ("z1", "z2")

    def test_missing_response_column(self, tmp_path):
        path = self.write(tmp_path, "PM2.5,z1\n1,2\n3,4\n")
        with pytest.raises(SchemaError):
            load_csv(path, CsvSchema(treatment="PM2.5", response="CMR"))

    def test_non_numeric_cell_names_location(self, tmp_path):
        path = self.write(tmp_path, "a,y,z\n1,2,3\n1,oops,3\n")
        with pytest.raises(ParseError, match=r":3:.*'y'"):
            load_csv(path, CsvSchema(treatment="a", response="y"))

    def test_confounder_subset(self, tmp_path):
        path = self.write(tmp_path, "a,y,z1,z2,z3\n1,2,3,4,5\n6,7,8,9,10\n")
        d = load_csv(path, CsvSchema(treatment="a", response="y", confounders=("z3", "z1")))
        assert d.columns == ("z3", "z1")
        np.testing.assert_allclose(d.x[0], [5.0, 3.0])

    def test_too_few_rows(self, tmp_path):
        path = self.write(tmp_path, "a,y,z\n1,2,3\n")
        with pytest.raises(DataError):
            load_csv(path, CsvSchema(treatment="a", response="y"))

    def test_schema_sample_has_ten_confounders(self, tmp_path):
        from e2b.synthgen import gen_schema_sample

        columns, mat = gen_schema_sample(seed=3, n=40)
        lines = [",".join(columns)]
        lines += [",".join(repr(float(v)) for v in row) for row in mat]
        path = self.write(tmp_path, "\n".join(lines) + "\n")
        d = load_csv(path, CsvSchema(treatment="PM2.5", response="CMR"))
        assert d.r == 10 and d.n == 40
