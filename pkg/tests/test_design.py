"""Tests for design construction and CSV ingestion."""

import numpy as np
import pytest

from bnpirt.design import (
    DataError,
    ItemResponseData,
    WrongBuilderError,
    append_covariates,
    build_dichotomous,
    build_multidimensional,
    build_polytomous,
    ingest_csv,
)


def binary_data(n=2, i=2, cells=None):
    if cells is None:
        cells = [(p, it, (p + it) % 2) for p in range(1, n + 1) for it in range(1, i + 1)]
    persons, items, scores = zip(*cells)
    return ItemResponseData(
        n_persons=n,
        n_items=i,
        persons=np.array(persons),
        items=np.array(items),
        scores=np.array(scores),
        category_counts=np.ones(i, dtype=int),
    )


class TestItemResponseData:
    def test_duplicate_cell_rejected(self):
        with pytest.raises(DataError, match="duplicate"):
            binary_data(cells=[(1, 1, 0), (1, 1, 1)])

    def test_score_above_categories_rejected(self):
        with pytest.raises(DataError, match="outside"):
            binary_data(cells=[(1, 1, 2)])

    def test_sparse_indices_rejected(self):
        with pytest.raises(DataError, match="dense"):
            ItemResponseData(2, 2, [1, 3], [1, 2], [0, 1], [1, 1])


class TestBuildDichotomous:
    def test_row_layout_first_person_first_item(self):
        design = build_dichotomous(binary_data())
        assert design.dimension == 1 + 2 + 2
        k = list(zip(design.persons, design.items)).index((1, 1))
        np.testing.assert_array_equal(design.X[k], [1, 1, 0, -1, 0])

    def test_row_layout_last_cell(self):
        design = build_dichotomous(binary_data())
        k = list(zip(design.persons, design.items)).index((2, 2))
        np.testing.assert_array_equal(design.X[k], [1, 0, 1, 0, -1])

    def test_rows_sum_to_one(self):
        design = build_dichotomous(binary_data(n=4, i=3))
        np.testing.assert_allclose(design.X.sum(axis=1), 1.0)

    def test_labels(self):
        design = build_dichotomous(binary_data())
        assert design.column_labels == (
            "Intercept",
            "Ability(1)",
            "Ability(2)",
            "Difficulty(1)",
            "Difficulty(2)",
        )

    def test_polytomous_data_redirected(self):
        data = ItemResponseData(1, 1, [1], [1], [2], [2])
        with pytest.raises(WrongBuilderError, match="build_polytomous"):
            build_dichotomous(data)

    def test_exactly_one_person_and_item_flag(self):
        design = build_dichotomous(binary_data(n=5, i=4))
        person_block = design.X[:, 1:6]
        item_block = design.X[:, 6:]
        assert np.all((person_block == 1).sum(axis=1) == 1)
        assert np.all((item_block == -1).sum(axis=1) == 1)
        assert np.all(item_block.max(axis=1) == 0)


class TestBuildPolytomous:
    def poly_data(self):
        # N=1, I=2, scores up to 2
        return ItemResponseData(
            1, 2, [1, 1], [1, 2], [2, 0], np.array([2, 2])
        )

    def test_observed_category_indicator(self):
        design = build_polytomous(self.poly_data())
        assert design.dimension == 1 + 1 + 2 * 2
        k = list(zip(design.persons, design.items)).index((1, 1))
        # column order: (i1,u1), (i2,u1), (i1,u2), (i2,u2)
        np.testing.assert_array_equal(design.X[k], [1, 1, 0, 0, 1, 0])
        assert design.u[k] == 1

    def test_reference_category_row(self):
        design = build_polytomous(self.poly_data())
        k = list(zip(design.persons, design.items)).index((1, 2))
        np.testing.assert_array_equal(design.X[k], [1, 1, 0, 0, 0, 0])
        assert design.u[k] == 0

    def test_labels_category_major(self):
        design = build_polytomous(self.poly_data())
        assert design.column_labels[2:] == (
            "Difficulty(1,1)",
            "Difficulty(2,1)",
            "Difficulty(1,2)",
            "Difficulty(2,2)",
        )

    def test_item_block_at_most_one_indicator(self):
        rng = np.random.default_rng(42)
        cells = [
            (p, i, int(rng.integers(0, 4)))
            for p in range(1, 6)
            for i in range(1, 4)
        ]
        data = ItemResponseData(
            5, 3, *map(np.array, zip(*cells)), category_counts=np.array([3, 3, 3])
        )
        design = build_polytomous(data)
        block = design.X[:, 6:]
        assert np.all(np.count_nonzero(block, axis=1) <= 1)
        assert set(np.unique(block)) <= {0.0, 1.0}

    def test_binary_collapse_matches_dichotomous_structure(self):
        # all-binary data: category block has one category per item and
        # matches the dichotomous item block up to the sign convention
        data = binary_data(n=3, i=2)
        poly = build_polytomous(data)
        dich = build_dichotomous(data)
        assert poly.dimension == dich.dimension
        np.testing.assert_array_equal(poly.u, dich.u)
        np.testing.assert_array_equal(poly.X[:, :4], dich.X[:, :4] * [1, 1, 1, 1])
        scored = poly.u == 1
        np.testing.assert_array_equal(poly.X[scored, 4:], -dich.X[scored, 4:])
        assert np.all(poly.X[~scored, 4:] == 0)


class TestBuildMultidimensional:
    def md_data(self):
        return ItemResponseData(
            2,
            2,
            [1, 1, 2, 2],
            [1, 2, 1, 2],
            [1, 0, 0, 1],
            [1, 1],
            dimension_map=np.array([1, 2]),
        )

    def test_person_block_layout(self):
        design = build_multidimensional(self.md_data())
        # person block columns: (p1,d1),(p2,d1),(p1,d2),(p2,d2)
        k = list(zip(design.persons, design.items)).index((1, 2))  # item 2 on dim 2
        np.testing.assert_array_equal(design.X[k, 1:5], [0, 0, 1, 0])
        assert design.column_labels[1:5] == (
            "Ability(1,1)",
            "Ability(2,1)",
            "Ability(1,2)",
            "Ability(2,2)",
        )

    def test_single_dimension_collapses_to_base(self):
        data = ItemResponseData(
            2, 2, [1, 1, 2], [1, 2, 1], [1, 0, 0], [1, 1], dimension_map=np.array([1, 1])
        )
        md = build_multidimensional(data)
        base = build_dichotomous(
            ItemResponseData(2, 2, [1, 1, 2], [1, 2, 1], [1, 0, 0], [1, 1])
        )
        np.testing.assert_array_equal(md.X, base.X)

    def test_exactly_one_person_flag(self):
        design = build_multidimensional(self.md_data())
        assert np.all((design.X[:, 1:5] != 0).sum(axis=1) == 1)

    def test_missing_dimension_map(self):
        with pytest.raises(DataError, match="dimension map"):
            build_multidimensional(binary_data())


class TestAppendCovariates:
    def cov_data(self, cov, names):
        data = binary_data(n=3, i=2, cells=[(p, i, (p + i) % 2) for p in (1, 2, 3) for i in (1, 2)])
        return ItemResponseData(
            n_persons=3,
            n_items=2,
            persons=data.persons,
            items=data.items,
            scores=data.scores,
            category_counts=data.category_counts,
            covariate_names=names,
            person_covariates=np.asarray(cov, dtype=float),
        )

    def test_adds_columns_with_missing_indicator(self):
        data = self.cov_data(
            [[3.0, 1.0], [5.0, np.nan], [7.0, 0.0]], ["AGE", "FEMALE"]
        )
        design = append_covariates(build_dichotomous(data), data)
        assert design.column_labels[-3:] == (
            "Covariate(AGE)",
            "Covariate(FEMALE)",
            "MissingIndicator(FEMALE)",
        )
        assert design.dimension == 6 + 3

    def test_numeric_standardized_binary_kept(self):
        data = self.cov_data([[3.0, 1.0], [5.0, 0.0], [7.0, 1.0]], ["AGE", "FEMALE"])
        design = append_covariates(build_dichotomous(data), data)
        age = design.X[:, design.column_index("Covariate(AGE)")]
        by_person = {p: a for p, a in zip(design.persons, age)}
        vals = np.array([by_person[p] for p in (1, 2, 3)])
        np.testing.assert_allclose(vals.mean(), 0.0, atol=1e-12)
        np.testing.assert_allclose(vals.std(ddof=1), 1.0, atol=1e-12)
        female = design.X[:, design.column_index("Covariate(FEMALE)")]
        assert set(np.unique(female)) <= {0.0, 1.0}

    def test_binary_missing_imputed_by_mode(self):
        data = self.cov_data([[1.0, 1.0], [2.0, np.nan], [3.0, 1.0]], ["AGE", "FEMALE"])
        design = append_covariates(build_dichotomous(data), data)
        female = design.X[:, design.column_index("Covariate(FEMALE)")]
        miss = design.X[:, design.column_index("MissingIndicator(FEMALE)")]
        person2 = design.persons == 2
        assert np.all(female[person2] == 1.0)
        assert np.all(miss[person2] == 1.0)
        assert np.all(miss[~person2] == 0.0)

    def test_no_covariates_identity(self):
        data = binary_data()
        design = build_dichotomous(data)
        assert append_covariates(design, data) is design

    def test_zero_variance_warns(self):
        data = self.cov_data([[4.0, 1.0], [4.0, 0.0], [4.0, 1.0]], ["AGE", "FEMALE"])
        with pytest.warns(UserWarning, match="zero variance"):
            design = append_covariates(build_dichotomous(data), data)
        age = design.X[:, design.column_index("Covariate(AGE)")]
        assert np.all(age == 4.0)


class TestIngestCsv(object):
    def write(self, tmp_path, name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    def test_basic_read(self, tmp_path):
        path = self.write(tmp_path, "r.csv", "person,item,score\n1,1,1\n1,2,0\n2,1,1\n")
        data = ingest_csv(path)
        assert data.n_persons == 2 and data.n_items == 2
        assert data.n_observations == 3

    def test_max_score_rule(self, tmp_path):
        path = self.write(tmp_path, "r.csv", "person,item,score\n1,1,2\n2,1,0\n1,2,1\n")
        data = ingest_csv(path)
        assert data.category_counts[0] == 2
        assert data.category_counts[1] == 1

    def test_duplicate_cell_named(self, tmp_path):
        path = self.write(tmp_path, "r.csv", "person,item,score\n1,1,1\n1,1,0\n")
        with pytest.raises(DataError, match="person=1, item=1"):
            ingest_csv(path)

    def test_malformed_row_has_line_number(self, tmp_path):
        path = self.write(tmp_path, "r.csv", "person,item,score\n1,1,1\n1,x,0\n")
        with pytest.raises(DataError, match=":3"):
            ingest_csv(path)

    def test_dense_reindexing(self, tmp_path):
        path = self.write(tmp_path, "r.csv", "person,item,score\n10,7,1\n30,7,0\n10,9,1\n")
        data = ingest_csv(path)
        assert data.n_persons == 2 and data.n_items == 2
        assert sorted(set(data.persons.tolist())) == [1, 2]

    def test_covariates_blank_is_missing(self, tmp_path):
        r = self.write(tmp_path, "r.csv", "person,item,score\n1,1,1\n2,1,0\n")
        c = self.write(tmp_path, "c.csv", "person,AGE,FEMALE\n1,3,\n2,5,1\n")
        data = ingest_csv(r, covariates_path=c)
        assert data.covariate_names == ["AGE", "FEMALE"]
        assert np.isnan(data.person_covariates[0, 1])
        assert data.person_covariates[1, 1] == 1.0

    def test_dimensions_file(self, tmp_path):
        r = self.write(tmp_path, "r.csv", "person,item,score\n1,1,1\n1,2,0\n")
        d = self.write(tmp_path, "d.csv", "item,dimension\n1,1\n2,2\n")
        data = ingest_csv(r, dimensions_path=d)
        np.testing.assert_array_equal(data.dimension_map, [1, 2])

    def test_incomplete_dimensions_rejected(self, tmp_path):
        r = self.write(tmp_path, "r.csv", "person,item,score\n1,1,1\n1,2,0\n")
        d = self.write(tmp_path, "d.csv", "item,dimension\n1,1\n")
        with pytest.raises(DataError, match="no dimension"):
            ingest_csv(r, dimensions_path=d)

    def test_bad_header(self, tmp_path):
        path = self.write(tmp_path, "r.csv", "a,b,c\n1,1,1\n")
        with pytest.raises(DataError, match="header"):
            ingest_csv(path)

    def test_round_trip_rows(self, tmp_path):
        path = self.write(tmp_path, "r.csv", "person,item,score\n1,1,1\n1,2,0\n2,1,1\n2,2,1\n")
        data = ingest_csv(path)
        design = build_dichotomous(data)
        assert design.n_observations == data.n_observations
        src = set(zip(data.persons.tolist(), data.items.tolist(), data.scores.tolist()))
        out = set(zip(design.persons.tolist(), design.items.tolist(), design.u.tolist()))
        assert src == out
