"""Response-data ingestion and design-vector construction.

Item-response records become rows of a binary/indicator design matrix.
The base builder handles dichotomous scores; polytomous scores are reduced
to binary responses with per-category item indicator columns; person-level
covariates and multidimensional ability blocks extend the base layout.
Every column carries a semantic label so coefficient indices map back to
their roles (intercept / ability / difficulty / covariate slope).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class WrongBuilderError(DataError):
    """Raised when a builder is applied to data it does not handle."""


@dataclass
class ItemResponseData:
    """Observed (person, item, score) records plus optional side information.

    Person and item indices are dense 1..n_persons and 1..n_items.  Scores
    are raw category values in 0..m_i for each item i.  ``person_covariates``
    holds one row per person with NaN marking missing values.
    """

    n_persons: int
    n_items: int
    persons: np.ndarray
    items: np.ndarray
    scores: np.ndarray
    category_counts: np.ndarray
    covariate_names: list[str] | None = None
    person_covariates: np.ndarray | None = None
    dimension_map: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.persons = np.asarray(self.persons, dtype=int)
        self.items = np.asarray(self.items, dtype=int)
        self.scores = np.asarray(self.scores, dtype=int)
        self.category_counts = np.asarray(self.category_counts, dtype=int)
        if not (len(self.persons) == len(self.items) == len(self.scores)):
            raise DataError("persons, items and scores must have equal length")
        if self.n_persons < 1 or self.n_items < 1:
            raise DataError("need at least one person and one item")
        if self.category_counts.size != self.n_items:
            raise DataError("category_counts must have one entry per item")
        if np.any(self.category_counts < 1):
            raise DataError("every item needs at least two categories (m_i >= 1)")
        if self.persons.size:
            if self.persons.min() < 1 or self.persons.max() > self.n_persons:
                raise DataError("person indices must be dense in 1..n_persons")
            if self.items.min() < 1 or self.items.max() > self.n_items:
                raise DataError("item indices must be dense in 1..n_items")
        cells = set()
        for p, i, s in zip(self.persons, self.items, self.scores):
            if (p, i) in cells:
                raise DataError(f"duplicate observation for person {p}, item {i}")
            cells.add((p, i))
            m_i = self.category_counts[i - 1]
            if s < 0 or s > m_i:
                raise DataError(
                    f"score {s} outside 0..{m_i} for person {p}, item {i}"
                )
        if self.person_covariates is not None:
            self.person_covariates = np.asarray(self.person_covariates, dtype=float)
            q = 0 if self.covariate_names is None else len(self.covariate_names)
            if self.person_covariates.shape != (self.n_persons, q):
                raise DataError(
                    f"person_covariates must be ({self.n_persons}, {q}), got {self.person_covariates.shape}"
                )
        if self.dimension_map is not None:
            self.dimension_map = np.asarray(self.dimension_map, dtype=int)
            if self.dimension_map.size != self.n_items:
                raise DataError("dimension_map must have one entry per item")

    @property
    def n_observations(self) -> int:
        return int(self.persons.size)

    @property
    def max_categories(self) -> int:
        return int(self.category_counts.max())

    @property
    def is_dichotomous(self) -> bool:
        return bool(np.all(self.category_counts == 1))


@dataclass(frozen=True)
class ObservationDesign:
    """Immutable design matrix with per-row cell identity and column labels."""

    persons: np.ndarray
    items: np.ndarray
    u: np.ndarray
    X: np.ndarray
    column_labels: tuple[str, ...]
    raw_scores: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.X.shape != (self.u.size, len(self.column_labels)):
            raise DataError("design matrix shape does not match labels / responses")
        if self.X.shape[0] and not np.all(self.X[:, 0] == 1.0):
            raise DataError("first design column must be the constant 1 intercept")

    @property
    def dimension(self) -> int:
        return int(self.X.shape[1])

    @property
    def n_observations(self) -> int:
        return int(self.u.size)

    def column_index(self, label: str) -> int:
        try:
            return self.column_labels.index(label)
        except ValueError:
            raise KeyError(f"no design column labeled {label!r}") from None


def build_dichotomous(data: ItemResponseData) -> ObservationDesign:
    """Base design: intercept, +1 person flag, -1 item flag per row.

    Dimension is 1 + n_persons + n_items; column p is Ability(p) and column
    n_persons + i is Difficulty(i).
    """
    if not data.is_dichotomous:
        bad = np.flatnonzero(data.category_counts > 1) + 1
        raise WrongBuilderError(
            f"items {bad.tolist()} have more than two categories; use build_polytomous"
        )
    n, n_obs = data.n_persons, data.n_observations
    dim = 1 + n + data.n_items
    X = np.zeros((n_obs, dim))
    X[:, 0] = 1.0
    rows = np.arange(n_obs)
    X[rows, data.persons] = 1.0
    X[rows, n + data.items] = -1.0
    labels = (
        ["Intercept"]
        + [f"Ability({p})" for p in range(1, n + 1)]
        + [f"Difficulty({i})" for i in range(1, data.n_items + 1)]
    )
    return ObservationDesign(
        persons=data.persons.copy(),
        items=data.items.copy(),
        u=data.scores.astype(int).copy(),
        X=X,
        column_labels=tuple(labels),
        raw_scores=data.scores.copy(),
    )


def build_polytomous(data: ItemResponseData) -> ObservationDesign:
    """Category-indicator design for polytomous scores.

    The binary response is 1 when the raw score exceeds the reference
    category 0.  The item block has one column per (item, category) pair,
    category-major, carrying a +1 indicator at the observed category;
    reference-category rows leave the block all zero.  Also valid for
    all-binary data, where it degenerates to a one-category item block.
    """
    n, n_obs, m_star = data.n_persons, data.n_observations, data.max_categories
    dim = 1 + n + m_star * data.n_items
    X = np.zeros((n_obs, dim))
    X[:, 0] = 1.0
    rows = np.arange(n_obs)
    X[rows, data.persons] = 1.0
    scored = data.scores > 0
    cat_col = 1 + n + (data.scores[scored] - 1) * data.n_items + (data.items[scored] - 1)
    X[rows[scored], cat_col] = 1.0
    labels = (
        ["Intercept"]
        + [f"Ability({p})" for p in range(1, n + 1)]
        + [
            f"Difficulty({i},{u})"
            for u in range(1, m_star + 1)
            for i in range(1, data.n_items + 1)
        ]
    )
    return ObservationDesign(
        persons=data.persons.copy(),
        items=data.items.copy(),
        u=scored.astype(int),
        X=X,
        column_labels=tuple(labels),
        raw_scores=data.scores.copy(),
    )


def build_multidimensional(data: ItemResponseData) -> ObservationDesign:
    """Design with a per-dimension ability block.

    The single person block is replaced by n_persons * D columns, dimension
    major, with a +1 at (person, dimension of the row's item).  The item
    block follows the response builder implied by the category counts.
    """
    if data.dimension_map is None:
        raise DataError("multidimensional design requires a dimension map")
    d_map = data.dimension_map
    if np.any(d_map < 1):
        raise DataError("item dimensions must be positive integers")
    n_dim = int(d_map.max())
    if n_dim > data.n_items:
        raise DataError(f"number of dimensions {n_dim} exceeds number of items {data.n_items}")
    base = build_dichotomous(data) if data.is_dichotomous else build_polytomous(data)
    n, n_obs = data.n_persons, data.n_observations
    item_block = base.X[:, 1 + n :]
    item_labels = base.column_labels[1 + n :]
    X = np.zeros((n_obs, 1 + n * n_dim + item_block.shape[1]))
    X[:, 0] = 1.0
    rows = np.arange(n_obs)
    row_dim = d_map[data.items - 1]
    X[rows, (row_dim - 1) * n + data.persons] = 1.0
    X[:, 1 + n * n_dim :] = item_block
    labels = (
        ["Intercept"]
        + [f"Ability({p},{d})" for d in range(1, n_dim + 1) for p in range(1, n + 1)]
        + list(item_labels)
    )
    return ObservationDesign(
        persons=data.persons.copy(),
        items=data.items.copy(),
        u=base.u,
        X=X,
        column_labels=tuple(labels),
        raw_scores=data.scores.copy(),
    )


def _is_binary(values: np.ndarray) -> bool:
    observed = values[~np.isnan(values)]
    return observed.size > 0 and np.all(np.isin(observed, (0.0, 1.0)))


def append_covariates(design: ObservationDesign, data: ItemResponseData) -> ObservationDesign:
    """Append standardized person covariates (plus missing indicators).

    Numeric covariates are centered and scaled to unit sample standard
    deviation; binary (0,1) covariates are left as is.  Missing values are
    imputed from the observed ones (mode for binary, median otherwise) and
    flagged through an extra (0,1) MissingIndicator column per affected
    covariate, appended after the covariate block.
    """
    if data.covariate_names is None or not data.covariate_names:
        return design
    if data.person_covariates is None:
        raise DataError("covariate names given but no covariate matrix present")
    raw = data.person_covariates
    columns: list[np.ndarray] = []
    labels: list[str] = []
    indicator_cols: list[np.ndarray] = []
    indicator_labels: list[str] = []
    for k, name in enumerate(data.covariate_names):
        col = raw[:, k].astype(float).copy()
        missing = np.isnan(col)
        if missing.all():
            raise DataError(f"covariate {name!r} has no observed values")
        if missing.any():
            observed = col[~missing]
            if _is_binary(col):
                ones = np.count_nonzero(observed == 1.0)
                fill = 1.0 if ones * 2 > observed.size else 0.0
            else:
                fill = float(np.median(observed))
            col[missing] = fill
            indicator_cols.append(missing.astype(float))
            indicator_labels.append(f"MissingIndicator({name})")
        if not _is_binary(col):
            sd = float(np.std(col, ddof=1)) if col.size > 1 else 0.0
            if sd == 0.0:
                warnings.warn(
                    f"covariate {name!r} has zero variance; kept unstandardized",
                    stacklevel=2,
                )
            else:
                col = (col - float(np.mean(col))) / sd
        columns.append(col)
        labels.append(f"Covariate({name})")
    per_person = np.column_stack(columns + indicator_cols)
    new_block = per_person[design.persons - 1]
    return replace(
        design,
        X=np.hstack([design.X, new_block]),
        column_labels=design.column_labels + tuple(labels + indicator_labels),
    )


def _read_rows(path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [(reader.line_num, row) for row in reader if row and any(f.strip() for f in row)]
    return [h.strip() for h in header], rows


def ingest_csv(
    responses_path,
    covariates_path=None,
    dimensions_path=None,
    category_counts: dict[int, int] | None = None,
) -> ItemResponseData:
    """Read long-format response data (and optional side files) from CSV.

    The responses file has header ``person,item,score`` with one row per
    observed cell.  Person and item identifiers are reindexed densely (in
    sorted order) to 1..N and 1..I.  Category counts default to the maximum
    observed score per item unless declared via ``category_counts`` (keyed
    by original item identifier).
    """
    header, rows = _read_rows(responses_path)
    if [h.lower() for h in header[:3]] != ["person", "item", "score"]:
        raise DataError(f"{responses_path}: expected header person,item,score, got {header}")
    records: list[tuple[int, int, int]] = []
    for line_num, row in rows:
        if len(row) != 3:
            raise DataError(f"{responses_path}:{line_num}: expected 3 fields, got {len(row)}")
        try:
            p, i, s = (int(field.strip()) for field in row)
        except ValueError:
            raise DataError(
                f"{responses_path}:{line_num}: non-integer field in {row}"
            ) from None
        records.append((p, i, s))
    if not records:
        raise DataError(f"{responses_path}: no observations")
    person_ids = sorted({r[0] for r in records})
    item_ids = sorted({r[1] for r in records})
    p_index = {pid: k + 1 for k, pid in enumerate(person_ids)}
    i_index = {iid: k + 1 for k, iid in enumerate(item_ids)}
    persons = np.array([p_index[r[0]] for r in records])
    items = np.array([i_index[r[1]] for r in records])
    scores = np.array([r[2] for r in records])
    seen: dict[tuple[int, int], int] = {}
    for (p, i), line in zip(zip(persons, items), (r[0] for r in rows)):
        if (p, i) in seen:
            raise DataError(
                f"{responses_path}: duplicate cell person={person_ids[p - 1]}, item={item_ids[i - 1]}"
            )
        seen[(p, i)] = line
    counts = np.zeros(len(item_ids), dtype=int)
    for i, s in zip(items, scores):
        counts[i - 1] = max(counts[i - 1], s)
    counts = np.maximum(counts, 1)
    if category_counts:
        for iid, m in category_counts.items():
            if iid not in i_index:
                raise DataError(f"declared categories for unknown item {iid}")
            counts[i_index[iid] - 1] = m

    covariate_names = None
    covariates = None
    if covariates_path is not None:
        cov_header, cov_rows = _read_rows(covariates_path)
        if not cov_header or cov_header[0].lower() != "person":
            raise DataError(f"{covariates_path}: first column must be 'person'")
        covariate_names = cov_header[1:]
        covariates = np.full((len(person_ids), len(covariate_names)), np.nan)
        for line_num, row in cov_rows:
            if len(row) != len(cov_header):
                raise DataError(
                    f"{covariates_path}:{line_num}: expected {len(cov_header)} fields"
                )
            try:
                pid = int(row[0].strip())
            except ValueError:
                raise DataError(f"{covariates_path}:{line_num}: bad person id {row[0]!r}") from None
            if pid not in p_index:
                continue  # covariates for persons without responses are irrelevant
            for k, fld in enumerate(row[1:]):
                fld = fld.strip()
                if fld:
                    try:
                        covariates[p_index[pid] - 1, k] = float(fld)
                    except ValueError:
                        raise DataError(
                            f"{covariates_path}:{line_num}: non-numeric value {fld!r}"
                        ) from None

    dimension_map = None
    if dimensions_path is not None:
        dim_header, dim_rows = _read_rows(dimensions_path)
        if [h.lower() for h in dim_header[:2]] != ["item", "dimension"]:
            raise DataError(f"{dimensions_path}: expected header item,dimension")
        dimension_map = np.zeros(len(item_ids), dtype=int)
        for line_num, row in dim_rows:
            try:
                iid, d = int(row[0].strip()), int(row[1].strip())
            except (ValueError, IndexError):
                raise DataError(f"{dimensions_path}:{line_num}: bad row {row}") from None
            if iid in i_index:
                dimension_map[i_index[iid] - 1] = d
        if np.any(dimension_map < 1):
            missing = [item_ids[k] for k in np.flatnonzero(dimension_map < 1)]
            raise DataError(f"{dimensions_path}: no dimension for items {missing}")

    return ItemResponseData(
        n_persons=len(person_ids),
        n_items=len(item_ids),
        persons=persons,
        items=items,
        scores=scores,
        category_counts=counts,
        covariate_names=covariate_names,
        person_covariates=covariates,
        dimension_map=dimension_map,
    )
