"""Scikit-learn style estimator facade over the full fit pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .design import (
    DataError,
    ItemResponseData,
    append_covariates,
    build_dichotomous,
    build_multidimensional,
    build_polytomous,
)
from .diagnostics import FitReport, PosteriorSummary
from .diagnostics import fit_report as compute_fit_report
from .diagnostics import posterior_summary, predictive_means
from .model import PriorConfig
from .sampler import ChainConfig, run_chain

MODEL_KINDS = ("dichotomous", "polytomous", "multidimensional")


class BnpIrt(BaseEstimator):
    """Infinite-mixture IRT estimator with a fit/predict interface.

    Parameters mirror the chain protocol and prior hyperparameters; the
    defaults reproduce the reference run protocol (62,000 iterations,
    2,000 burn-in, thinning 5, prior seeds (1, 10, 1000, 1, .01)).

    After ``fit`` the instance exposes ``design_``, ``samples_`` (thinned
    posterior draws), and lazily computed ``report_``/``summary_``.
    """

    def __init__(
        self,
        model: str = "dichotomous",
        iterations: int = 62_000,
        burn_in: int = 2_000,
        thin: int = 5,
        seed: int = 0,
        b_sigma_mu: float = 1.0,
        v: float = 10.0,
        a0: float = 1000.0,
        v_omega: float = 1.0,
        a_omega: float = 0.01,
        eps: float = 1e-10,
        outlier_threshold: float = 2.0,
        use_covariates: bool = True,
    ):
        self.model = model
        self.iterations = iterations
        self.burn_in = burn_in
        self.thin = thin
        self.seed = seed
        self.b_sigma_mu = b_sigma_mu
        self.v = v
        self.a0 = a0
        self.v_omega = v_omega
        self.a_omega = a_omega
        self.eps = eps
        self.outlier_threshold = outlier_threshold
        self.use_covariates = use_covariates

    def _prior(self) -> PriorConfig:
        return PriorConfig(
            b_sigma_mu=self.b_sigma_mu,
            v=self.v,
            a0=self.a0,
            v_omega=self.v_omega,
            a_omega=self.a_omega,
        )

    def _chain_config(self) -> ChainConfig:
        return ChainConfig(
            iterations=self.iterations,
            burn_in=self.burn_in,
            thin=self.thin,
            seed=self.seed,
            prior=self._prior(),
            eps=self.eps,
        )

    def _coerce_data(self, X) -> ItemResponseData:
        if isinstance(X, ItemResponseData):
            return X
        triples = check_array(X, dtype="numeric", ensure_2d=True)
        if triples.shape[1] != 3:
            raise ValueError(
                f"expected (person, item, score) triples with 3 columns, got {triples.shape[1]}"
            )
        if not np.all(triples == np.round(triples)):
            raise ValueError("person, item and score values must be integers")
        triples = triples.astype(int)
        persons, items, scores = triples[:, 0], triples[:, 1], triples[:, 2]
        person_ids = np.unique(persons)
        item_ids = np.unique(items)
        p_index = {pid: k + 1 for k, pid in enumerate(person_ids)}
        i_index = {iid: k + 1 for k, iid in enumerate(item_ids)}
        dense_items = np.array([i_index[i] for i in items])
        counts = np.ones(len(item_ids), dtype=int)
        for i, s in zip(dense_items, scores):
            counts[i - 1] = max(counts[i - 1], s)
        return ItemResponseData(
            n_persons=len(person_ids),
            n_items=len(item_ids),
            persons=np.array([p_index[p] for p in persons]),
            items=dense_items,
            scores=scores,
            category_counts=counts,
        )

    def build_design(self, data: ItemResponseData):
        if self.model not in MODEL_KINDS:
            raise ValueError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.model == "dichotomous":
            design = build_dichotomous(data)
        elif self.model == "polytomous":
            design = build_polytomous(data)
        else:
            design = build_multidimensional(data)
        if self.use_covariates and data.covariate_names:
            design = append_covariates(design, data)
        return design

    def fit(self, X, y=None) -> "BnpIrt":
        """Run the Gibbs chain on item-response data.

        ``X`` is an :class:`ItemResponseData` or an array of
        (person, item, score) integer triples; ``y`` is ignored (the
        responses live inside ``X``).
        """
        data = self._coerce_data(X)
        self.data_ = data
        self.design_ = self.build_design(data)
        self.samples_ = run_chain(self.design_, self._chain_config())
        self.n_persons_ = data.n_persons
        self.n_items_ = data.n_items
        self._cell_rows_ = {
            (int(p), int(i)): k
            for k, (p, i) in enumerate(zip(self.design_.persons, self.design_.items))
        }
        self._report_ = None
        self._summary_ = None
        return self

    def _rows_for_cells(self, cells: np.ndarray) -> np.ndarray:
        rows = np.zeros((cells.shape[0], self.design_.dimension))
        for k, (p, i) in enumerate(cells):
            p, i = int(p), int(i)
            if (p, i) in self._cell_rows_:
                rows[k] = self.design_.X[self._cell_rows_[(p, i)]]
                continue
            if self.model == "polytomous" or not self.data_.is_dichotomous:
                raise DataError(
                    f"cell ({p}, {i}) was not observed; category-indicator designs "
                    "only support prediction for observed cells"
                )
            if not (1 <= p <= self.n_persons_ and 1 <= i <= self.n_items_):
                raise DataError(f"cell ({p}, {i}) outside the fitted person/item grid")
            rows[k, 0] = 1.0
            if self.model == "dichotomous":
                rows[k, p] = 1.0
                rows[k, self.n_persons_ + i] = -1.0
            else:
                d = int(self.data_.dimension_map[i - 1])
                rows[k, (d - 1) * self.n_persons_ + p] = 1.0
                n_dim = int(self.data_.dimension_map.max())
                rows[k, self.n_persons_ * n_dim + i] = -1.0
        return rows

    def predict_proba(self, X) -> np.ndarray:
        """Posterior-predictive class probabilities for (person, item) pairs.

        Returns the usual (n, 2) array of P(u=0), P(u=1).
        """
        check_is_fitted(self, "samples_")
        cells = check_array(X, dtype="numeric", ensure_2d=True)
        if cells.shape[1] != 2:
            raise ValueError("expected (person, item) pairs with 2 columns")
        rows = self._rows_for_cells(cells.astype(int))
        p1 = predictive_means(rows, self.samples_)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        """Most likely binary response per (person, item) pair."""
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    @property
    def report_(self) -> FitReport:
        check_is_fitted(self, "samples_")
        if self._report_ is None:
            self._report_ = compute_fit_report(
                self.design_, self.samples_, self.outlier_threshold, label=self.model
            )
        return self._report_

    @property
    def summary_(self) -> PosteriorSummary:
        check_is_fitted(self, "samples_")
        if self._summary_ is None:
            self._summary_ = posterior_summary(self.samples_)
        return self._summary_

    def ability_estimates(self) -> np.ndarray:
        """Posterior-mean ability per person (columns labeled Ability(...))."""
        check_is_fitted(self, "samples_")
        cols = [
            k
            for k, lab in enumerate(self.design_.column_labels)
            if lab.startswith("Ability(")
        ]
        draws = np.array([d.beta[cols] for d in self.samples_.draws])
        return draws.mean(axis=0)
