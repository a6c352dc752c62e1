"""Taboo lexicon induction: TF-IDF n-gram features, ridge weights, top-K.

The document-term matrix is stored in compressed sparse row form and the
ridge problem is solved by conjugate gradient on the normal equations, so
matrix-vector products are the only primitives needed and the matrix is
never densified.
"""

from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin

from .text import extract_ngrams


class ConvergenceError(RuntimeError):
    """The iterative solver did not reach the requested residual norm."""


def solve_ridge_normal_equations(X, y, alpha, tol=1e-10, max_iter=None):
    """Minimize ||X w - y||^2 + alpha ||w||^2 by conjugate gradient.

    Works on the normal equations (X^T X + alpha I) w = X^T y without forming
    X^T X; each iteration costs two matrix-vector products. Iteration stops
    when ||r|| <= tol * max(1, ||X^T y||); the default cap is 10 * n_features
    iterations across restarts.

    Convergence is confirmed against the explicitly recomputed residual, not
    the cheap recursion, because the two drift apart on ill-conditioned
    systems; if the recursion claims victory early, iteration restarts from
    the current iterate. Raises ConvergenceError when the iteration budget is
    spent or positive-definiteness is lost along a search direction (both
    happen when alpha == 0 and X is numerically rank-deficient) instead of
    returning a vector that does not satisfy the normal equations.

    Returns (w, n_iter).
    """
    y = np.asarray(y, dtype=np.float64)
    m = X.shape[1]
    if max_iter is None:
        max_iter = 10 * m
    b = X.T @ y
    w = np.zeros(m, dtype=np.float64)
    threshold = tol * max(1.0, float(np.sqrt(b @ b)))
    total_iterations = 0
    while True:
        r = b - (X.T @ (X @ w) + alpha * w)
        rs = float(r @ r)
        if np.sqrt(rs) <= threshold:
            return w, total_iterations
        if total_iterations >= max_iter:
            raise ConvergenceError(
                f"no convergence after {total_iterations} iterations "
                f"(residual {np.sqrt(rs):.3e}, threshold {threshold:.3e})"
            )
        p = r.copy()
        while total_iterations < max_iter:
            Ap = X.T @ (X @ p) + alpha * p
            pAp = float(p @ Ap)
            if pAp <= 0.0:
                raise ConvergenceError(
                    "conjugate gradient breakdown: normal matrix is not "
                    f"positive definite along the search direction (alpha={alpha})"
                )
            step = rs / pAp
            w += step * p
            r -= step * Ap
            total_iterations += 1
            rs_next = float(r @ r)
            if np.sqrt(rs_next) <= threshold:
                break  # verify against the true residual before returning
            p = r + (rs_next / rs) * p
            rs = rs_next


class NgramTfidfVectorizer(TransformerMixin, BaseEstimator):
    """TF-IDF over contiguous n-grams of already-normalized token sequences.

    Vocabulary holds every n-gram in the window appearing in at least
    ``min_df`` documents, with indices assigned in lexicographic order.
    Weights are raw term count times idf(t) = ln((1 + N) / (1 + df(t))) + 1,
    and every nonempty row is scaled to unit Euclidean norm.
    """

    def __init__(self, ngram_range=(1, 3), min_df=2):
        self.ngram_range = ngram_range
        self.min_df = min_df

    def fit(self, token_docs, y=None):
        if self.min_df < 1:
            raise ValueError(f"min_df must be >= 1, got {self.min_df}")
        df_counter: Counter[str] = Counter()
        n_docs = 0
        for tokens in token_docs:
            n_docs += 1
            df_counter.update(set(extract_ngrams(list(tokens), self.ngram_range)))
        names = sorted(t for t, c in df_counter.items() if c >= self.min_df)
        self.vocabulary_ = {name: idx for idx, name in enumerate(names)}
        self.document_frequencies_ = np.array(
            [df_counter[name] for name in names], dtype=np.int64
        )
        self.n_docs_ = n_docs
        self.idf_ = (
            np.log((1.0 + n_docs) / (1.0 + self.document_frequencies_)) + 1.0
        )
        return self

    def transform(self, token_docs) -> sp.csr_matrix:
        if not hasattr(self, "vocabulary_"):
            raise ValueError("vectorizer is not fitted")
        vocab = self.vocabulary_
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        n_rows = 0
        for tokens in token_docs:
            n_rows += 1
            counts = Counter(extract_ngrams(list(tokens), self.ngram_range))
            row = sorted(
                (vocab[gram], tf) for gram, tf in counts.items() if gram in vocab
            )
            norm_sq = 0.0
            row_data = []
            for col, tf in row:
                weight = tf * self.idf_[col]
                row_data.append(weight)
                norm_sq += weight * weight
            if norm_sq > 0.0:
                scale = 1.0 / np.sqrt(norm_sq)
                row_data = [weight * scale for weight in row_data]
            indices.extend(col for col, _ in row)
            data.extend(row_data)
            indptr.append(len(indices))
        return sp.csr_matrix(
            (np.array(data, dtype=np.float64),
             np.array(indices, dtype=np.int64),
             np.array(indptr, dtype=np.int64)),
            shape=(n_rows, len(vocab)),
        )

    def get_feature_names_out(self, input_features=None):
        return np.array(sorted(self.vocabulary_, key=self.vocabulary_.get), dtype=object)


class ConjugateGradientRidge(RegressorMixin, BaseEstimator):
    """Ridge regression fit by conjugate gradient on the normal equations.

    No intercept and no centering: the objective is exactly
    ||X w - y||^2 + alpha ||w||^2.
    """

    def __init__(self, alpha=1.0, tol=1e-10, max_iter=None):
        self.alpha = alpha
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        y = np.asarray(y, dtype=np.float64)
        if y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError(
                f"shape mismatch: X has {X.shape[0]} rows, y has shape {y.shape}"
            )
        self.coef_, self.n_iter_ = solve_ridge_normal_equations(
            X, y, self.alpha, tol=self.tol, max_iter=self.max_iter
        )
        return self

    def predict(self, X):
        return X @ self.coef_


@dataclass(frozen=True)
class LexiconEntry:
    rank: int  # 1-based
    ngram: str
    coefficient: float


@dataclass(frozen=True)
class TabooLexicon:
    """Ranked taboo-indicative n-grams, most indicative first."""

    entries: tuple[LexiconEntry, ...]
    top_k: int

    def ngrams(self) -> list[str]:
        return [e.ngram for e in self.entries]

    def token_sequences(self) -> set[tuple[str, ...]]:
        return {tuple(e.ngram.split(" ")) for e in self.entries}

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("rank\tngram\tcoefficient\n")
            for e in self.entries:
                fh.write(f"{e.rank}\t{e.ngram}\t{e.coefficient!r}\n")

    @classmethod
    def load(cls, path) -> "TabooLexicon":
        entries = []
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            if header != "rank\tngram\tcoefficient":
                raise ValueError(f"{path}: unexpected header {header!r}")
            for line in fh:
                rank, ngram, coefficient = line.rstrip("\n").split("\t")
                entries.append(LexiconEntry(int(rank), ngram, float(coefficient)))
        return cls(entries=tuple(entries), top_k=len(entries))


def rank_terms(coefficients, feature_names, top_k=500) -> TabooLexicon:
    """Take the ``top_k`` most positive coefficients as the lexicon.

    Ties break lexicographically on the n-gram. Negative coefficients never
    enter the lexicon (they indicate the opposite of the tagged label), so
    the result can be shorter than ``top_k``.
    """
    if top_k <= 0:
        raise ValueError(f"top_k must be positive, got {top_k}")
    coefficients = np.asarray(coefficients, dtype=np.float64)
    if len(coefficients) != len(feature_names):
        raise ValueError("coefficients and feature_names differ in length")
    order = sorted(
        range(len(feature_names)),
        key=lambda j: (-coefficients[j], feature_names[j]),
    )
    entries = []
    for j in order:
        if len(entries) == top_k:
            break
        if coefficients[j] < 0.0:
            break
        entries.append(
            LexiconEntry(
                rank=len(entries) + 1,
                ngram=feature_names[j],
                coefficient=float(coefficients[j]),
            )
        )
    return TabooLexicon(entries=tuple(entries), top_k=top_k)


class TabooLexiconInducer(BaseEstimator):
    """End-to-end induction: vectorize labeled documents, fit ridge weights
    against the euphemism label, rank the most positive n-grams."""

    def __init__(self, top_k=500, alpha=1.0, ngram_range=(1, 3), min_df=2,
                 tol=1e-10, max_iter=None):
        self.top_k = top_k
        self.alpha = alpha
        self.ngram_range = ngram_range
        self.min_df = min_df
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, token_docs, y):
        token_docs = list(token_docs)
        y = np.asarray([float(v) for v in y], dtype=np.float64)
        if len(token_docs) != len(y):
            raise ValueError("token_docs and y differ in length")
        self.vectorizer_ = NgramTfidfVectorizer(
            ngram_range=self.ngram_range, min_df=self.min_df
        )
        X = self.vectorizer_.fit_transform(token_docs)
        self.ridge_ = ConjugateGradientRidge(
            alpha=self.alpha, tol=self.tol, max_iter=self.max_iter
        )
        self.ridge_.fit(X, y)
        self.lexicon_ = rank_terms(
            self.ridge_.coef_,
            list(self.vectorizer_.get_feature_names_out()),
            self.top_k,
        )
        return self
