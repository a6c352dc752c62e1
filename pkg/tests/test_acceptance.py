"""Acceptance gate: one test per shipping criterion.

Run with ``pytest tests/test_acceptance.py -v`` to get exactly one
pass/fail line per criterion. Each test states its tolerance inline;
criterion 9 needs an externally provided replication dataset and skips
(without failing the gate) when that dataset is not present.
"""

import json
import os
import random
import re
import time
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.stats

from tabooscope.cli import main
from tabooscope.lexicon import (
    NgramTfidfVectorizer,
    TabooLexiconInducer,
    solve_ridge_normal_equations,
)
from tabooscope.matching import normalize_title
from tabooscope.revisions import RevisionRecord, classify_contributor, detect_reverts
from tabooscope.stats import chi_squared_2x2, logistic_fit, mann_whitney_u, ols_fit
from tabooscope.stopwords import load_stopwords

FIXTURES = Path(__file__).resolve().parent / "fixtures" / "e2e"

INPUT_FILES = {
    "dictionary": "dictionary.jsonl",
    "pages": "pages.tsv",
    "revisions": "revisions.tsv",
    "pageviews": "pageviews.tsv",
    "protection_log": "protection_log.tsv",
    "cache": "cache.jsonl",
    "user_pages": "user_pages.tsv",
}


# --------------------------------------------------------------- criterion 1


def test_criterion_01_ridge_solver_matches_direct_oracle():
    """50 random systems up to 30x10, lambda in {0.1, 1, 10}: iterative
    solution within 1e-8 max-abs of the dense normal-equation solve, under
    5 seconds total."""
    rng = np.random.default_rng(42)
    started = time.monotonic()
    for trial in range(50):
        n = int(rng.integers(5, 31))
        p = int(rng.integers(1, 11))
        alpha = [0.1, 1.0, 10.0][trial % 3]
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        solved, _iterations = solve_ridge_normal_equations(sp.csr_matrix(X), y, alpha)
        oracle = np.linalg.solve(X.T @ X + alpha * np.eye(p), X.T @ y)
        assert np.max(np.abs(solved - oracle)) < 1e-8, f"trial {trial}"
    assert time.monotonic() - started < 5.0


# --------------------------------------------------------------- criterion 2


def test_criterion_02_tfidf_matches_hand_computed_example():
    """d1=[a, b], d2=[a]: d1's row must be (0.580, 0.815) within 1e-3."""
    vectorizer = NgramTfidfVectorizer(ngram_range=(1, 1), min_df=1)
    matrix = vectorizer.fit_transform([["a", "b"], ["a"]])
    row = matrix.toarray()[0]
    weights = dict(zip(vectorizer.get_feature_names_out(), row))
    assert weights["a"] == pytest.approx(0.580, abs=1e-3)
    assert weights["b"] == pytest.approx(0.815, abs=1e-3)


# --------------------------------------------------------------- criterion 3


def _planted_corpus():
    rng = random.Random(99)
    filler = [f"w{i}" for i in range(40)]
    docs, labels = [], []
    for i in range(200):
        tokens = rng.choices(filler, k=8)
        if i < 10:
            tokens.insert(rng.randrange(len(tokens)), "zorble")
            labels.append(1.0)
        else:
            labels.append(0.0)
        docs.append(tokens)
    return docs, labels


def test_criterion_03_planted_token_recovered_at_rank_one():
    """200 definitions, 10 euphemistic ones all containing 'zorble' (absent
    elsewhere): 'zorble' must rank first, identically across runs."""
    docs, labels = _planted_corpus()
    first = TabooLexiconInducer(min_df=1).fit(docs, labels).lexicon_
    second = TabooLexiconInducer(min_df=1).fit(docs, labels).lexicon_
    assert first.entries[0].ngram == "zorble"
    assert first == second


# --------------------------------------------------------------- criterion 4


def _brute_force_reverts(checksums, window=10):
    n = len(checksums)
    flags = []
    for r in range(n):
        reverted = False
        for j in range(r + 1, min(r + window, n - 1) + 1):
            if any(checksums[k] == checksums[j] for k in range(r)):
                reverted = True
                break
        flags.append(reverted)
    return flags


def _revert_flags(checksums, window=10):
    from datetime import datetime, timedelta, timezone

    base = datetime(2010, 1, 1, tzinfo=timezone.utc)
    history = [
        RevisionRecord(
            page_id=1, revision_id=i + 1,
            timestamp=base + timedelta(hours=i),
            contributor=classify_contributor("Pat"), checksum=c,
        )
        for i, c in enumerate(checksums)
    ]
    detect_reverts(history, window=window)
    return [r.is_reverted for r in history]


def test_criterion_04_revert_detection_matches_brute_force_oracle():
    """Exact agreement on 1,000 random histories plus the window boundary:
    a restoring revision 10 steps ahead flags a revert, 11 steps does not."""
    rng = random.Random(7)
    for _ in range(1000):
        checksums = [str(rng.randrange(5)) for _ in range(rng.randrange(1, 51))]
        got = _revert_flags(checksums, window=10)
        assert got == _brute_force_reverts(checksums, window=10), checksums

    at_ten = ["X", "A"] + [f"B{i}" for i in range(9)] + ["X"]
    assert _revert_flags(at_ten, window=10)[1] is True
    at_eleven = ["X", "A"] + [f"B{i}" for i in range(10)] + ["X"]
    assert _revert_flags(at_eleven, window=10)[1] is False


# --------------------------------------------------------------- criterion 5


def test_criterion_05_mann_whitney_exact_agreement_and_identities():
    """Exact path agrees with an independent enumeration oracle for every
    size pair up to 8x8; U-complementarity holds on 100 random pairs; the
    {1,2} vs {3,4} case gives exact two-sided p = 1/3."""
    rng = random.Random(11)
    for n1 in range(1, 9):
        for n2 in range(1, 9):
            pool = rng.sample(range(10_000), n1 + n2)
            a, b = pool[:n1], pool[n1:]
            mine = mann_whitney_u(a, b, method="exact")
            oracle = scipy.stats.mannwhitneyu(a, b, alternative="two-sided",
                                              method="exact")
            assert mine.statistic == pytest.approx(oracle.statistic, abs=0)
            assert mine.p_value == pytest.approx(oracle.pvalue, rel=1e-12)

    for _ in range(100):
        n1, n2 = rng.randint(1, 12), rng.randint(1, 12)
        a = [rng.randint(0, 6) for _ in range(n1)]
        b = [rng.randint(0, 6) for _ in range(n2)]
        u_ab = mann_whitney_u(a, b).statistic
        u_ba = mann_whitney_u(b, a).statistic
        assert u_ab + u_ba == pytest.approx(n1 * n2, abs=1e-9)

    assert mann_whitney_u([1, 2], [3, 4], method="exact").p_value == pytest.approx(
        1 / 3, abs=1e-15
    )


# --------------------------------------------------------------- criterion 6


def _newton_logistic_oracle(X, y, tol=1e-12):
    beta = np.zeros(X.shape[1])
    for _ in range(200):
        eta = X @ beta
        p = 1.0 / (1.0 + np.exp(-eta))
        gradient = X.T @ (y - p)
        hessian = X.T @ (X * (p * (1 - p))[:, None])
        step = np.linalg.solve(hessian, gradient)
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            return beta
    raise AssertionError("oracle did not converge")


def test_criterion_06_regression_kernels_cross_check():
    """OLS residuals orthogonal to the design within 1e-8; logistic fits have
    gradient norm below 1e-6 and match an independent Newton oracle within
    1e-6 on 20 datasets; the diagonal 2x2 table scores 20 uncorrected and
    16.2 with continuity correction, within 1e-6."""
    rng = np.random.default_rng(123)
    for _ in range(20):
        n = int(rng.integers(40, 120))
        X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
        y = X @ np.array([1.0, -2.0, 0.5]) + rng.standard_normal(n)
        fit = ols_fit(X, y)
        residuals = y - X @ np.asarray(fit.estimates)
        assert np.max(np.abs(X.T @ residuals)) < 1e-8

    for trial in range(20):
        n = 200
        X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
        true_beta = np.array([0.3, 1.0, -0.8])
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-(X @ true_beta)))).astype(float)
        fit = logistic_fit(X, y)
        beta = np.asarray(fit.estimates)
        p = 1.0 / (1.0 + np.exp(-(X @ beta)))
        assert np.linalg.norm(X.T @ (y - p)) < 1e-6, f"trial {trial}"
        oracle = _newton_logistic_oracle(X, y)
        assert np.max(np.abs(beta - oracle)) < 1e-6, f"trial {trial}"

    assert chi_squared_2x2([[10, 0], [0, 10]], correction=False).statistic == (
        pytest.approx(20.0, abs=1e-6)
    )
    assert chi_squared_2x2([[10, 0], [0, 10]], correction=True).statistic == (
        pytest.approx(16.2, abs=1e-6)
    )


# --------------------------------------------------------------- criterion 7


def _write_config(path: Path, out_dir: Path, seed: int = 7) -> Path:
    lines = ["[inputs]"]
    for key, filename in INPUT_FILES.items():
        lines.append(f"{key} = {FIXTURES / filename}")
    lines.append(
        f"bot_lists = {FIXTURES / 'bots_current.txt'}, {FIXTURES / 'bots_historical.txt'}"
    )
    lines.extend([
        "[parameters]", "comparison_size = 20", f"seed = {seed}",
        "horizon = 2012-07-01T00:00:00Z", "[output]", f"directory = {out_dir}",
    ])
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("acceptance")
    config = _write_config(base / "config.ini", base / "out")
    started = time.monotonic()
    exit_code = main(["run", "--config", str(config)])
    elapsed = time.monotonic() - started
    assert exit_code == 0
    return base / "out", elapsed


def _read_partition(samples_path: Path) -> dict[int, tuple[str, str]]:
    rows = {}
    with open(samples_path, encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            rows[int(parts[0])] = (parts[1], parts[2])
    return rows


def test_criterion_07_end_to_end_fixture_pipeline(pipeline_run, tmp_path):
    """The bundled corpus runs in under 60 s, reruns are byte-identical,
    and the partition equals the hand-labeled ground truth."""
    out_dir, elapsed = pipeline_run
    assert elapsed < 60.0

    got = _read_partition(out_dir / "stages" / "match" / "samples.tsv")
    expected = {}
    with open(FIXTURES / "expected_samples.tsv", encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            page_id, title, sample = line.rstrip("\n").split("\t")
            expected[int(page_id)] = (title, sample)
    assert got == expected

    repeat = tmp_path / "repeat"
    config = _write_config(tmp_path / "config.ini", repeat)
    assert main(["run", "--config", str(config)]) == 0
    first = {p.name: p.read_bytes() for p in sorted((out_dir / "report").iterdir())}
    second = {p.name: p.read_bytes() for p in sorted((repeat / "report").iterdir())}
    assert first == second


# --------------------------------------------------------------- criterion 8


def test_criterion_08_title_normalization_and_redirect_rule(pipeline_run):
    """'Hell to the no' normalizes to ['hell'], and a matching redirect
    contributes its target article to the taboo sample."""
    stopwords = load_stopwords()
    assert normalize_title("Hell to the no", stopwords) == ["hell"]

    out_dir, _ = pipeline_run
    partition = _read_partition(out_dir / "stages" / "match" / "samples.tsv")
    titles = {title: sample for title, sample in partition.values()}
    assert titles.get("Being Bobby Brown") == "taboo"
    assert "Hell to the no" not in titles


# --------------------------------------------------------------- criterion 9


REPLICATION_ENV = "TABOOSCOPE_REPLICATION_DIR"


@pytest.mark.skipif(
    REPLICATION_ENV not in os.environ,
    reason=f"optional: set {REPLICATION_ENV} to a directory holding "
    "articles.tsv (columns: taboo, n_reverted, n_contributions, "
    "mean_view_rank, revert_rate, damaging_rate, mean_quality) "
    "to check the published-scale statistics",
)
def test_criterion_09_replication_dataset_statistics():
    """Full-scale replication check, not gating: revert-count OLS and the
    published U statistics must reproduce within the stated tolerances."""
    directory = Path(os.environ[REPLICATION_ENV])
    header, *rows = (
        (directory / "articles.tsv").read_text(encoding="utf-8").splitlines()
    )
    columns = header.split("\t")
    table = [dict(zip(columns, row.split("\t"))) for row in rows]
    taboo = np.array([float(r["taboo"]) for r in table])
    reverted = np.array([float(r["n_reverted"]) for r in table])
    contributions = np.array([float(r["n_contributions"]) for r in table])

    X = np.column_stack([np.ones(len(table)), taboo, contributions])
    fit = ols_fit(X, reverted, names=["intercept", "taboo", "n_contributions"])
    assert fit.estimates[1] == pytest.approx(49.5379, abs=0.05)
    assert fit.r_squared == pytest.approx(0.9590, abs=0.001)

    def split(column):
        inside = [float(r[column]) for r in table if r["taboo"] == "1" and r[column]]
        outside = [float(r[column]) for r in table if r["taboo"] == "0" and r[column]]
        return inside, outside

    expectations = {
        "mean_view_rank": 189_375,
        "n_contributions": 53_010,
        "revert_rate": 48_566,
        "damaging_rate": 56_225,
        "mean_quality": 87_747,
    }
    for column, expected_u in expectations.items():
        inside, outside = split(column)
        assert mann_whitney_u(inside, outside).statistic == expected_u, column


# -------------------------------------------------------------- criterion 10


def test_criterion_10_report_bundle_redaction_scan(pipeline_run):
    """No raw account name or IP-formatted string from the inputs may appear
    anywhere in the emitted report bundle."""
    import ipaddress

    out_dir, _ = pipeline_run
    account_names, ip_strings = set(), set()
    with open(FIXTURES / "revisions.tsv", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            contributor = line.rstrip("\n").split("\t")[3]
            if not contributor:
                continue
            try:
                ipaddress.ip_address(contributor)
            except ValueError:
                account_names.add(contributor)
            else:
                ip_strings.add(contributor)
    assert account_names and ip_strings  # the fixture must exercise the scan

    ipv4 = re.compile(r"\b\d{1,3}(?:\.\d{1,3}){3}\b")
    for path in sorted((out_dir / "report").iterdir()):
        text = path.read_text(encoding="utf-8")
        for name in sorted(account_names):
            assert not re.search(rf"\b{re.escape(name)}\b", text), (path.name, name)
        for address in sorted(ip_strings):
            assert address not in text, (path.name, address)
        assert not ipv4.search(text), path.name
