"""Hypothesis test suite and report bundle emission.

Five hypothesis sections plus one validation section, each built from the
per-article metrics, per-revision rows, and contributor profiles the
pipeline stages produce. Every test is guarded: an empty group or an
undefined statistic marks the test "not run" with the reason instead of
aborting the report. All emitted files use deterministic ordering and
contain no raw account names or IP addresses; contributor identities are
salted hashes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .enrichment import ContributorProfile
from .revisions import ArticleMetrics
from .stats import (
    RegressionFit,
    SeparationError,
    StatsError,
    TestResult,
    chi_squared_2x2,
    logistic_fit,
    mann_whitney_u,
    ols_fit,
    spearman_rho,
)


@dataclass(frozen=True)
class ReportSection:
    key: str
    title: str
    preamble: str
    tests: tuple[TestResult, ...]
    regressions: tuple[RegressionFit, ...]
    skipped: tuple[str, ...]


@dataclass(frozen=True)
class RevisionRow:
    """One revision's inputs to the revision-level identifiability model."""

    taboo: bool
    protected_proportion: float
    no_account: bool


def redact_name(name: str, salt: str) -> str:
    """Stable pseudonym for a contributor identity."""
    digest = hashlib.sha256((salt + name).encode("utf-8")).hexdigest()
    return "c_" + digest[:12]


def derive_salt(seed: int) -> str:
    """Run-scoped redaction salt, a pure function of the seed so reruns
    with the same configuration produce byte-identical bundles."""
    return hashlib.sha256(f"redaction-salt-{seed}".encode()).hexdigest()


def _split_metrics(metrics, attribute):
    taboo = [getattr(m, attribute) for m in metrics if m.sample == "taboo"]
    comparison = [getattr(m, attribute) for m in metrics if m.sample == "comparison"]
    taboo = [v for v in taboo if v is not None]
    comparison = [v for v in comparison if v is not None]
    return taboo, comparison


def _guarded_mwu(name, taboo, comparison, tests, skipped, note=""):
    if not taboo or not comparison:
        skipped.append(f"{name}: not run (a sample group is empty)")
        return
    try:
        result = mann_whitney_u(taboo, comparison)
    except StatsError as exc:
        skipped.append(f"{name}: not run ({exc})")
        return
    notes = f"{note}; {result.notes}" if note else result.notes
    tests.append(
        TestResult(name, result.statistic, result.p_value, result.sample_sizes,
                   result.direction, notes)
    )


def _guarded_chi2(name, table, tests, skipped, note=""):
    try:
        result = chi_squared_2x2(table)
    except StatsError as exc:
        skipped.append(f"{name}: not run ({exc})")
        return
    notes = f"{note}; {result.notes}" if note else result.notes
    tests.append(
        TestResult(name, result.statistic, result.p_value, result.sample_sizes,
                   result.direction, notes)
    )


def _rename(fit: RegressionFit, kind_label: str) -> RegressionFit:
    return RegressionFit(
        kind=kind_label,
        names=fit.names,
        estimates=fit.estimates,
        standard_errors=fit.standard_errors,
        ci_lower=fit.ci_lower,
        ci_upper=fit.ci_upper,
        statistics=fit.statistics,
        n_obs=fit.n_obs,
        r_squared=fit.r_squared,
        adj_r_squared=fit.adj_r_squared,
        log_likelihood=fit.log_likelihood,
        converged=fit.converged,
        notes=fit.notes,
    )


def _viewership_section(metrics) -> ReportSection:
    tests: list[TestResult] = []
    skipped: list[str] = []
    taboo, comparison = _split_metrics(metrics, "mean_view_rank")
    _guarded_mwu("view_rank_mwu", taboo, comparison, tests, skipped,
                 note="rank 1 = most viewed, so lower means more viewed")
    return ReportSection(
        key="H1",
        title="viewership",
        preamble="Mean within-month view rank per article, taboo vs comparison.",
        tests=tuple(tests),
        regressions=(),
        skipped=tuple(skipped),
    )


def _volume_section(metrics) -> ReportSection:
    tests: list[TestResult] = []
    skipped: list[str] = []
    taboo, comparison = _split_metrics(metrics, "n_contributions")
    _guarded_mwu("contribution_count_mwu", taboo, comparison, tests, skipped)
    return ReportSection(
        key="H2",
        title="contribution volume",
        preamble="Number of retained human contributions per article.",
        tests=tuple(tests),
        regressions=(),
        skipped=tuple(skipped),
    )


def _conflict_section(metrics) -> ReportSection:
    tests: list[TestResult] = []
    regressions: list[RegressionFit] = []
    skipped: list[str] = []
    taboo_rr, comparison_rr = _split_metrics(metrics, "revert_rate")
    _guarded_mwu("revert_rate_mwu", taboo_rr, comparison_rr, tests, skipped)
    taboo_dr, comparison_dr = _split_metrics(metrics, "damaging_rate")
    _guarded_mwu("damaging_rate_mwu", taboo_dr, comparison_dr, tests, skipped)

    if len(metrics) >= 3:
        try:
            rho = spearman_rho(
                [m.revert_rate for m in metrics],
                [m.n_contributions for m in metrics],
            )
            tests.append(
                TestResult("revert_rate_vs_contributions_spearman", rho.statistic,
                           rho.p_value, rho.sample_sizes, rho.direction, rho.notes)
            )
        except StatsError as exc:
            skipped.append(f"revert_rate_vs_contributions_spearman: not run ({exc})")
    else:
        skipped.append(
            "revert_rate_vs_contributions_spearman: not run (fewer than 3 articles)"
        )

    if len(metrics) >= 4:
        X = [[1.0, 1.0 if m.sample == "taboo" else 0.0, float(m.n_contributions)]
             for m in metrics]
        y = [float(m.n_reverted) for m in metrics]
        try:
            fit = ols_fit(X, y, names=["intercept", "taboo", "contribution_count"])
            regressions.append(_rename(fit, "ols: revert_count"))
        except StatsError as exc:
            skipped.append(f"revert_count_ols: not run ({exc})")
    else:
        skipped.append("revert_count_ols: not run (fewer than 4 articles)")

    return ReportSection(
        key="H3",
        title="conflict and damage",
        preamble=(
            "Revert and damaging rates per article, their relationship to "
            "contribution volume, and a linear model of revert counts."
        ),
        tests=tuple(tests),
        regressions=tuple(regressions),
        skipped=tuple(skipped),
    )


def _quality_section(metrics) -> ReportSection:
    tests: list[TestResult] = []
    skipped: list[str] = []
    taboo, comparison = _split_metrics(metrics, "mean_quality")
    _guarded_mwu("quality_mwu", taboo, comparison, tests, skipped,
                 note="mean of the article's month-end quality states")
    return ReportSection(
        key="H4",
        title="quality",
        preamble="Mean month-end quality state per article on the 0..5 scale.",
        tests=tuple(tests),
        regressions=(),
        skipped=tuple(skipped),
    )


def _identifiability_section(metrics, revision_rows, profiles) -> ReportSection:
    tests: list[TestResult] = []
    regressions: list[RegressionFit] = []
    skipped: list[str] = []

    # revision-level model of contributing without an account
    if revision_rows:
        X = [[1.0, 1.0 if r.taboo else 0.0, r.protected_proportion]
             for r in revision_rows]
        y = [1.0 if r.no_account else 0.0 for r in revision_rows]
        try:
            fit = logistic_fit(X, y, names=["intercept", "taboo", "protected_proportion"])
            regressions.append(_rename(fit, "logistic: no_account (pooled)"))
        except (StatsError, SeparationError) as exc:
            skipped.append(f"no_account_logistic: not run ({exc})")
    else:
        skipped.append("no_account_logistic: not run (no revisions)")

    # article-level experience
    taboo_xp, comparison_xp = _split_metrics(metrics, "mean_editor_experience")
    _guarded_mwu("editor_experience_mwu", taboo_xp, comparison_xp, tests, skipped)

    with_xp = [m for m in metrics if m.mean_editor_experience is not None]
    if len(with_xp) >= 4:
        X = [[1.0, 1.0 if m.sample == "taboo" else 0.0, m.protected_proportion]
             for m in with_xp]
        y = [math.log(m.mean_editor_experience) for m in with_xp]
        try:
            fit = ols_fit(X, y, names=["intercept", "taboo", "protected_proportion"])
            regressions.append(_rename(fit, "ols: log_mean_experience"))
        except StatsError as exc:
            skipped.append(f"log_experience_ols: not run ({exc})")
    else:
        skipped.append("log_experience_ols: not run (fewer than 4 articles)")

    # contributor-level attribute tables (accountholders only)
    def attribute_table(selector):
        a = sum(1 for p in profiles if p.ever_edited_taboo and selector(p))
        b = sum(1 for p in profiles if p.ever_edited_taboo and not selector(p))
        c = sum(1 for p in profiles if not p.ever_edited_taboo and selector(p))
        d = sum(1 for p in profiles if not p.ever_edited_taboo and not selector(p))
        return [[a, b], [c, d]]

    if profiles:
        _guarded_chi2("user_page_by_taboo_chi2",
                      attribute_table(lambda p: p.has_user_page), tests, skipped)
        _guarded_chi2("gender_specified_by_taboo_chi2",
                      attribute_table(lambda p: p.gender_specified), tests, skipped)
        specifiers = [p for p in profiles if p.gender_specified]
        if specifiers:
            table = [
                [sum(1 for p in specifiers if p.ever_edited_taboo and p.gender_value == "female"),
                 sum(1 for p in specifiers if p.ever_edited_taboo and p.gender_value != "female")],
                [sum(1 for p in specifiers if not p.ever_edited_taboo and p.gender_value == "female"),
                 sum(1 for p in specifiers if not p.ever_edited_taboo and p.gender_value != "female")],
            ]
            _guarded_chi2("female_among_specifiers_by_taboo_chi2", table, tests, skipped)
        else:
            skipped.append(
                "female_among_specifiers_by_taboo_chi2: not run (no gender specifiers)"
            )
        _guarded_chi2("emailable_by_taboo_chi2",
                      attribute_table(lambda p: p.emailable), tests, skipped)
    else:
        skipped.append("contributor_attribute_chi2: not run (no accountholder profiles)")

    return ReportSection(
        key="H5",
        title="contributor identifiability",
        preamble=(
            "Account status per revision, experience per article, and "
            "profile attributes per accountholder. The revision-level model "
            "is a pooled logistic regression without per-article intercepts, "
            "an approximation: read coefficient signs, not magnitudes."
        ),
        tests=tuple(tests),
        regressions=tuple(regressions),
        skipped=tuple(skipped),
    )


def _validation_section(validation_rows) -> ReportSection:
    regressions: list[RegressionFit] = []
    skipped: list[str] = []
    preamble = (
        "Category-based check of the induced partition: membership in the "
        "configured topic scope predicting the taboo label, article level."
    )
    if validation_rows:
        X = [[1.0, 1.0 if in_scope else 0.0] for _, in_scope in validation_rows]
        y = [1.0 if taboo else 0.0 for taboo, _ in validation_rows]
        try:
            fit = logistic_fit(X, y, names=["intercept", "in_scope"])
            implied = 1.0 / (1.0 + math.exp(-(fit.estimates[0] + fit.estimates[1])))
            fit = _rename(fit, "logistic: taboo ~ in_scope")
            fit = RegressionFit(
                kind=fit.kind, names=fit.names, estimates=fit.estimates,
                standard_errors=fit.standard_errors, ci_lower=fit.ci_lower,
                ci_upper=fit.ci_upper, statistics=fit.statistics, n_obs=fit.n_obs,
                r_squared=fit.r_squared, adj_r_squared=fit.adj_r_squared,
                log_likelihood=fit.log_likelihood, converged=fit.converged,
                notes=f"implied in-scope taboo probability {implied:.4f}",
            )
            regressions.append(fit)
        except (StatsError, SeparationError) as exc:
            skipped.append(f"scope_validation_logistic: not run ({exc})")
    else:
        skipped.append("scope_validation_logistic: not run (no category data)")
    return ReportSection(
        key="validation",
        title="partition validation",
        preamble=preamble,
        tests=(),
        regressions=tuple(regressions),
        skipped=tuple(skipped),
    )


def run_hypothesis_suite(
    metrics: Sequence[ArticleMetrics],
    revision_rows: Sequence[RevisionRow],
    profiles: Sequence[ContributorProfile],
    validation_rows: Sequence[tuple[bool, bool]],
) -> list[ReportSection]:
    """All five hypothesis sections plus the validation section, in order."""
    return [
        _viewership_section(metrics),
        _volume_section(metrics),
        _conflict_section(metrics),
        _quality_section(metrics),
        _identifiability_section(metrics, revision_rows, profiles),
        _validation_section(validation_rows),
    ]


# --------------------------------------------------------------------------
# emission


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_tsv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\t".join(header) + "\n")
        for row in rows:
            handle.write("\t".join(_fmt(v) for v in row) + "\n")


METRIC_COLUMNS = (
    "page_id", "title", "sample", "n_contributions", "n_reverted", "n_damaging",
    "n_no_account", "revert_rate", "damaging_rate", "share_no_account",
    "protected_proportion", "mean_editor_experience", "mean_quality",
    "mean_view_rank",
)

BOXPLOT_PANELS = (
    ("view_rank", "mean_view_rank"),
    ("contributions", "n_contributions"),
    ("revert_rate", "revert_rate"),
    ("damaging_rate", "damaging_rate"),
    ("quality", "mean_quality"),
)


def _metric_rows(metrics):
    for m in sorted(metrics, key=lambda m: m.page_id):
        yield (
            m.page_id, m.title, m.sample, m.n_contributions, m.n_reverted,
            m.n_damaging, m.n_no_account, m.revert_rate, m.damaging_rate,
            m.share_no_account, m.protected_proportion, m.mean_editor_experience,
            m.mean_quality, m.mean_view_rank,
        )


def _boxplot_rows(metrics):
    for panel, attribute in BOXPLOT_PANELS:
        for m in sorted(metrics, key=lambda m: m.page_id):
            value = getattr(m, attribute)
            if value is None:
                continue
            yield (panel, m.page_id, m.sample, float(value))


def _test_rows(sections):
    for section in sections:
        for test in section.tests:
            yield (
                section.key, test.test_name, test.statistic, test.p_value,
                "x".join(str(n) for n in test.sample_sizes), test.direction,
                test.notes,
            )


def _regression_rows(sections):
    for section in sections:
        for fit in section.regressions:
            for i, name in enumerate(fit.names):
                yield (
                    section.key, fit.kind, name, fit.estimates[i],
                    fit.standard_errors[i], fit.ci_lower[i], fit.ci_upper[i],
                    fit.statistics[i], fit.n_obs, fit.r_squared,
                    fit.adj_r_squared, fit.log_likelihood,
                )


def _report_text(sections, parameters: Mapping[str, str], sources: Sequence[str],
                 summary_lines: Sequence[str]) -> str:
    lines: list[str] = []

    def heading(text, underline):
        lines.append(text)
        lines.append(underline * len(text))

    heading("taboo article analysis report", "=")
    lines.append("")
    heading("parameters", "-")
    for key in sorted(parameters):
        lines.append(f"{key} = {parameters[key]}")
    lines.append("")
    heading("sources", "-")
    for source in sources:
        lines.append(f"- {source}")
    lines.append("")
    if summary_lines:
        heading("sample summary", "-")
        lines.extend(summary_lines)
        lines.append("")
    for section in sections:
        heading(f"{section.key}: {section.title}", "-")
        lines.append(section.preamble)
        lines.append("")
        for test in section.tests:
            sizes = "x".join(str(n) for n in test.sample_sizes)
            lines.append(
                f"{test.test_name}: statistic={test.statistic:.6g} "
                f"p={test.p_value:.6g} n={sizes} direction={test.direction:+d}"
            )
            if test.notes:
                lines.append(f"    note: {test.notes}")
        for fit in section.regressions:
            lines.append(f"{fit.kind} (n={fit.n_obs}):")
            for i, name in enumerate(fit.names):
                lines.append(
                    f"    {name}: {fit.estimates[i]:.6g} "
                    f"[{fit.ci_lower[i]:.6g}, {fit.ci_upper[i]:.6g}]"
                )
            if fit.r_squared is not None:
                lines.append(
                    f"    r_squared={fit.r_squared:.6g} "
                    f"adj_r_squared={fit.adj_r_squared:.6g}"
                )
            if fit.log_likelihood is not None:
                lines.append(f"    log_likelihood={fit.log_likelihood:.6g}")
            if fit.notes:
                lines.append(f"    note: {fit.notes}")
        for entry in section.skipped:
            lines.append(f"not run: {entry}")
        lines.append("")
    heading("redaction", "-")
    lines.append(
        "contributor identities appear only as salted hashes prefixed c_; "
        "the salt lives outside this bundle."
    )
    lines.append("")
    return "\n".join(lines)


def emit_tables(
    out_dir: str | Path,
    metrics: Sequence[ArticleMetrics],
    sections: Sequence[ReportSection],
    quality_series: Mapping[int, Sequence[tuple[str, float]]],
    profiles: Sequence[ContributorProfile],
    parameters: Mapping[str, str],
    sources: Sequence[str],
    summary_lines: Sequence[str],
    salt: str,
) -> list[str]:
    """Write the report bundle; returns the emitted file names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    _write_tsv(out / "metrics.tsv", METRIC_COLUMNS, _metric_rows(metrics))
    _write_tsv(
        out / "tests.tsv",
        ("section", "test", "statistic", "p_value", "sample_sizes", "direction", "notes"),
        _test_rows(sections),
    )
    _write_tsv(
        out / "regressions.tsv",
        ("section", "model", "coefficient", "estimate", "std_error", "ci_lower",
         "ci_upper", "statistic", "n_obs", "r_squared", "adj_r_squared",
         "log_likelihood"),
        _regression_rows(sections),
    )
    _write_tsv(
        out / "boxplot_source.tsv",
        ("panel", "page_id", "sample", "value"),
        _boxplot_rows(metrics),
    )
    _write_tsv(
        out / "quality_series.tsv",
        ("page_id", "month", "quality"),
        (
            (page_id, month, value)
            for page_id in sorted(quality_series)
            for month, value in quality_series[page_id]
        ),
    )
    _write_tsv(
        out / "contributors.tsv",
        ("contributor", "has_user_page", "gender_specified", "gender_is_female",
         "emailable", "ever_edited_taboo"),
        sorted(
            (
                redact_name(p.name, salt),
                p.has_user_page,
                p.gender_specified,
                p.gender_value == "female",
                p.emailable,
                p.ever_edited_taboo,
            )
            for p in profiles
        ),
    )
    report = _report_text(sections, parameters, sources, summary_lines)
    (out / "report.txt").write_text(report, encoding="utf-8")
    return [
        "metrics.tsv", "tests.tsv", "regressions.tsv", "boxplot_source.tsv",
        "quality_series.tsv", "contributors.tsv", "report.txt",
    ]
