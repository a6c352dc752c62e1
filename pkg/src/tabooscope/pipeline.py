"""Config-driven pipeline orchestration.

Stages run in dependency order (ingest, induce, match, analyze, enrich,
test), each writing its outputs plus a manifest of content hashes into its
own directory. A rerun resumes past any stage whose inputs, parameters, and
outputs all hash the same, so unchanged work is never repeated and resumed
runs produce byte-identical bundles. All randomness flows from the single
configured seed, and no emitted file contains a timestamp of the run
itself.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Mapping

from . import report as report_mod
from .dictionary import (
    filter_senses,
    parse_dictionary_stream,
    read_documents,
    senses_to_documents,
    write_documents,
)
from .enrichment import (
    DEFAULT_DAMAGING_THRESHOLD,
    DEFAULT_PROJECT_SCOPE,
    ContributorProfile,
    EnrichmentClient,
    ResponseCache,
    fetch_categories,
    fetch_user_attributes,
    mean_of_series,
    monthly_quality_series,
    rank_views,
    read_pageviews_tsv,
    score_damaging,
    score_quality,
)
from .lexicon import TabooLexicon, TabooLexiconInducer
from .matching import build_samples, load_pages, read_manifest, write_manifest
from .revisions import (
    ArticleMetrics,
    aggregate_article_metrics,
    build_protection_spells,
    filter_bots,
    iter_revisions_xml,
    load_bot_names,
    parse_timestamp,
    protected_proportion,
    read_protection_log,
    read_revisions_tsv,
)
from .stopwords import load_stopwords
from .text import extract_ngrams

STAGES = ("ingest", "induce", "match", "analyze", "enrich", "test")

REQUIRED_INPUTS = (
    "dictionary", "pages", "revisions", "pageviews", "protection_log",
    "bot_lists", "cache",
)

PARAMETER_DEFAULTS = {
    "top_k": "500",
    "lambda": "1.0",
    "ngram_range": "1:3",
    "min_df": "2",
    "window": "10",
    "cutoff": "2008-01-01T00:00:00Z",
    "damaging_threshold": str(DEFAULT_DAMAGING_THRESHOLD),
    "mode": "fixture",
    "language": "en",
    "project_scope": DEFAULT_PROJECT_SCOPE,
}

REQUIRED_PARAMETERS = ("comparison_size", "seed", "horizon")


class ConfigError(ValueError):
    """Configuration is unusable; the message lists every problem found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(self.problems))


class StageError(RuntimeError):
    """A stage failed; partial outputs are preserved for inspection."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.__cause__ = cause


@dataclass
class PipelineConfig:
    dictionary_path: Path
    pages_path: Path
    revisions_path: Path
    pageviews_path: Path
    protection_log_path: Path
    bot_list_paths: tuple[Path, ...]
    cache_path: Path
    output_dir: Path
    comparison_size: int
    seed: int
    horizon: datetime
    user_pages_path: Path | None = None
    top_k: int = 500
    ridge_lambda: float = 1.0
    ngram_range: tuple[int, int] = (1, 3)
    min_df: int = 2
    window: int = 10
    cutoff: datetime = None  # type: ignore[assignment]
    damaging_threshold: float = DEFAULT_DAMAGING_THRESHOLD
    mode: str = "fixture"
    language: str = "en"
    project_scope: str = DEFAULT_PROJECT_SCOPE
    endpoints: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.cutoff is None:
            self.cutoff = parse_timestamp(PARAMETER_DEFAULTS["cutoff"])

    def parameter_echo(self) -> dict[str, str]:
        """Every tunable parameter, echoed into the report header."""
        return {
            "top_k": str(self.top_k),
            "lambda": repr(self.ridge_lambda),
            "ngram_range": f"{self.ngram_range[0]}:{self.ngram_range[1]}",
            "min_df": str(self.min_df),
            "window": str(self.window),
            "comparison_size": str(self.comparison_size),
            "seed": str(self.seed),
            "cutoff": self.cutoff.isoformat(),
            "horizon": self.horizon.isoformat(),
            "damaging_threshold": repr(self.damaging_threshold),
            "mode": self.mode,
            "language": self.language,
            "project_scope": self.project_scope,
        }


def _parse_ngram_range(raw: str) -> tuple[int, int]:
    lo_text, sep, hi_text = raw.partition(":")
    if not sep:
        raise ValueError(f"expected low:high, got {raw!r}")
    lo, hi = int(lo_text), int(hi_text)
    if not 1 <= lo <= hi:
        raise ValueError(f"need 1 <= low <= high, got {raw!r}")
    return lo, hi


def load_config(path: str | Path, mode_override: str | None = None) -> PipelineConfig:
    """Parse and validate an INI config; every problem is reported at once."""
    parser = configparser.ConfigParser()
    config_path = Path(path)
    problems: list[str] = []
    if not config_path.is_file():
        raise ConfigError([f"config file not found: {config_path}"])
    parser.read(config_path, encoding="utf-8")

    base = config_path.parent

    def resolve(raw: str) -> Path:
        p = Path(raw)
        return p if p.is_absolute() else base / p

    inputs = parser["inputs"] if parser.has_section("inputs") else {}
    params = parser["parameters"] if parser.has_section("parameters") else {}
    output = parser["output"] if parser.has_section("output") else {}
    endpoints = dict(parser["endpoints"]) if parser.has_section("endpoints") else {}

    for key in REQUIRED_INPUTS:
        if key not in inputs:
            problems.append(f"[inputs] missing required key: {key}")
    for key in REQUIRED_PARAMETERS:
        if key not in params:
            problems.append(f"[parameters] missing required key: {key}")
    if "directory" not in output:
        problems.append("[output] missing required key: directory")

    merged = dict(PARAMETER_DEFAULTS)
    merged.update(params)
    if mode_override is not None:
        merged["mode"] = mode_override

    def parse_param(key: str, convert: Callable, problems=problems):
        try:
            return convert(merged[key])
        except (KeyError, ValueError) as exc:
            if key in merged:
                problems.append(f"[parameters] {key}: {exc}")
            return None

    top_k = parse_param("top_k", int)
    ridge_lambda = parse_param("lambda", float)
    ngram_range = parse_param("ngram_range", _parse_ngram_range)
    min_df = parse_param("min_df", int)
    window = parse_param("window", int)
    comparison_size = parse_param("comparison_size", int)
    seed = parse_param("seed", int)
    cutoff = parse_param("cutoff", parse_timestamp)
    horizon = parse_param("horizon", parse_timestamp)
    damaging_threshold = parse_param("damaging_threshold", float)
    mode = merged["mode"]
    if mode not in ("live", "fixture"):
        problems.append(f"[parameters] mode must be live or fixture, got {mode!r}")

    paths: dict[str, Path] = {}
    for key in REQUIRED_INPUTS:
        if key not in inputs:
            continue
        if key == "bot_lists":
            continue
        paths[key] = resolve(inputs[key])
    bot_lists = tuple(
        resolve(part.strip())
        for part in inputs.get("bot_lists", "").split(",")
        if part.strip()
    )
    if "bot_lists" in inputs and not bot_lists:
        problems.append("[inputs] bot_lists must name at least one file")
    user_pages = resolve(inputs["user_pages"]) if "user_pages" in inputs else None

    for key, p in paths.items():
        if key == "cache" and mode == "live":
            continue  # the cache is created on first live fetch
        if not p.is_file():
            problems.append(f"[inputs] {key}: file not found: {p}")
    for p in bot_lists:
        if not p.is_file():
            problems.append(f"[inputs] bot_lists: file not found: {p}")
    if user_pages is not None and not user_pages.is_file():
        problems.append(f"[inputs] user_pages: file not found: {user_pages}")
    if cutoff is not None and horizon is not None and horizon <= cutoff:
        problems.append("[parameters] horizon must be after cutoff")

    if problems:
        raise ConfigError(problems)

    return PipelineConfig(
        dictionary_path=paths["dictionary"],
        pages_path=paths["pages"],
        revisions_path=paths["revisions"],
        pageviews_path=paths["pageviews"],
        protection_log_path=paths["protection_log"],
        bot_list_paths=bot_lists,
        cache_path=paths["cache"],
        output_dir=resolve(output["directory"]),
        comparison_size=comparison_size,
        seed=seed,
        horizon=horizon,
        user_pages_path=user_pages,
        top_k=top_k,
        ridge_lambda=ridge_lambda,
        ngram_range=ngram_range,
        min_df=min_df,
        window=window,
        cutoff=cutoff,
        damaging_threshold=damaging_threshold,
        mode=mode,
        language=merged["language"],
        project_scope=merged["project_scope"],
        endpoints=endpoints,
    )


# --------------------------------------------------------------------------
# stage plumbing


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_lines(path: Path, lines) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for line in lines:
            handle.write(line + "\n")


@dataclass(frozen=True)
class StageOutcome:
    stage: str
    resumed: bool


class Pipeline:
    def __init__(self, config: PipelineConfig, log: Callable[[str], None] | None = None):
        self.config = config
        self.log = log or (lambda message: None)
        self.stopwords = load_stopwords()

    # ---- directories

    def stage_dir(self, stage: str) -> Path:
        return self.config.output_dir / "stages" / stage

    @property
    def report_dir(self) -> Path:
        return self.config.output_dir / "report"

    # ---- staleness

    def _stage_inputs(self, stage: str) -> list[Path]:
        c = self.config
        if stage == "ingest":
            return [c.dictionary_path]
        if stage == "induce":
            return [self.stage_dir("ingest") / "documents.tsv"]
        if stage == "match":
            return [
                c.pages_path,
                self.stage_dir("induce") / "lexicon.tsv",
                self.stage_dir("ingest") / "documents.tsv",
            ]
        if stage == "analyze":
            return [
                c.revisions_path,
                c.protection_log_path,
                *c.bot_list_paths,
                self.stage_dir("match") / "samples.tsv",
            ]
        if stage == "enrich":
            inputs = [
                self.stage_dir("analyze") / "revisions_annotated.tsv",
                self.stage_dir("analyze") / "article_metrics.tsv",
                self.stage_dir("match") / "samples.tsv",
                c.pageviews_path,
            ]
            if c.user_pages_path is not None:
                inputs.append(c.user_pages_path)
            if c.mode == "fixture":
                inputs.append(c.cache_path)
            return inputs
        if stage == "test":
            analyze = self.stage_dir("analyze")
            enrich = self.stage_dir("enrich")
            return [
                analyze / "article_metrics.tsv",
                analyze / "revisions_annotated.tsv",
                analyze / "analyze.log",
                self.stage_dir("match") / "samples.tsv",
                enrich / "quality.tsv",
                enrich / "damaging.tsv",
                enrich / "users.tsv",
                enrich / "categories.tsv",
                enrich / "view_ranks.tsv",
            ]
        raise ValueError(f"unknown stage {stage!r}")

    def _stage_params(self, stage: str) -> dict[str, str]:
        echo = self.config.parameter_echo()
        by_stage = {
            "ingest": ("language",),
            "induce": ("top_k", "lambda", "ngram_range", "min_df"),
            "match": ("comparison_size", "seed", "ngram_range"),
            "analyze": ("window", "cutoff", "horizon"),
            "enrich": ("mode", "damaging_threshold", "project_scope", "horizon"),
            "test": tuple(sorted(echo)),
        }
        return {key: echo[key] for key in by_stage[stage]}

    def _manifest_path(self, stage: str) -> Path:
        return self.stage_dir(stage) / "manifest.json"

    def _current_state(self, stage: str) -> dict:
        inputs = {}
        for path in self._stage_inputs(stage):
            if not path.is_file():
                inputs[path.name] = None
            else:
                inputs[path.name] = _sha256_file(path)
        return {"inputs": inputs, "params": self._stage_params(stage)}

    def _can_resume(self, stage: str, state: dict) -> bool:
        manifest_path = self._manifest_path(stage)
        if not manifest_path.is_file():
            return False
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, OSError):
            return False
        if manifest.get("inputs") != state["inputs"]:
            return False
        if manifest.get("params") != state["params"]:
            return False
        for rel, digest in manifest.get("outputs", {}).items():
            path = self.config.output_dir / rel
            if not path.is_file() or _sha256_file(path) != digest:
                return False
        return True

    def _record(self, stage: str, state: dict, outputs: list[Path]) -> None:
        manifest = dict(state)
        manifest["outputs"] = {
            str(path.relative_to(self.config.output_dir)): _sha256_file(path)
            for path in outputs
        }
        self._manifest_path(stage).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def run(self) -> list[StageOutcome]:
        outcomes = []
        for stage in STAGES:
            directory = self.stage_dir(stage)
            directory.mkdir(parents=True, exist_ok=True)
            state = self._current_state(stage)
            if self._can_resume(stage, state):
                self.log(f"{stage}: resumed from existing outputs")
                outcomes.append(StageOutcome(stage, resumed=True))
                continue
            self.log(f"{stage}: running")
            runner = getattr(self, f"_run_{stage}")
            try:
                outputs = runner(directory)
            except Exception as exc:
                raise StageError(stage, exc) from exc
            self._record(stage, state, outputs)
            outcomes.append(StageOutcome(stage, resumed=False))
        return outcomes

    # ---- stages

    def _run_ingest(self, directory: Path) -> list[Path]:
        with open(self.config.dictionary_path, encoding="utf-8") as handle:
            senses, errors = parse_dictionary_stream(handle)
        kept = filter_senses(senses, language=self.config.language)
        documents = senses_to_documents(kept, self.stopwords)
        docs_path = directory / "documents.tsv"
        write_documents(documents, docs_path)
        log_path = directory / "ingest.log"
        _write_lines(
            log_path,
            [f"line {e.line_no}: {e.message}" for e in errors]
            + [
                f"senses parsed: {len(senses)}",
                f"senses kept: {len(kept)}",
                f"euphemistic documents: {sum(1 for d in documents if d.label)}",
            ],
        )
        return [docs_path, log_path]

    def _run_induce(self, directory: Path) -> list[Path]:
        documents = read_documents(self.stage_dir("ingest") / "documents.tsv")
        inducer = TabooLexiconInducer(
            top_k=self.config.top_k,
            alpha=self.config.ridge_lambda,
            ngram_range=self.config.ngram_range,
            min_df=self.config.min_df,
        )
        inducer.fit(
            [list(doc.tokens) for doc in documents],
            [1.0 if doc.label else 0.0 for doc in documents],
        )
        lexicon_path = directory / "lexicon.tsv"
        inducer.lexicon_.save(lexicon_path)
        return [lexicon_path]

    def _run_match(self, directory: Path) -> list[Path]:
        pages = load_pages(self.config.pages_path, self.stopwords)
        lexicon = TabooLexicon.load(self.stage_dir("induce") / "lexicon.tsv")
        documents = read_documents(self.stage_dir("ingest") / "documents.tsv")
        lo, hi = self.config.ngram_range
        population = {
            tuple(ngram.split(" "))
            for doc in documents
            for ngram in extract_ngrams(list(doc.tokens), (lo, hi))
        }
        manifest = build_samples(
            pages,
            lexicon.token_sequences(),
            population,
            comparison_size=self.config.comparison_size,
            seed=self.config.seed,
        )
        samples_path = directory / "samples.tsv"
        write_manifest(manifest, samples_path)
        taboo = sum(1 for row in manifest.rows if row.sample == "taboo")
        log_path = directory / "match.log"
        _write_lines(
            log_path,
            list(manifest.dropped)
            + [
                f"taboo articles: {taboo}",
                f"comparison articles: {len(manifest.rows) - taboo}",
            ],
        )
        return [samples_path, log_path]

    def _run_analyze(self, directory: Path) -> list[Path]:
        config = self.config
        return analyze_revisions_stage(
            revisions_path=config.revisions_path,
            bot_list_paths=config.bot_list_paths,
            protection_log_path=config.protection_log_path,
            samples_path=self.stage_dir("match") / "samples.tsv",
            window=config.window,
            cutoff=config.cutoff,
            horizon=config.horizon,
            directory=directory,
        )

    @staticmethod
    def _read_annotated(path: Path):
        rows = []
        with open(path, encoding="utf-8") as handle:
            next(handle)
            for line in handle:
                parts = line.rstrip("\n").split("\t")
                rows.append(
                    {
                        "page_id": int(parts[0]),
                        "revision_id": int(parts[1]),
                        "timestamp": parse_timestamp(parts[2]),
                        "kind": parts[3],
                        "name": parts[4],
                        "deleted": parts[5] == "1",
                        "is_reverted": parts[6] == "1",
                        "editor_nth_edit": int(parts[7]),
                    }
                )
        return rows

    def _run_enrich(self, directory: Path) -> list[Path]:
        config = self.config
        annotated = self._read_annotated(
            self.stage_dir("analyze") / "revisions_annotated.tsv"
        )
        samples = read_manifest(self.stage_dir("match") / "samples.tsv")
        sample_map = {row.page_id: (row.title, row.sample) for row in samples.rows}
        client = EnrichmentClient(
            mode=config.mode,
            cache=ResponseCache(config.cache_path),
            endpoints=config.endpoints,
        )
        problems: list[str] = []

        revision_ids = sorted({row["revision_id"] for row in annotated})
        quality, errors = score_quality(revision_ids, client)
        problems.extend(errors)
        quality_path = directory / "quality.tsv"
        _write_lines(
            quality_path,
            ["revision_id\tscalar"]
            + [f"{rid}\t{quality[rid].scalar!r}" for rid in revision_ids if rid in quality],
        )

        damaging, errors = score_damaging(
            revision_ids, client, threshold=config.damaging_threshold
        )
        problems.extend(errors)
        damaging_path = directory / "damaging.tsv"
        _write_lines(
            damaging_path,
            ["revision_id\tprobability\tis_damaging"]
            + [
                f"{rid}\t{damaging[rid].probability!r}\t{int(damaging[rid].is_damaging)}"
                for rid in revision_ids
                if rid in damaging
            ],
        )

        account_rows = [
            row for row in annotated if row["kind"] == "account" and not row["deleted"]
        ]
        last_contribution: dict[str, datetime] = {}
        taboo_editors: set[str] = set()
        for row in account_rows:
            name = row["name"]
            stamp = row["timestamp"]
            if name not in last_contribution or stamp > last_contribution[name]:
                last_contribution[name] = stamp
            if sample_map[row["page_id"]][1] == "taboo":
                taboo_editors.add(name)
        user_page_created: dict[str, datetime] = {}
        if config.user_pages_path is not None:
            with open(config.user_pages_path, encoding="utf-8") as handle:
                for line in handle:
                    line = line.rstrip("\n")
                    if not line or line.startswith("#"):
                        continue
                    name, stamp = line.split("\t")
                    user_page_created[name] = parse_timestamp(stamp)
        names = sorted(last_contribution)
        profiles, errors = fetch_user_attributes(
            names,
            client,
            user_page_created=user_page_created,
            last_contribution=last_contribution,
            taboo_editors=taboo_editors,
            snapshot=config.horizon.isoformat(),
        )
        problems.extend(errors)
        users_path = directory / "users.tsv"
        _write_lines(
            users_path,
            ["name\thas_user_page\tgender_specified\tgender_value\temailable\tever_edited_taboo"]
            + [
                "\t".join(
                    (
                        name,
                        str(int(profiles[name].has_user_page)),
                        str(int(profiles[name].gender_specified)),
                        profiles[name].gender_value or "",
                        str(int(profiles[name].emailable)),
                        str(int(profiles[name].ever_edited_taboo)),
                    )
                )
                for name in names
            ],
        )

        titles = sorted(row.title for row in samples.rows)
        categories, errors = fetch_categories(
            titles, client, project_scope=config.project_scope
        )
        problems.extend(errors)
        categories_path = directory / "categories.tsv"
        _write_lines(
            categories_path,
            ["title\tin_scope\tcategories"]
            + [
                f"{title}\t{int(categories[title].in_scope)}\t"
                + "|".join(sorted(categories[title].categories))
                for title in titles
                if title in categories
            ],
        )

        views = read_pageviews_tsv(config.pageviews_path)
        title_to_page = {row.title: row.page_id for row in samples.rows}
        sampled_views = []
        for record in views:
            page_id = record.page_id
            if isinstance(page_id, str):
                page_id = title_to_page.get(page_id)
            if page_id in sample_map:
                sampled_views.append(
                    type(record)(page_id=page_id, month=record.month, views=record.views)
                )
        ranks, warnings = rank_views(sampled_views, article_ids=sorted(sample_map))
        problems.extend(warnings)
        ranks_path = directory / "view_ranks.tsv"
        _write_lines(
            ranks_path,
            ["page_id\tmean_view_rank"]
            + [f"{page_id}\t{ranks[page_id]!r}" for page_id in sorted(ranks)],
        )

        log_path = directory / "enrich.log"
        _write_lines(log_path, problems + [f"revisions scored: {len(revision_ids)}"])
        return [
            quality_path, damaging_path, users_path, categories_path, ranks_path,
            log_path,
        ]

    def _run_test(self, directory: Path) -> list[Path]:
        config = self.config
        analyze_dir = self.stage_dir("analyze")
        enrich_dir = self.stage_dir("enrich")

        annotated = self._read_annotated(analyze_dir / "revisions_annotated.tsv")
        by_page: dict[int, list[dict]] = {}
        for row in annotated:
            by_page.setdefault(row["page_id"], []).append(row)

        def read_table(path: Path) -> list[list[str]]:
            with open(path, encoding="utf-8") as handle:
                next(handle)
                return [line.rstrip("\n").split("\t") for line in handle if line.strip()]

        quality = {
            int(rid): float(scalar)
            for rid, scalar in read_table(enrich_dir / "quality.tsv")
        }
        damaging = {
            int(rid): flag == "1"
            for rid, _, flag in read_table(enrich_dir / "damaging.tsv")
        }
        ranks = {
            int(pid): float(rank)
            for pid, rank in read_table(enrich_dir / "view_ranks.tsv")
        }
        category_rows = {
            parts[0]: parts[1] == "1"
            for parts in read_table(enrich_dir / "categories.tsv")
        }
        profiles = [
            ContributorProfile(
                name=parts[0],
                has_user_page=parts[1] == "1",
                gender_specified=parts[2] == "1",
                gender_value=parts[3] or None,
                emailable=parts[4] == "1",
                ever_edited_taboo=parts[5] == "1",
            )
            for parts in read_table(enrich_dir / "users.tsv")
        ]

        metrics: list[ArticleMetrics] = []
        series_by_page: dict[int, list[tuple[str, float]]] = {}
        for parts in read_table(analyze_dir / "article_metrics.tsv"):
            page_id = int(parts[0])
            page_rows = by_page.get(page_id, [])
            n_damaging = sum(
                1 for row in page_rows if damaging.get(row["revision_id"], False)
            )
            series = monthly_quality_series(
                [_SeriesPoint(row["timestamp"], row["revision_id"]) for row in page_rows],
                quality,
                config.horizon,
            )
            if series:
                series_by_page[page_id] = series
            metrics.append(
                ArticleMetrics(
                    page_id=page_id,
                    title=parts[1],
                    sample=parts[2],
                    n_contributions=int(parts[3]),
                    n_reverted=int(parts[4]),
                    n_damaging=n_damaging,
                    n_no_account=int(parts[5]),
                    protected_proportion=float(parts[6]),
                    mean_editor_experience=float(parts[7]) if parts[7] else None,
                    mean_quality=mean_of_series(series),
                    mean_view_rank=ranks.get(page_id),
                )
            )

        sample_by_page = {m.page_id: m.sample for m in metrics}
        protection_by_page = {m.page_id: m.protected_proportion for m in metrics}
        revision_rows = [
            report_mod.RevisionRow(
                taboo=sample_by_page[row["page_id"]] == "taboo",
                protected_proportion=protection_by_page[row["page_id"]],
                no_account=row["kind"] != "account",
            )
            for row in annotated
            if row["page_id"] in sample_by_page
        ]
        validation_rows = [
            (m.sample == "taboo", category_rows[m.title])
            for m in metrics
            if m.title in category_rows
        ]

        sections = report_mod.run_hypothesis_suite(
            metrics, revision_rows, profiles, validation_rows
        )

        taboo_count = sum(1 for m in metrics if m.sample == "taboo")
        summary = [
            f"taboo articles analyzed: {taboo_count}",
            f"comparison articles analyzed: {len(metrics) - taboo_count}",
            f"revisions analyzed: {len(annotated)}",
            f"accountholder profiles: {len(profiles)}",
        ]
        sources = [
            "stages/ingest/documents.tsv",
            "stages/induce/lexicon.tsv",
            "stages/match/samples.tsv",
            "stages/analyze/article_metrics.tsv",
            "stages/analyze/revisions_annotated.tsv",
            "stages/enrich/quality.tsv",
            "stages/enrich/damaging.tsv",
            "stages/enrich/users.tsv",
            "stages/enrich/categories.tsv",
            "stages/enrich/view_ranks.tsv",
        ]

        salt = report_mod.derive_salt(config.seed)
        secrets_dir = config.output_dir / "secrets"
        secrets_dir.mkdir(parents=True, exist_ok=True)
        salt_path = secrets_dir / "salt.txt"
        salt_path.write_text(salt + "\n", encoding="utf-8")

        emitted = report_mod.emit_tables(
            self.report_dir,
            metrics,
            sections,
            series_by_page,
            profiles,
            parameters=config.parameter_echo(),
            sources=sources,
            summary_lines=summary,
            salt=salt,
        )
        return [self.report_dir / name for name in emitted] + [salt_path]


@dataclass(frozen=True)
class _SeriesPoint:
    timestamp: datetime
    revision_id: int


def load_revisions_any(path: Path):
    """Read revision records from the TSV fixture format or an XML dump."""
    if path.suffix == ".tsv":
        return read_revisions_tsv(path)
    return list(iter_revisions_xml(path))


def analyze_revisions_stage(
    revisions_path: Path,
    bot_list_paths,
    protection_log_path: Path,
    samples_path: Path,
    window: int,
    cutoff: datetime,
    horizon: datetime,
    directory: Path,
) -> list[Path]:
    """Run revision analytics for the sampled articles and write the stage
    outputs (article metrics, annotated revisions, log) into ``directory``."""
    samples = read_manifest(samples_path)
    sample_map = {row.page_id: (row.title, row.sample) for row in samples.rows}
    revisions = load_revisions_any(Path(revisions_path))
    bot_names = load_bot_names(bot_list_paths)
    humans = filter_bots(revisions, bot_names)
    events = read_protection_log(protection_log_path)
    spells, warnings = build_protection_spells(events, horizon)
    by_page: dict[int, list] = {}
    for spell in spells:
        by_page.setdefault(spell.page_id, []).append(spell)
    protected = {
        page_id: protected_proportion(page_spells, cutoff, horizon)
        for page_id, page_spells in by_page.items()
    }
    metrics, kept, excluded = aggregate_article_metrics(
        humans, sample_map, protected, window=window
    )

    metrics_path = directory / "article_metrics.tsv"
    with open(metrics_path, "w", encoding="utf-8") as handle:
        handle.write(
            "page_id\ttitle\tsample\tn_contributions\tn_reverted\t"
            "n_no_account\tprotected_proportion\tmean_editor_experience\n"
        )
        for m in metrics:
            experience = "" if m.mean_editor_experience is None else repr(
                m.mean_editor_experience
            )
            handle.write(
                f"{m.page_id}\t{m.title}\t{m.sample}\t{m.n_contributions}\t"
                f"{m.n_reverted}\t{m.n_no_account}\t"
                f"{m.protected_proportion!r}\t{experience}\n"
            )

    annotated_path = directory / "revisions_annotated.tsv"
    with open(annotated_path, "w", encoding="utf-8") as handle:
        handle.write(
            "page_id\trevision_id\ttimestamp\tkind\tname\tdeleted\t"
            "is_reverted\teditor_nth_edit\n"
        )
        for page_id in sorted(kept):
            for r in kept[page_id]:
                handle.write(
                    f"{r.page_id}\t{r.revision_id}\t"
                    f"{r.timestamp.isoformat()}\t{r.contributor.kind.value}\t"
                    f"{r.contributor.name}\t{int(r.contributor.deleted)}\t"
                    f"{int(r.is_reverted)}\t{r.editor_nth_edit}\n"
                )

    log_path = directory / "analyze.log"
    _write_lines(
        log_path,
        excluded
        + warnings
        + [
            f"revisions read: {len(revisions)}",
            f"human revisions retained: {len(humans)}",
            f"articles with metrics: {len(metrics)}",
        ],
    )
    return [metrics_path, annotated_path, log_path]


def run_pipeline(config: PipelineConfig, log=None) -> list[StageOutcome]:
    return Pipeline(config, log=log).run()
