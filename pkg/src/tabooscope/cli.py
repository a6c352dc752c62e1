"""Command-line interface.

``tabooscope run --config <path>`` drives the whole pipeline; the remaining
subcommands run one stage or one enrichment fetch in isolation. Exit codes:
0 success, 1 configuration or input validation failure, 2 stage or
processing failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

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
    EnrichmentClient,
    EnrichmentError,
    ResponseCache,
    fetch_categories,
    fetch_user_attributes,
    rank_views,
    read_pageviews_tsv,
    score_damaging,
    score_quality,
)
from .lexicon import TabooLexicon, TabooLexiconInducer
from .matching import build_samples, load_pages, write_manifest
from .pipeline import (
    ConfigError,
    StageError,
    _parse_ngram_range,
    analyze_revisions_stage,
    load_config,
    run_pipeline,
)
from .revisions import parse_timestamp
from .stopwords import load_stopwords
from .text import extract_ngrams

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_STAGE_FAILURE = 2


def _write_lines(path: str, lines) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for line in lines:
            handle.write(line + "\n")


def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as handle:
        return [
            line.rstrip("\n")
            for line in handle
            if line.strip() and not line.startswith("#")
        ]


def _make_client(args, kind: str) -> EnrichmentClient:
    endpoints = {kind: args.endpoint} if getattr(args, "endpoint", None) else {}
    cache = ResponseCache(args.cache) if args.cache else None
    return EnrichmentClient(mode=args.mode, cache=cache, endpoints=endpoints)


def _add_client_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=("live", "fixture"), default="fixture")
    parser.add_argument("--cache",
                        help="response cache file (required in fixture mode)")
    parser.add_argument("--endpoint", help="service URL (live mode)")


def _cmd_run(args) -> int:
    config = load_config(args.config, mode_override=args.mode)
    outcomes = run_pipeline(config, log=lambda message: print(message, file=sys.stderr))
    for outcome in outcomes:
        status = "resumed" if outcome.resumed else "ran"
        print(f"{outcome.stage}: {status}")
    print(f"report bundle: {config.output_dir / 'report'}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    with open(args.input, encoding="utf-8") as handle:
        senses, errors = parse_dictionary_stream(handle)
    kept = filter_senses(senses, language=args.language)
    documents = senses_to_documents(kept, load_stopwords())
    write_documents(documents, args.out)
    for error in errors:
        print(f"line {error.line_no}: {error.message}", file=sys.stderr)
    print(f"documents written: {len(documents)}")
    return EXIT_OK


def _cmd_induce(args) -> int:
    documents = read_documents(args.docs)
    inducer = TabooLexiconInducer(
        top_k=args.top_k,
        alpha=args.ridge_lambda,
        ngram_range=_parse_ngram_range(args.ngram_range),
        min_df=args.min_df,
    )
    inducer.fit(
        [list(doc.tokens) for doc in documents],
        [1.0 if doc.label else 0.0 for doc in documents],
    )
    inducer.lexicon_.save(args.out)
    print(f"lexicon entries: {len(inducer.lexicon_.entries)}")
    return EXIT_OK


def _cmd_match(args) -> int:
    stopwords = load_stopwords()
    pages = load_pages(args.pages, stopwords)
    lexicon = TabooLexicon.load(args.lexicon)
    documents = read_documents(args.docs)
    lo, hi = _parse_ngram_range(args.ngram_range)
    population = {
        tuple(ngram.split(" "))
        for doc in documents
        for ngram in extract_ngrams(list(doc.tokens), (lo, hi))
    }
    manifest = build_samples(
        pages,
        lexicon.token_sequences(),
        population,
        comparison_size=args.comparison_size,
        seed=args.seed,
    )
    write_manifest(manifest, args.out)
    for line in manifest.dropped:
        print(line, file=sys.stderr)
    taboo = sum(1 for row in manifest.rows if row.sample == "taboo")
    print(f"taboo articles: {taboo}; comparison articles: {len(manifest.rows) - taboo}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    directory = Path(args.out)
    directory.mkdir(parents=True, exist_ok=True)
    outputs = analyze_revisions_stage(
        revisions_path=Path(args.dump),
        bot_list_paths=[Path(p) for p in args.bots],
        protection_log_path=Path(args.protection_log),
        samples_path=Path(args.samples),
        window=args.window,
        cutoff=parse_timestamp(args.cutoff),
        horizon=parse_timestamp(args.horizon),
        directory=directory,
    )
    for path in outputs:
        print(path)
    return EXIT_OK


def _cmd_score_quality(args) -> int:
    revision_ids = [int(line) for line in _read_lines(args.revisions)]
    client = _make_client(args, "quality")
    scores, errors = score_quality(revision_ids, client)
    _write_lines(
        args.out,
        ["revision_id\tscalar"]
        + [f"{rid}\t{scores[rid].scalar!r}" for rid in revision_ids if rid in scores],
    )
    for error in errors:
        print(error, file=sys.stderr)
    print(f"revisions scored: {len(scores)}/{len(revision_ids)}")
    return EXIT_OK


def _cmd_score_damaging(args) -> int:
    revision_ids = [int(line) for line in _read_lines(args.revisions)]
    client = _make_client(args, "damaging")
    scores, errors = score_damaging(revision_ids, client, threshold=args.threshold)
    _write_lines(
        args.out,
        ["revision_id\tprobability\tis_damaging"]
        + [
            f"{rid}\t{scores[rid].probability!r}\t{int(scores[rid].is_damaging)}"
            for rid in revision_ids
            if rid in scores
        ],
    )
    for error in errors:
        print(error, file=sys.stderr)
    print(f"revisions scored: {len(scores)}/{len(revision_ids)}")
    return EXIT_OK


def _cmd_fetch_users(args) -> int:
    last_contribution = {}
    taboo_editors = set()
    for line in _read_lines(args.users):
        name, stamp, taboo_flag = line.split("\t")
        last_contribution[name] = parse_timestamp(stamp)
        if taboo_flag == "1":
            taboo_editors.add(name)
    user_page_created = {}
    if args.user_pages:
        for line in _read_lines(args.user_pages):
            name, stamp = line.split("\t")
            user_page_created[name] = parse_timestamp(stamp)
    client = _make_client(args, "user")
    profiles, errors = fetch_user_attributes(
        sorted(last_contribution),
        client,
        user_page_created=user_page_created,
        last_contribution=last_contribution,
        taboo_editors=taboo_editors,
        snapshot=args.snapshot,
    )
    _write_lines(
        args.out,
        ["name\thas_user_page\tgender_specified\tgender_value\temailable\tever_edited_taboo"]
        + [
            "\t".join(
                (
                    name,
                    str(int(profile.has_user_page)),
                    str(int(profile.gender_specified)),
                    profile.gender_value or "",
                    str(int(profile.emailable)),
                    str(int(profile.ever_edited_taboo)),
                )
            )
            for name, profile in sorted(profiles.items())
        ],
    )
    for error in errors:
        print(error, file=sys.stderr)
    print(f"profiles fetched: {len(profiles)}")
    return EXIT_OK


def _cmd_fetch_categories(args) -> int:
    titles = _read_lines(args.titles)
    client = _make_client(args, "categories")
    results, errors = fetch_categories(titles, client, project_scope=args.scope)
    _write_lines(
        args.out,
        ["title\tin_scope\tcategories"]
        + [
            f"{title}\t{int(results[title].in_scope)}\t"
            + "|".join(sorted(results[title].categories))
            for title in titles
            if title in results
        ],
    )
    for error in errors:
        print(error, file=sys.stderr)
    print(f"articles categorized: {len(results)}/{len(titles)}")
    return EXIT_OK


def _cmd_rank_views(args) -> int:
    records = read_pageviews_tsv(args.pageviews)
    article_ids = None
    if args.articles:
        article_ids = [
            int(line) if line.isdigit() else line for line in _read_lines(args.articles)
        ]
    means, warnings = rank_views(records, article_ids=article_ids)
    _write_lines(
        args.out,
        ["page_id\tmean_view_rank"]
        + [f"{page}\t{means[page]!r}" for page in sorted(means, key=str)],
    )
    for warning in warnings:
        print(warning, file=sys.stderr)
    print(f"articles ranked: {len(means)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabooscope",
        description=(
            "Induce a lexicon of taboo-indicative n-grams from euphemism-tagged "
            "dictionary definitions, partition encyclopedia articles into taboo "
            "and comparison samples, and test article- and contributor-level "
            "measures."
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run the full pipeline from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--mode", choices=("live", "fixture"), default=None,
                     help="override the configured client mode")
    run.set_defaults(handler=_cmd_run)

    ingest = commands.add_parser(
        "ingest-dictionary", help="parse and normalize dictionary senses"
    )
    ingest.add_argument("--input", required=True, help="dictionary dump (JSON lines)")
    ingest.add_argument("--language", default="en")
    ingest.add_argument("--out", required=True, help="normalized documents TSV")
    ingest.set_defaults(handler=_cmd_ingest)

    induce = commands.add_parser(
        "induce-lexicon", help="induce the taboo lexicon from labeled documents"
    )
    induce.add_argument("--docs", required=True, help="normalized documents TSV")
    induce.add_argument("--top-k", type=int, default=500)
    induce.add_argument("--ridge-lambda", type=float, default=1.0)
    induce.add_argument("--ngram-range", default="1:3")
    induce.add_argument("--min-df", type=int, default=2)
    induce.add_argument("--out", required=True, help="lexicon TSV")
    induce.set_defaults(handler=_cmd_induce)

    match = commands.add_parser(
        "match-articles", help="partition articles into taboo and comparison samples"
    )
    match.add_argument("--pages", required=True, help="page metadata TSV")
    match.add_argument("--lexicon", required=True, help="induced lexicon TSV")
    match.add_argument("--docs", required=True,
                       help="normalized documents TSV (comparison population source)")
    match.add_argument("--comparison-size", type=int, required=True)
    match.add_argument("--seed", type=int, required=True)
    match.add_argument("--ngram-range", default="1:3")
    match.add_argument("--out", required=True, help="sample manifest TSV")
    match.set_defaults(handler=_cmd_match)

    analyze = commands.add_parser(
        "analyze-revisions", help="revision analytics for the sampled articles"
    )
    analyze.add_argument("--dump", required=True, help="revisions TSV or XML dump")
    analyze.add_argument("--bots", action="append", required=True,
                         help="bot name list (repeatable)")
    analyze.add_argument("--protection-log", required=True)
    analyze.add_argument("--samples", required=True, help="sample manifest TSV")
    analyze.add_argument("--window", type=int, default=10)
    analyze.add_argument("--cutoff", default="2008-01-01T00:00:00Z")
    analyze.add_argument("--horizon", required=True)
    analyze.add_argument("--out", required=True, help="output directory")
    analyze.set_defaults(handler=_cmd_analyze)

    quality = commands.add_parser("score-quality", help="fetch quality scores")
    quality.add_argument("--revisions", required=True, help="file of revision ids")
    quality.add_argument("--out", required=True)
    _add_client_flags(quality)
    quality.set_defaults(handler=_cmd_score_quality)

    damaging = commands.add_parser("score-damaging", help="fetch damaging scores")
    damaging.add_argument("--revisions", required=True, help="file of revision ids")
    damaging.add_argument("--threshold", type=float, default=DEFAULT_DAMAGING_THRESHOLD)
    damaging.add_argument("--out", required=True)
    _add_client_flags(damaging)
    damaging.set_defaults(handler=_cmd_score_damaging)

    users = commands.add_parser("fetch-users", help="fetch accountholder attributes")
    users.add_argument("--users", required=True,
                       help="TSV of name, last contribution time, taboo flag")
    users.add_argument("--user-pages", help="TSV of name, user page creation time")
    users.add_argument("--snapshot", help="attribute snapshot label")
    users.add_argument("--out", required=True)
    _add_client_flags(users)
    users.set_defaults(handler=_cmd_fetch_users)

    categories = commands.add_parser("fetch-categories", help="fetch article categories")
    categories.add_argument("--titles", required=True, help="file of article titles")
    categories.add_argument("--scope", default=DEFAULT_PROJECT_SCOPE)
    categories.add_argument("--out", required=True)
    _add_client_flags(categories)
    categories.set_defaults(handler=_cmd_fetch_categories)

    views = commands.add_parser("rank-views", help="rank articles by monthly views")
    views.add_argument("--pageviews", required=True, help="pageviews TSV")
    views.add_argument("--articles", help="file of sampled article ids")
    views.add_argument("--out", required=True)
    views.set_defaults(handler=_cmd_rank_views)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, OSError, EnrichmentError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_STAGE_FAILURE
    except RuntimeError as exc:
        print(f"processing failed: {exc}", file=sys.stderr)
        return EXIT_STAGE_FAILURE


if __name__ == "__main__":
    sys.exit(main())
