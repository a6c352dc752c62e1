"""Match article titles against n-gram sets and build the two samples.

Titles are normalized exactly like definitions; a match is full token-sequence
equality between the normalized title and an n-gram, never a substring hit.
Matched redirects are followed to their targets; section-anchored redirects,
redirect cycles, dangling targets, disambiguation pages, and "List of " pages
are dropped with a logged reason.
"""

import random
from dataclasses import dataclass, field
from enum import Enum

from .text import normalize_text

LIST_PREFIX = "List of "
REDIRECT_MAX_DEPTH = 5

COMPARISON_RNG = "python random.Random (mersenne twister)"


class PageKind(Enum):
    ARTICLE = "article"
    REDIRECT = "redirect"
    DISAMBIGUATION = "disambiguation"
    LIST = "list"


@dataclass(frozen=True)
class ArticleRecord:
    page_id: int
    title: str
    normalized_title: tuple[str, ...]
    kind: PageKind
    redirect_target: str | None = None


@dataclass(frozen=True)
class SampleRow:
    page_id: int
    title: str
    sample: str  # "taboo" or "comparison"
    matched_ngrams: tuple[str, ...]  # provenance, sorted


@dataclass
class SampleManifest:
    rows: list[SampleRow]
    dropped: list[str] = field(default_factory=list)  # human-readable reasons
    seed: int | None = None
    rng_name: str = COMPARISON_RNG

    def page_ids(self, sample: str) -> set[int]:
        return {r.page_id for r in self.rows if r.sample == sample}


def page_kind(title: str, redirect_target: str | None, is_disambiguation: bool) -> PageKind:
    if redirect_target:
        return PageKind.REDIRECT
    if is_disambiguation:
        return PageKind.DISAMBIGUATION
    if title.startswith(LIST_PREFIX):
        return PageKind.LIST
    return PageKind.ARTICLE


def load_pages(path, stopwords) -> list[ArticleRecord]:
    """Read the page-metadata TSV: page_id, title, redirect target (empty if
    none), disambiguation flag (0/1)."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{line_no}: expected 4 columns, got {len(parts)}")
            page_id, title, target, disambig = parts
            records.append(
                ArticleRecord(
                    page_id=int(page_id),
                    title=title,
                    normalized_title=tuple(normalize_text(title, stopwords)),
                    kind=page_kind(title, target or None, disambig == "1"),
                    redirect_target=target or None,
                )
            )
    return records


def normalize_title(title: str, stopwords) -> list[str]:
    """Same normalization as definitions: lowercase, alphabetic tokens only,
    stop words removed."""
    return normalize_text(title, stopwords)


def match_titles(articles, ngram_token_sequences: set[tuple[str, ...]]):
    """Pages whose full normalized title equals one of the token sequences.

    Returns (article, matched n-gram) pairs in input order. Pages whose
    titles normalize to nothing cannot match.
    """
    matches = []
    for article in articles:
        if article.normalized_title and article.normalized_title in ngram_token_sequences:
            matches.append((article, " ".join(article.normalized_title)))
    return matches


def resolve_redirect(article, by_title: dict, max_depth: int = REDIRECT_MAX_DEPTH):
    """Follow redirects to a non-redirect record.

    Returns (record, None) on success or (None, reason) when the chain hits a
    section anchor, a missing target, a cycle, or exceeds ``max_depth`` hops.
    Non-redirect input is returned unchanged.
    """
    current = article
    seen_titles = {article.title}
    depth = 0
    while current.kind is PageKind.REDIRECT:
        if depth >= max_depth:
            return None, f"redirect chain from {article.title!r} exceeds depth {max_depth}"
        target = current.redirect_target or ""
        if "#" in target:
            return None, (
                f"redirect {current.title!r} points at a section ({target!r})"
            )
        nxt = by_title.get(target)
        if nxt is None:
            return None, f"redirect {current.title!r} targets missing page {target!r}"
        if nxt.title in seen_titles:
            return None, f"redirect cycle through {nxt.title!r}"
        seen_titles.add(nxt.title)
        current = nxt
        depth += 1
    return current, None


def filter_page(article) -> str | None:
    """Reason to exclude a resolved page from a sample, or None to keep it."""
    if article.kind is PageKind.DISAMBIGUATION:
        return f"{article.title!r} is a disambiguation page"
    if article.kind is PageKind.LIST:
        return f"{article.title!r} is a list page"
    return None


def sample_comparison(population_ids, n: int, seed: int) -> list[int]:
    """Uniform sample without replacement, deterministic for a given seed.

    Population order does not matter: ids are sorted before sampling so two
    permutations of the same population yield the same sample.
    """
    population = sorted(population_ids)
    if n > len(population):
        raise ValueError(
            f"requested comparison sample of {n} from population of {len(population)}"
        )
    if n < 0:
        raise ValueError("sample size must be non-negative")
    return random.Random(seed).sample(population, n)


def _collect(articles, token_sequences, by_title, dropped):
    """Match, resolve, filter; returns {page_id: (record, set of n-grams)}."""
    collected: dict[int, tuple] = {}
    for article, ngram in match_titles(articles, token_sequences):
        resolved, reason = resolve_redirect(article, by_title)
        if resolved is None:
            dropped.append(f"{ngram!r}: {reason}")
            continue
        reason = filter_page(resolved)
        if reason is not None:
            dropped.append(f"{ngram!r}: {reason}")
            continue
        if resolved.page_id in collected:
            collected[resolved.page_id][1].add(ngram)
        else:
            collected[resolved.page_id] = (resolved, {ngram})
    return collected


def build_samples(
    pages,
    lexicon_sequences: set[tuple[str, ...]],
    population_sequences: set[tuple[str, ...]],
    comparison_size: int,
    seed: int,
) -> SampleManifest:
    """Partition pages into the taboo sample and a comparison sample.

    Taboo: pages matching an induced lexicon n-gram. Comparison population:
    pages matching any n-gram from the filtered definitions, minus the taboo
    pages; ``comparison_size`` of them are drawn uniformly at random.
    """
    by_title = {p.title: p for p in pages}
    dropped: list[str] = []
    taboo = _collect(pages, lexicon_sequences, by_title, dropped)
    population = _collect(pages, population_sequences, by_title, dropped)
    for page_id in taboo:
        population.pop(page_id, None)
    chosen = sample_comparison(population.keys(), comparison_size, seed)
    rows = [
        SampleRow(
            page_id=page_id,
            title=record.title,
            sample="taboo",
            matched_ngrams=tuple(sorted(ngrams)),
        )
        for page_id, (record, ngrams) in sorted(taboo.items())
    ]
    rows.extend(
        SampleRow(
            page_id=page_id,
            title=population[page_id][0].title,
            sample="comparison",
            matched_ngrams=tuple(sorted(population[page_id][1])),
        )
        for page_id in sorted(chosen)
    )
    return SampleManifest(rows=rows, dropped=dropped, seed=seed)


def write_manifest(manifest: SampleManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("page_id\ttitle\tsample\tmatched_ngrams\n")
        for row in manifest.rows:
            fh.write(
                f"{row.page_id}\t{row.title}\t{row.sample}\t{'|'.join(row.matched_ngrams)}\n"
            )


def read_manifest(path) -> SampleManifest:
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "page_id\ttitle\tsample\tmatched_ngrams":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            page_id, title, sample, ngrams = line.rstrip("\n").split("\t")
            if sample not in ("taboo", "comparison"):
                raise ValueError(f"{path}: unknown sample label {sample!r}")
            rows.append(
                SampleRow(
                    page_id=int(page_id),
                    title=title,
                    sample=sample,
                    matched_ngrams=tuple(ngrams.split("|")) if ngrams else (),
                )
            )
    return SampleManifest(rows=rows)
