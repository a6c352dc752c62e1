"""Parse a machine-readable dictionary dump into labeled, normalized senses.

Input is the line-delimited JSON produced by common wiktionary extraction
tools: one entry per line with ``word``, ``lang`` / ``lang_code`` and
``senses[].glosses[]`` / ``senses[].tags[]`` fields. Output is one record per
(word, gloss) pair, labeled euphemistic when the sense carries the
``euphemistic`` tag.
"""

import json
from dataclasses import dataclass

from .text import normalize_text

EUPHEMISM_TAG = "euphemistic"

# Glosses that only point at another entry rather than defining anything.
# Matched case-insensitively against the start of the stripped gloss.
NON_DEFINITION_PREFIXES = (
    "synonym of",
    "initialism of",
    "abbreviation of",
    "alternative form of",
    "alternative spelling of",
)


@dataclass(frozen=True)
class DictionarySense:
    headword: str
    definition: str
    tags: frozenset[str]
    language: str

    @property
    def euphemistic(self) -> bool:
        return any(t.lower() == EUPHEMISM_TAG for t in self.tags)


@dataclass(frozen=True)
class ParseError:
    line_no: int
    message: str


@dataclass(frozen=True)
class NormalizedDocument:
    """A normalized definition plus its euphemism label."""

    tokens: tuple[str, ...]
    label: bool


def parse_dictionary_stream(lines) -> tuple[list[DictionarySense], list[ParseError]]:
    """Parse an iterable of dump lines into senses.

    Malformed lines are logged and skipped, never fatal; an unreadable input
    stream raises ``OSError`` in the caller. Blank lines are ignored.
    """
    senses: list[DictionarySense] = []
    errors: list[ParseError] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append(ParseError(line_no, f"invalid json: {exc.msg}"))
            continue
        if not isinstance(record, dict):
            errors.append(ParseError(line_no, "record is not an object"))
            continue
        word = record.get("word")
        if not isinstance(word, str) or not word:
            errors.append(ParseError(line_no, "missing or non-string 'word'"))
            continue
        language = record.get("lang_code") or record.get("lang") or ""
        if not isinstance(language, str):
            errors.append(ParseError(line_no, "non-string language field"))
            continue
        raw_senses = record.get("senses", [])
        if not isinstance(raw_senses, list):
            errors.append(ParseError(line_no, "'senses' is not a list"))
            continue
        for sense in raw_senses:
            if not isinstance(sense, dict):
                errors.append(ParseError(line_no, "sense is not an object"))
                continue
            tags = sense.get("tags", [])
            if not isinstance(tags, list) or any(not isinstance(t, str) for t in tags):
                errors.append(ParseError(line_no, "sense tags are not a string list"))
                continue
            glosses = sense.get("glosses", [])
            if not isinstance(glosses, list):
                errors.append(ParseError(line_no, "sense glosses are not a list"))
                continue
            for gloss in glosses:
                if not isinstance(gloss, str):
                    errors.append(ParseError(line_no, "gloss is not a string"))
                    continue
                senses.append(
                    DictionarySense(
                        headword=word,
                        definition=gloss,
                        tags=frozenset(tags),
                        language=language,
                    )
                )
    return senses, errors


def filter_senses(
    senses,
    language: str = "en",
    drop_prefixes=NON_DEFINITION_PREFIXES,
) -> list[DictionarySense]:
    """Keep definitional senses in the configured language.

    Drops empty definitions, senses in other languages, and glosses that are
    cross-references rather than definitions. Duplicate (headword, definition)
    pairs collapse to one sense carrying the union of their tags, so a pair is
    euphemistic if any duplicate was tagged. First-seen order is preserved.
    """
    language = language.lower()
    prefixes = tuple(p.lower() for p in drop_prefixes)
    merged: dict[tuple[str, str], DictionarySense] = {}
    for sense in senses:
        definition = sense.definition.strip()
        if not definition:
            continue
        if sense.language.lower() != language:
            continue
        if definition.lower().startswith(prefixes):
            continue
        key = (sense.headword, definition)
        prev = merged.get(key)
        if prev is None:
            merged[key] = DictionarySense(
                headword=sense.headword,
                definition=definition,
                tags=sense.tags,
                language=sense.language,
            )
        elif not (sense.tags <= prev.tags):
            merged[key] = DictionarySense(
                headword=prev.headword,
                definition=prev.definition,
                tags=prev.tags | sense.tags,
                language=prev.language,
            )
    return list(merged.values())


def normalize_definition(definition: str, stopwords: frozenset[str]) -> list[str]:
    """Lowercase, split on non-alphabetic characters, drop stop words."""
    return normalize_text(definition, stopwords)


def senses_to_documents(senses, stopwords: frozenset[str]) -> list[NormalizedDocument]:
    """Normalize filtered senses into labeled documents (order preserved)."""
    return [
        NormalizedDocument(
            tokens=tuple(normalize_definition(s.definition, stopwords)),
            label=s.euphemistic,
        )
        for s in senses
    ]


def write_documents(documents, path) -> None:
    """Write documents as TSV: label (0/1), then space-joined tokens."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in documents:
            fh.write(f"{int(doc.label)}\t{' '.join(doc.tokens)}\n")


def read_documents(path) -> list[NormalizedDocument]:
    documents = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            label, _, toks = line.partition("\t")
            if label not in ("0", "1"):
                raise ValueError(f"{path}:{line_no}: bad label {label!r}")
            tokens = tuple(toks.split()) if toks else ()
            documents.append(NormalizedDocument(tokens=tokens, label=label == "1"))
    return documents
