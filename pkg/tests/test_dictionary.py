import json

import pytest

from tabooscope.dictionary import (
    DictionarySense,
    filter_senses,
    normalize_definition,
    parse_dictionary_stream,
    read_documents,
    senses_to_documents,
    write_documents,
)
from tabooscope.stopwords import load_stopwords

STOPWORDS = load_stopwords()


def _line(word, glosses, tags=(), lang="en"):
    return json.dumps(
        {"word": word, "lang_code": lang,
         "senses": [{"glosses": list(glosses), "tags": list(tags)}]}
    )


def test_parse_one_sense_per_word_gloss_pair():
    lines = [
        _line("member", ["The penis."], tags=["euphemistic", "slang"]),
        _line("member", ["One who belongs to a group."]),
        _line("bank", ["An institution.", "The edge of a river."]),
    ]
    senses, errors = parse_dictionary_stream(lines)
    assert errors == []
    assert len(senses) == 4
    assert senses[0].headword == "member"
    assert senses[0].euphemistic
    assert not senses[1].euphemistic
    # two glosses in one sense yield two records
    assert [s.definition for s in senses[2:]] == ["An institution.", "The edge of a river."]


def test_euphemistic_tag_is_case_insensitive():
    sense = DictionarySense("x", "y", frozenset({"Euphemistic"}), "en")
    assert sense.euphemistic
    sense = DictionarySense("x", "y", frozenset({"vulgar"}), "en")
    assert not sense.euphemistic


def test_malformed_lines_logged_never_fatal():
    lines = [
        "not json at all {",
        _line("ok", ["fine."]),
        json.dumps(["a", "list"]),
        json.dumps({"word": 3, "senses": []}),
        json.dumps({"word": "x", "senses": "nope"}),
        json.dumps({"word": "y", "senses": [{"glosses": [1, "real gloss"]}]}),
        "",
    ]
    senses, errors = parse_dictionary_stream(lines)
    assert [s.headword for s in senses] == ["ok", "y"]
    assert [e.line_no for e in errors] == [1, 3, 4, 5, 6]


def test_filter_drops_cross_reference_glosses():
    senses, _ = parse_dictionary_stream([_line("stiff", ["Synonym of corpse"])])
    assert filter_senses(senses) == []
    for prefix in ("Initialism of", "Abbreviation of", "Alternative form of",
                   "Alternative spelling of"):
        senses, _ = parse_dictionary_stream([_line("w", [f"{prefix} something"])])
        assert filter_senses(senses) == []
    # prefix must be at the start
    senses, _ = parse_dictionary_stream([_line("w", ["A synonym of joy, roughly."])])
    assert len(filter_senses(senses)) == 1


def test_filter_drops_other_languages_and_empty_definitions():
    senses, _ = parse_dictionary_stream([
        _line("mort", ["Death."], lang="fr"),
        _line("death", ["   "]),
        _line("death", ["The end of life."]),
    ])
    kept = filter_senses(senses)
    assert [s.headword for s in kept] == ["death"]
    assert kept[0].definition == "The end of life."


def test_filter_deduplicates_and_merges_tags():
    senses, _ = parse_dictionary_stream([
        _line("pass", ["To die."]),
        _line("pass", ["To die."], tags=["euphemistic"]),
        _line("pass", ["To die."]),
    ])
    kept = filter_senses(senses)
    assert len(kept) == 1
    assert kept[0].euphemistic  # euphemistic if any duplicate is tagged


def test_filter_preserves_order_and_is_deterministic():
    lines = [_line(f"w{i}", [f"gloss {i} body"]) for i in range(20)]
    senses, _ = parse_dictionary_stream(lines)
    kept = filter_senses(senses)
    assert [s.headword for s in kept] == [f"w{i}" for i in range(20)]
    assert filter_senses(senses) == kept


def test_normalize_definition_examples():
    assert normalize_definition("The member of a group 123", STOPWORDS) == ["member", "group"]
    assert normalize_definition("a term used especially for something", STOPWORDS) == []


def test_documents_roundtrip(tmp_path):
    senses, _ = parse_dictionary_stream([
        _line("member", ["The member of a group 123"], tags=["euphemistic"]),
        _line("void", ["a term used especially for something"]),
    ])
    docs = senses_to_documents(filter_senses(senses), STOPWORDS)
    assert docs[0].tokens == ("member", "group")
    assert docs[0].label
    assert docs[1].tokens == ()  # empty result is valid
    path = tmp_path / "docs.tsv"
    write_documents(docs, path)
    assert read_documents(path) == docs


def test_read_documents_rejects_bad_label(tmp_path):
    path = tmp_path / "docs.tsv"
    path.write_text("2\tfoo bar\n")
    with pytest.raises(ValueError):
        read_documents(path)
