"""Frozen stop-word list.

The bundled file snapshots a standard 179-word English stop-word list plus 14
dictionary-gloss boilerplate words. It is a data file, not a runtime download,
so results never depend on the installed version of any NLP toolkit.
"""

from importlib.resources import files

_BUNDLED = "data/stopwords_english.txt"


def load_stopwords(path=None) -> frozenset[str]:
    """Load a stop-word file: one word per line, ``#`` comments and blank
    lines ignored. With no ``path``, the bundled frozen list is used."""
    if path is None:
        text = files("tabooscope").joinpath(_BUNDLED).read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    words = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line)
    return frozenset(words)
