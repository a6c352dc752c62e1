"""tabooscope: measure how an encyclopedia treats taboo subjects.

The package induces a lexicon of taboo-indicative n-grams from
euphemism-tagged dictionary definitions, partitions encyclopedia articles
into a taboo sample and a matched comparison sample, computes article- and
contributor-level measures from revision histories, and tests the
differences with a self-contained statistics kernel. ``tabooscope run
--config <path>`` drives the whole pipeline; each stage is also available
as a standalone subcommand.
"""

from .dictionary import (
    DictionarySense,
    NormalizedDocument,
    filter_senses,
    parse_dictionary_stream,
    senses_to_documents,
)
from .enrichment import (
    EnrichmentClient,
    EnrichmentError,
    HttpTransport,
    ResponseCache,
    rank_views,
)
from .lexicon import (
    NgramTfidfVectorizer,
    TabooLexicon,
    TabooLexiconInducer,
    solve_ridge_normal_equations,
)
from .matching import build_samples, load_pages, normalize_title
from .pipeline import ConfigError, Pipeline, PipelineConfig, load_config, run_pipeline
from .revisions import (
    aggregate_article_metrics,
    build_protection_spells,
    compute_experience,
    detect_reverts,
    protected_proportion,
)
from .stats import (
    RegressionFit,
    SeparationError,
    TestResult,
    chi_squared_2x2,
    logistic_fit,
    mann_whitney_u,
    ols_fit,
    spearman_rho,
)
from .stopwords import load_stopwords
from .text import extract_ngrams, normalize_text

__version__ = "0.1.0"

__all__ = [
    "DictionarySense",
    "NormalizedDocument",
    "filter_senses",
    "parse_dictionary_stream",
    "senses_to_documents",
    "EnrichmentClient",
    "EnrichmentError",
    "HttpTransport",
    "ResponseCache",
    "rank_views",
    "NgramTfidfVectorizer",
    "TabooLexicon",
    "TabooLexiconInducer",
    "solve_ridge_normal_equations",
    "build_samples",
    "load_pages",
    "normalize_title",
    "ConfigError",
    "Pipeline",
    "PipelineConfig",
    "load_config",
    "run_pipeline",
    "aggregate_article_metrics",
    "build_protection_spells",
    "compute_experience",
    "detect_reverts",
    "protected_proportion",
    "RegressionFit",
    "SeparationError",
    "TestResult",
    "chi_squared_2x2",
    "logistic_fit",
    "mann_whitney_u",
    "ols_fit",
    "spearman_rho",
    "load_stopwords",
    "extract_ngrams",
    "normalize_text",
    "__version__",
]
