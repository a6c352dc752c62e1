"""Clients for external scoring and metadata services, plus view ranking.

Every client runs in one of two modes. In ``live`` mode requests go over
HTTP (with bounded retry and backoff) and every response is appended to an
on-disk cache. In ``fixture`` mode responses come only from that cache and
the network is never touched, which makes reruns deterministic and testable
offline.
"""

from __future__ import annotations

import ipaddress
import json
import logging
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import requests

from .stats import _average_ranks

logger = logging.getLogger(__name__)

N_QUALITY_CLASSES = 6
DEFAULT_DAMAGING_THRESHOLD = 0.5
DEFAULT_PROJECT_SCOPE = "sexology and sexuality"
DEFAULT_PARALLELISM = 4

_MONTH_RE = re.compile(r"^\d{4}-(0[1-9]|1[0-2])$")


class EnrichmentError(RuntimeError):
    """Raised for unusable client configuration."""


class TransportError(RuntimeError):
    """Raised when a live request fails after all retries."""


# --------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class QualityScore:
    """Distribution over six ordered quality classes plus its expected index."""

    revision_id: int
    class_probabilities: tuple[float, ...]
    scalar: float = field(init=False)

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.class_probabilities)
        if len(probs) != N_QUALITY_CLASSES:
            raise ValueError(
                f"expected {N_QUALITY_CLASSES} class probabilities, got {len(probs)}"
            )
        if any(p < 0.0 or p > 1.0 for p in probs):
            raise ValueError(f"probabilities outside [0, 1]: {probs}")
        total = sum(probs)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "class_probabilities", probs)
        object.__setattr__(self, "scalar", sum(i * p for i, p in enumerate(probs)))


@dataclass(frozen=True)
class DamagingScore:
    revision_id: int
    probability: float
    is_damaging: bool

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability outside [0, 1]: {self.probability}")


@dataclass(frozen=True)
class ContributorProfile:
    name: str
    has_user_page: bool
    gender_specified: bool
    gender_value: str | None
    emailable: bool
    ever_edited_taboo: bool
    snapshot: str | None = None

    def __post_init__(self) -> None:
        if self.gender_specified != (self.gender_value is not None):
            raise ValueError("gender_value must be present exactly when specified")
        if self.gender_value is not None and self.gender_value not in ("female", "male"):
            raise ValueError(f"unsupported gender value: {self.gender_value!r}")


@dataclass(frozen=True)
class ArticleCategories:
    title: str
    categories: frozenset[str]
    in_scope: bool


@dataclass(frozen=True)
class MonthlyViews:
    page_id: int | str
    month: str
    views: int

    def __post_init__(self) -> None:
        if not _MONTH_RE.match(self.month):
            raise ValueError(f"month must be YYYY-MM, got {self.month!r}")
        if self.views < 0:
            raise ValueError(f"views must be non-negative, got {self.views}")


# --------------------------------------------------------------------------
# cache and transports


class ResponseCache:
    """Append-only key -> JSON response store, one record per line."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, object] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as handle:
                for line_no, line in enumerate(handle, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        record = json.loads(line)
                        key = record["key"]
                        response = record["response"]
                    except (json.JSONDecodeError, KeyError, TypeError) as exc:
                        raise ValueError(
                            f"{self.path}:{line_no}: bad cache record: {exc}"
                        ) from exc
                    self._entries[key] = response

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> object | None:
        return self._entries.get(key)

    def put(self, key: str, response: object) -> None:
        line = json.dumps({"key": key, "response": response}, sort_keys=True)
        with self._lock:
            self._entries[key] = response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")


class Transport(Protocol):
    def request(self, url: str, params: Mapping[str, object]) -> object: ...


class HttpTransport:
    """GET a JSON document, retrying transient failures with backoff."""

    def __init__(
        self,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff_seconds: float = 0.5,
        min_request_interval: float = 0.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_seconds = backoff_seconds
        self.min_request_interval = min_request_interval
        self._sleep = sleep
        self._lock = threading.Lock()
        self._last_request = float("-inf")

    def _throttle(self) -> None:
        if self.min_request_interval <= 0.0:
            return
        with self._lock:
            now = time.monotonic()
            wait = self._last_request + self.min_request_interval - now
            if wait > 0.0:
                self._sleep(wait)
            self._last_request = time.monotonic()

    def request(self, url: str, params: Mapping[str, object]) -> object:
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            self._throttle()
            try:
                response = requests.get(url, params=dict(params), timeout=self.timeout)
                response.raise_for_status()
            except requests.RequestException as exc:
                last_error = exc
                if attempt < self.max_retries:
                    self._sleep(self.backoff_seconds * (2.0**attempt))
                continue
            try:
                return response.json()
            except ValueError as exc:
                raise TransportError(f"{url}: response is not JSON: {exc}") from exc
        raise TransportError(
            f"{url}: failed after {self.max_retries + 1} attempts: {last_error}"
        )


class EnrichmentClient:
    """Keyed batch fetcher with live and fixture modes.

    Cache keys are ``{kind}:{identifier}``. In fixture mode a missing key is
    reported as unavailable and the transport is never consulted.
    """

    MODES = ("live", "fixture")

    def __init__(
        self,
        mode: str,
        cache: ResponseCache | None = None,
        endpoints: Mapping[str, str] | None = None,
        transport: Transport | None = None,
        parallelism: int = DEFAULT_PARALLELISM,
    ):
        if mode not in self.MODES:
            raise EnrichmentError(f"mode must be one of {self.MODES}, got {mode!r}")
        if mode == "fixture" and cache is None:
            raise EnrichmentError("fixture mode requires a response cache")
        if parallelism < 1:
            raise EnrichmentError(f"parallelism must be >= 1, got {parallelism}")
        self.mode = mode
        self.cache = cache
        self.endpoints = dict(endpoints or {})
        self.transport = transport
        self.parallelism = parallelism

    def _endpoint(self, kind: str) -> str:
        try:
            return self.endpoints[kind]
        except KeyError:
            raise EnrichmentError(f"no endpoint configured for {kind!r}") from None

    def _get_transport(self) -> Transport:
        if self.transport is None:
            self.transport = HttpTransport()
        return self.transport

    def fetch_many(
        self, kind: str, items: Sequence[tuple[str, Mapping[str, object]]]
    ) -> tuple[dict[str, object], list[str]]:
        """Resolve (identifier, params) pairs to responses.

        Returns responses keyed by identifier plus one message per
        identifier that could not be resolved, in input order.
        """
        responses: dict[str, object] = {}
        missing: list[tuple[str, Mapping[str, object]]] = []
        for identifier, params in items:
            key = f"{kind}:{identifier}"
            if self.cache is not None and key in self.cache:
                responses[identifier] = self.cache.get(key)
            else:
                missing.append((identifier, params))

        errors: list[str] = []
        if not missing:
            return responses, errors
        if self.mode == "fixture":
            for identifier, _ in missing:
                message = f"{kind} {identifier}: not in fixture cache"
                logger.warning(message)
                errors.append(message)
            return responses, errors

        url = self._endpoint(kind)
        transport = self._get_transport()

        def fetch(item: tuple[str, Mapping[str, object]]):
            identifier, params = item
            try:
                return identifier, transport.request(url, params), None
            except TransportError as exc:
                return identifier, None, str(exc)

        if len(missing) > 1 and self.parallelism > 1:
            workers = min(self.parallelism, len(missing))
            with ThreadPoolExecutor(max_workers=workers) as executor:
                outcomes = list(executor.map(fetch, missing))
        else:
            outcomes = [fetch(item) for item in missing]

        for identifier, response, error in outcomes:
            if error is not None:
                message = f"{kind} {identifier}: {error}"
                logger.warning(message)
                errors.append(message)
                continue
            responses[identifier] = response
            if self.cache is not None:
                self.cache.put(f"{kind}:{identifier}", response)
        return responses, errors


# --------------------------------------------------------------------------
# scoring operations


def score_quality(
    revision_ids: Sequence[int], client: EnrichmentClient
) -> tuple[dict[int, QualityScore], list[str]]:
    """Score revisions on the six-class quality scale.

    Every requested id is either scored or named in the returned
    unavailable list, never silently dropped.
    """
    items = [(str(rid), {"revision_id": rid}) for rid in revision_ids]
    responses, errors = client.fetch_many("quality", items)
    scores: dict[int, QualityScore] = {}
    for rid in revision_ids:
        response = responses.get(str(rid))
        if response is None:
            continue
        try:
            probabilities = response["probabilities"]
            scores[rid] = QualityScore(rid, tuple(probabilities))
        except (KeyError, TypeError, ValueError) as exc:
            message = f"quality {rid}: malformed response: {exc}"
            logger.warning(message)
            errors.append(message)
    return scores, errors


def score_damaging(
    revision_ids: Sequence[int],
    client: EnrichmentClient,
    threshold: float = DEFAULT_DAMAGING_THRESHOLD,
) -> tuple[dict[int, DamagingScore], list[str]]:
    """Flag revisions whose damaging probability is >= threshold."""
    items = [(str(rid), {"revision_id": rid}) for rid in revision_ids]
    responses, errors = client.fetch_many("damaging", items)
    scores: dict[int, DamagingScore] = {}
    for rid in revision_ids:
        response = responses.get(str(rid))
        if response is None:
            continue
        try:
            probability = float(response["probability"])
            scores[rid] = DamagingScore(rid, probability, probability >= threshold)
        except (KeyError, TypeError, ValueError) as exc:
            message = f"damaging {rid}: malformed response: {exc}"
            logger.warning(message)
            errors.append(message)
    return scores, errors


def _all_false_profile(name: str, snapshot: str | None) -> ContributorProfile:
    return ContributorProfile(
        name=name,
        has_user_page=False,
        gender_specified=False,
        gender_value=None,
        emailable=False,
        ever_edited_taboo=False,
        snapshot=snapshot,
    )


def fetch_user_attributes(
    names: Sequence[str],
    client: EnrichmentClient,
    user_page_created: Mapping[str, datetime],
    last_contribution: Mapping[str, datetime],
    taboo_editors: frozenset[str] | set[str],
    snapshot: str | None = None,
) -> tuple[dict[str, ContributorProfile], list[str]]:
    """Build contributor profiles for accountholders.

    Gender and emailability come from the remote service; user-page
    existence is derived from dump history (the user page was created no
    later than the contributor's last contribution). Anonymous contributors
    must never reach this function.
    """
    deduped: list[str] = []
    seen: set[str] = set()
    for name in names:
        if name in seen:
            continue
        seen.add(name)
        deduped.append(name)
        try:
            ipaddress.ip_address(name)
        except ValueError:
            continue
        raise ValueError(f"anonymous contributor passed to profile fetch: {name!r}")

    items = [(name, {"name": name}) for name in deduped]
    responses, errors = client.fetch_many("user", items)
    profiles: dict[str, ContributorProfile] = {}
    for name in deduped:
        response = responses.get(name)
        if response is None:
            profiles[name] = _all_false_profile(name, snapshot)
            continue
        try:
            missing = bool(response.get("missing", False))
            if missing:
                errors.append(f"user {name}: account missing or suppressed")
                profiles[name] = _all_false_profile(name, snapshot)
                continue
            gender = response.get("gender")
            specified = gender in ("female", "male")
            created = user_page_created.get(name)
            last = last_contribution.get(name)
            profiles[name] = ContributorProfile(
                name=name,
                has_user_page=(
                    created is not None and last is not None and created <= last
                ),
                gender_specified=specified,
                gender_value=gender if specified else None,
                emailable=bool(response.get("emailable", False)),
                ever_edited_taboo=name in taboo_editors,
                snapshot=snapshot,
            )
        except (TypeError, ValueError, AttributeError) as exc:
            message = f"user {name}: malformed response: {exc}"
            logger.warning(message)
            errors.append(message)
            profiles[name] = _all_false_profile(name, snapshot)
    return profiles, errors


def fetch_categories(
    titles: Sequence[str],
    client: EnrichmentClient,
    project_scope: str = DEFAULT_PROJECT_SCOPE,
) -> tuple[dict[str, ArticleCategories], list[str]]:
    """Union article and talk-page categories; flag the configured project."""
    marker = project_scope.lower()
    items = [(title, {"title": title}) for title in titles]
    responses, errors = client.fetch_many("categories", items)
    results: dict[str, ArticleCategories] = {}
    for title in titles:
        response = responses.get(title)
        if response is None:
            continue
        try:
            categories = frozenset(response.get("article", [])) | frozenset(
                response.get("talk", [])
            )
            in_scope = any(marker in category.lower() for category in categories)
            results[title] = ArticleCategories(title, categories, in_scope)
        except (TypeError, AttributeError) as exc:
            message = f"categories {title}: malformed response: {exc}"
            logger.warning(message)
            errors.append(message)
    return results, errors


# --------------------------------------------------------------------------
# view ranking


def read_pageviews_tsv(path: str | Path) -> list[MonthlyViews]:
    """Read tab-separated (page_id or title, YYYY-MM, views) records."""
    records: list[MonthlyViews] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{line_no}: expected 3 columns, got {len(parts)}")
            raw_page, month, raw_views = parts
            page: int | str = int(raw_page) if raw_page.isdigit() else raw_page
            try:
                records.append(MonthlyViews(page, month, int(raw_views)))
            except ValueError as exc:
                raise ValueError(f"{path}:{line_no}: {exc}") from exc
    return records


def rank_views(
    records: Iterable[MonthlyViews],
    article_ids: Iterable[int | str] | None = None,
) -> tuple[dict[int | str, float], list[str]]:
    """Mean within-month view rank per article (rank 1 = most viewed).

    Within each month every article with a record is ranked by views
    descending, ties sharing the average rank. An article's output is the
    mean of its ranks over the months where it has a record; articles from
    `article_ids` with no records at all are excluded and reported.
    """
    by_month: dict[str, list[MonthlyViews]] = {}
    seen_pairs: set[tuple[int | str, str]] = set()
    for record in records:
        pair = (record.page_id, record.month)
        if pair in seen_pairs:
            raise ValueError(f"duplicate record for page {record.page_id} in {record.month}")
        seen_pairs.add(pair)
        by_month.setdefault(record.month, []).append(record)

    rank_sums: dict[int | str, float] = {}
    rank_counts: dict[int | str, int] = {}
    for month in sorted(by_month):
        month_records = by_month[month]
        ranks = _average_ranks([-float(r.views) for r in month_records])
        for record, rank in zip(month_records, ranks):
            rank_sums[record.page_id] = rank_sums.get(record.page_id, 0.0) + rank
            rank_counts[record.page_id] = rank_counts.get(record.page_id, 0) + 1

    means = {page: rank_sums[page] / rank_counts[page] for page in rank_sums}
    warnings: list[str] = []
    if article_ids is not None:
        for page in article_ids:
            if page not in means:
                message = f"article {page}: zero months of view data, excluded from ranking"
                logger.warning(message)
                warnings.append(message)
    return means, warnings


# --------------------------------------------------------------------------
# monthly quality series


def _month_key(moment: datetime) -> int:
    return moment.year * 12 + (moment.month - 1)


def _month_label(key: int) -> str:
    return f"{key // 12:04d}-{key % 12 + 1:02d}"


def monthly_quality_series(
    revisions: Sequence,
    quality: Mapping[int, float],
    horizon: datetime,
) -> list[tuple[str, float]]:
    """Month-end quality state per month, carried forward to the horizon.

    ``quality`` maps revision ids to quality scalars. A month's state is the
    scalar of the latest scored revision made before the next month begins.
    Months before the first scored revision produce no entry; unscored
    revisions never change the state.
    """
    scored = [
        (revision.timestamp, revision.revision_id, quality[revision.revision_id])
        for revision in revisions
        if revision.revision_id in quality
    ]
    if not scored:
        return []
    scored.sort(key=lambda item: (item[0], item[1]))
    start = _month_key(scored[0][0])
    end = _month_key(horizon)
    if end < start:
        return []
    series: list[tuple[str, float]] = []
    pointer = 0
    state = scored[0][2]
    for key in range(start, end + 1):
        while pointer < len(scored) and _month_key(scored[pointer][0]) <= key:
            state = scored[pointer][2]
            pointer += 1
        series.append((_month_label(key), state))
    return series


def mean_of_series(series: Sequence[tuple[str, float]]) -> float | None:
    if not series:
        return None
    return sum(value for _, value in series) / len(series)
