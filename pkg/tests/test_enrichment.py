import http.server
import json
import random
import threading
from datetime import datetime, timezone

import pytest

from tabooscope.enrichment import (
    ArticleCategories,
    ContributorProfile,
    DamagingScore,
    EnrichmentClient,
    EnrichmentError,
    HttpTransport,
    MonthlyViews,
    QualityScore,
    ResponseCache,
    TransportError,
    fetch_categories,
    fetch_user_attributes,
    mean_of_series,
    monthly_quality_series,
    rank_views,
    read_pageviews_tsv,
    score_damaging,
    score_quality,
)
from tabooscope.revisions import RevisionRecord, classify_contributor

UTC = timezone.utc


class FailingTransport:
    """Transport that proves the network is never touched."""

    def __init__(self):
        self.calls = 0

    def request(self, url, params):
        self.calls += 1
        raise AssertionError("network contact in fixture mode")


def quality_response(probabilities):
    return {"probabilities": list(probabilities)}


def seeded_cache(tmp_path, entries):
    cache = ResponseCache(tmp_path / "cache.jsonl")
    for key, response in entries.items():
        cache.put(key, response)
    return cache


# -------------------------------------------------------------------- scores

def test_quality_scalar_degenerate_lowest_class():
    score = QualityScore(1, (1.0, 0, 0, 0, 0, 0))
    assert score.scalar == 0.0


def test_quality_scalar_uniform_distribution():
    score = QualityScore(1, (1 / 6,) * 6)
    assert score.scalar == pytest.approx(2.5)


def test_quality_scalar_degenerate_highest_class():
    assert QualityScore(1, (0, 0, 0, 0, 0, 1.0)).scalar == 5.0


def test_quality_rejects_bad_distributions():
    with pytest.raises(ValueError):
        QualityScore(1, (0.5, 0.5, 0.5, 0, 0, 0))
    with pytest.raises(ValueError):
        QualityScore(1, (1.0, 0, 0, 0, 0))
    with pytest.raises(ValueError):
        QualityScore(1, (1.2, -0.2, 0, 0, 0, 0))


def test_quality_scalar_monotone_under_upward_mass_shift():
    rng = random.Random(42)
    for _ in range(200):
        raw = [rng.random() for _ in range(6)]
        total = sum(raw)
        probs = [p / total for p in raw]
        low = rng.randrange(5)
        high = rng.randrange(low + 1, 6)
        epsilon = probs[low] * rng.random()
        shifted = list(probs)
        shifted[low] -= epsilon
        shifted[high] += epsilon
        base = QualityScore(1, tuple(probs)).scalar
        moved = QualityScore(1, tuple(shifted)).scalar
        assert moved >= base - 1e-12


def test_damaging_flag_boundary():
    assert not DamagingScore(1, 0.0, False).is_damaging
    with pytest.raises(ValueError):
        DamagingScore(1, 1.5, True)


# --------------------------------------------------------------------- cache

def test_response_cache_roundtrip_and_persistence(tmp_path):
    path = tmp_path / "cache.jsonl"
    cache = ResponseCache(path)
    assert "quality:1" not in cache
    cache.put("quality:1", quality_response([1, 0, 0, 0, 0, 0]))
    assert cache.get("quality:1") == {"probabilities": [1, 0, 0, 0, 0, 0]}
    reloaded = ResponseCache(path)
    assert len(reloaded) == 1
    assert reloaded.get("quality:1") == cache.get("quality:1")


def test_response_cache_rejects_malformed_lines(tmp_path):
    path = tmp_path / "cache.jsonl"
    path.write_text('{"key": "a", "response": 1}\nnot json\n')
    with pytest.raises(ValueError):
        ResponseCache(path)


# ------------------------------------------------------------------- clients

def test_fixture_mode_requires_cache():
    with pytest.raises(EnrichmentError):
        EnrichmentClient(mode="fixture", cache=None)
    with pytest.raises(EnrichmentError):
        EnrichmentClient(mode="replay", cache=None)


def test_fixture_mode_never_touches_network(tmp_path):
    transport = FailingTransport()
    cache = seeded_cache(tmp_path, {"quality:10": quality_response([0, 0, 0, 0, 0, 1])})
    client = EnrichmentClient(mode="fixture", cache=cache, transport=transport)
    scores, errors = score_quality([10, 11], client)
    assert transport.calls == 0
    assert scores[10].scalar == 5.0
    assert errors == ["quality 11: not in fixture cache"]


def test_score_quality_flags_malformed_responses(tmp_path):
    cache = seeded_cache(
        tmp_path,
        {
            "quality:1": quality_response([0.9, 0.2, 0, 0, 0, 0]),
            "quality:2": {"wrong_key": []},
            "quality:3": quality_response([0.5, 0.5, 0, 0, 0, 0]),
        },
    )
    client = EnrichmentClient(mode="fixture", cache=cache)
    scores, errors = score_quality([1, 2, 3], client)
    assert set(scores) == {3}
    assert len(errors) == 2
    assert all("malformed" in e for e in errors)


def test_score_damaging_threshold_rule(tmp_path):
    cache = seeded_cache(
        tmp_path,
        {
            "damaging:1": {"probability": 0.0},
            "damaging:2": {"probability": 0.5},
            "damaging:3": {"probability": 0.49},
        },
    )
    client = EnrichmentClient(mode="fixture", cache=cache)
    scores, errors = score_damaging([1, 2, 3], client)
    assert errors == []
    assert not scores[1].is_damaging
    assert scores[2].is_damaging  # probability equal to threshold counts
    assert not scores[3].is_damaging
    strict, _ = score_damaging([3], client, threshold=0.4)
    assert strict[3].is_damaging


# ------------------------------------------------------------------ profiles

def ts(day):
    return datetime(2010, 1, day, tzinfo=UTC)


def test_fetch_user_attributes_populates_profiles(tmp_path):
    cache = seeded_cache(
        tmp_path,
        {
            "user:Alice": {"gender": "female", "emailable": True},
            "user:Bob": {"gender": "unknown", "emailable": False},
            "user:Gone": {"missing": True},
        },
    )
    client = EnrichmentClient(mode="fixture", cache=cache)
    profiles, errors = fetch_user_attributes(
        ["Alice", "Bob", "Alice", "Gone"],
        client,
        user_page_created={"Alice": ts(1), "Bob": ts(20)},
        last_contribution={"Alice": ts(5), "Bob": ts(5)},
        taboo_editors={"Alice"},
        snapshot="2010-06",
    )
    assert profiles["Alice"].gender_specified and profiles["Alice"].gender_value == "female"
    assert profiles["Alice"].emailable and profiles["Alice"].ever_edited_taboo
    assert profiles["Alice"].has_user_page  # created day 1 <= last contribution day 5
    assert profiles["Alice"].snapshot == "2010-06"
    assert not profiles["Bob"].gender_specified and profiles["Bob"].gender_value is None
    assert not profiles["Bob"].has_user_page  # page created after last contribution
    gone = profiles["Gone"]
    assert not (gone.has_user_page or gone.gender_specified or gone.emailable
                or gone.ever_edited_taboo)
    assert any("missing or suppressed" in e for e in errors)


def test_fetch_user_attributes_rejects_anonymous_names(tmp_path):
    cache = seeded_cache(tmp_path, {})
    client = EnrichmentClient(mode="fixture", cache=cache)
    with pytest.raises(ValueError):
        fetch_user_attributes(["203.0.113.9"], client, {}, {}, set())


def test_contributor_profile_gender_invariant():
    with pytest.raises(ValueError):
        ContributorProfile("x", False, True, None, False, False)
    with pytest.raises(ValueError):
        ContributorProfile("x", False, True, "other", False, False)


# ---------------------------------------------------------------- categories

def test_fetch_categories_unions_article_and_talk(tmp_path):
    cache = seeded_cache(
        tmp_path,
        {
            "categories:Hell": {
                "article": ["Religious cosmology"],
                "talk": ["WikiProject Sexology and sexuality articles"],
            },
            "categories:Tea": {"article": [], "talk": []},
        },
    )
    client = EnrichmentClient(mode="fixture", cache=cache)
    results, errors = fetch_categories(["Hell", "Tea"], client)
    assert errors == []
    assert results["Hell"].in_scope  # marker found on the talk page
    assert "Religious cosmology" in results["Hell"].categories
    assert results["Tea"] == ArticleCategories("Tea", frozenset(), False)


def test_fetch_categories_custom_scope_marker(tmp_path):
    cache = seeded_cache(
        tmp_path, {"categories:Tea": {"article": ["Herbal infusions"], "talk": []}}
    )
    client = EnrichmentClient(mode="fixture", cache=cache)
    results, _ = fetch_categories(["Tea"], client, project_scope="herbal")
    assert results["Tea"].in_scope


# --------------------------------------------------------------------- views

def test_rank_views_single_article_single_month():
    means, warnings = rank_views([MonthlyViews(1, "2010-01", 7)])
    assert means == {1: 1.0}
    assert warnings == []


def test_rank_views_hand_ranked_two_months():
    records = [
        MonthlyViews(1, "2010-01", 10), MonthlyViews(2, "2010-01", 5),
        MonthlyViews(1, "2010-02", 1), MonthlyViews(2, "2010-02", 2),
    ]
    means, _ = rank_views(records)
    assert means == {1: pytest.approx(1.5), 2: pytest.approx(1.5)}


def test_rank_views_ties_share_average_rank():
    records = [MonthlyViews(p, "2010-01", v) for p, v in ((1, 9), (2, 4), (3, 4), (4, 1))]
    means, _ = rank_views(records)
    assert means == {1: 1.0, 2: 2.5, 3: 2.5, 4: 4.0}
    # assigned ranks sum to 1 + 2 + 3 + 4 regardless of ties
    assert sum(means.values()) == pytest.approx(10.0)


def test_rank_views_order_independent():
    rng = random.Random(3)
    records = [
        MonthlyViews(p, f"2010-{m:02d}", rng.randrange(100))
        for p in range(1, 6)
        for m in range(1, 7)
    ]
    baseline, _ = rank_views(records)
    shuffled = list(records)
    rng.shuffle(shuffled)
    assert rank_views(shuffled)[0] == baseline


def test_rank_views_excludes_articles_with_no_data():
    means, warnings = rank_views([MonthlyViews(1, "2010-01", 7)], article_ids=[1, 2])
    assert 2 not in means
    assert len(warnings) == 1 and "zero months" in warnings[0]


def test_rank_views_rejects_duplicate_page_month():
    records = [MonthlyViews(1, "2010-01", 7), MonthlyViews(1, "2010-01", 9)]
    with pytest.raises(ValueError):
        rank_views(records)


def test_monthly_views_validation():
    with pytest.raises(ValueError):
        MonthlyViews(1, "2010-13", 5)
    with pytest.raises(ValueError):
        MonthlyViews(1, "2010-01", -1)


def test_read_pageviews_tsv(tmp_path):
    path = tmp_path / "views.tsv"
    path.write_text("# page\tmonth\tviews\n12\t2010-01\t100\nHell\t2010-02\t3\n")
    records = read_pageviews_tsv(path)
    assert records == [MonthlyViews(12, "2010-01", 100), MonthlyViews("Hell", "2010-02", 3)]
    bad = tmp_path / "bad.tsv"
    bad.write_text("12\t2010-01\n")
    with pytest.raises(ValueError):
        read_pageviews_tsv(bad)


# ------------------------------------------------------------ quality series

def make_revision(rev_id, year, month, day):
    return RevisionRecord(
        page_id=1,
        revision_id=rev_id,
        timestamp=datetime(year, month, day, tzinfo=UTC),
        contributor=classify_contributor("Alice"),
        checksum=str(rev_id),
    )


def test_monthly_quality_series_carries_state_forward():
    revisions = [
        make_revision(1, 2010, 1, 15),
        make_revision(2, 2010, 3, 10),
    ]
    quality = {
        1: QualityScore(1, (1, 0, 0, 0, 0, 0)).scalar,
        2: QualityScore(2, (0, 0, 1, 0, 0, 0)).scalar,
    }
    horizon = datetime(2010, 5, 1, tzinfo=UTC)
    series = monthly_quality_series(revisions, quality, horizon)
    assert series == [
        ("2010-01", 0.0),
        ("2010-02", 0.0),
        ("2010-03", 2.0),
        ("2010-04", 2.0),
        ("2010-05", 2.0),
    ]
    assert mean_of_series(series) == pytest.approx(1.2)


def test_monthly_quality_series_skips_unscored_revisions():
    revisions = [make_revision(1, 2010, 1, 1), make_revision(2, 2010, 2, 1)]
    quality = {1: QualityScore(1, (0, 1, 0, 0, 0, 0)).scalar}
    series = monthly_quality_series(revisions, quality, datetime(2010, 2, 28, tzinfo=UTC))
    assert series == [("2010-01", 1.0), ("2010-02", 1.0)]
    assert monthly_quality_series(revisions, {}, datetime(2010, 2, 1, tzinfo=UTC)) == []
    assert mean_of_series([]) is None


def test_monthly_quality_series_uses_latest_revision_within_month():
    revisions = [make_revision(1, 2010, 1, 5), make_revision(2, 2010, 1, 25)]
    quality = {
        1: QualityScore(1, (0, 1, 0, 0, 0, 0)).scalar,
        2: QualityScore(2, (0, 0, 0, 0, 0, 1)).scalar,
    }
    series = monthly_quality_series(revisions, quality, datetime(2010, 1, 31, tzinfo=UTC))
    assert series == [("2010-01", 5.0)]


# ----------------------------------------------------------------- live mode

class _Handler(http.server.BaseHTTPRequestHandler):
    failures_remaining = 1

    def do_GET(self):
        cls = type(self)
        if cls.failures_remaining > 0:
            cls.failures_remaining -= 1
            self.send_response(500)
            self.end_headers()
            return
        body = json.dumps({"probabilities": [0, 0, 0, 0, 0, 1]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def local_server():
    _Handler.failures_remaining = 1
    server = http.server.HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}/scores"
    finally:
        server.shutdown()
        thread.join()


def test_live_mode_retries_then_caches(tmp_path, local_server):
    cache = ResponseCache(tmp_path / "cache.jsonl")
    transport = HttpTransport(max_retries=2, backoff_seconds=0.0, sleep=lambda s: None)
    client = EnrichmentClient(
        mode="live",
        cache=cache,
        endpoints={"quality": local_server},
        transport=transport,
        parallelism=1,
    )
    scores, errors = score_quality([99], client)
    assert errors == []
    assert scores[99].scalar == 5.0
    assert "quality:99" in cache

    # the recorded response now serves fixture mode with no network at all
    replay = EnrichmentClient(
        mode="fixture",
        cache=ResponseCache(tmp_path / "cache.jsonl"),
        transport=FailingTransport(),
    )
    replay_scores, replay_errors = score_quality([99], replay)
    assert replay_errors == []
    assert replay_scores[99].scalar == 5.0


def test_live_mode_failure_marks_unavailable(tmp_path):
    class AlwaysDown:
        def request(self, url, params):
            raise TransportError("connection refused")

    client = EnrichmentClient(
        mode="live",
        cache=ResponseCache(tmp_path / "cache.jsonl"),
        endpoints={"quality": "http://unreachable.invalid/scores"},
        transport=AlwaysDown(),
    )
    scores, errors = score_quality([1], client)
    assert scores == {}
    assert len(errors) == 1 and "connection refused" in errors[0]


def test_live_mode_requires_endpoint(tmp_path):
    client = EnrichmentClient(mode="live", cache=ResponseCache(tmp_path / "c.jsonl"))
    with pytest.raises(EnrichmentError):
        client.fetch_many("quality", [("1", {"revision_id": 1})])
