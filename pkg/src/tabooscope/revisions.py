"""Revision-history analytics.

Reads full-history XML dumps (or the line-delimited fixture format), filters
bot accounts, detects identity reverts inside a bounded forward window,
numbers every contributor's revisions globally to measure experience, turns
protection log events into spells, and aggregates everything per article.
"""

import bz2
import hashlib
import ipaddress
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum


class ContributorKind(Enum):
    ACCOUNT = "account"
    ANONYMOUS = "anonymous"


@dataclass(frozen=True)
class Contributor:
    kind: ContributorKind
    name: str  # account name or IP address; empty when deleted
    deleted: bool = False  # suppressed in the dump; treated as anonymous

    @property
    def has_account(self) -> bool:
        return self.kind is ContributorKind.ACCOUNT


@dataclass
class RevisionRecord:
    page_id: int
    revision_id: int
    timestamp: datetime
    contributor: Contributor
    checksum: str
    is_reverted: bool = False
    is_damaging: bool | None = None
    editor_nth_edit: int = 0  # assigned by compute_experience; >= 1 afterwards


@dataclass(frozen=True)
class ProtectionEvent:
    timestamp: datetime
    page_id: int
    action: str  # protect | modify | unprotect
    level: str


@dataclass(frozen=True)
class ProtectionSpell:
    page_id: int
    start: datetime
    end: datetime  # open spells are closed at the horizon
    level: str


def parse_timestamp(text: str) -> datetime:
    """ISO-8601 instant; a trailing Z means UTC. Naive values are UTC."""
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    stamp = datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc)


def classify_contributor(raw: str) -> Contributor:
    """An IP-shaped contributor is anonymous, an empty one was deleted from
    the dump (treated as anonymous and flagged), anything else is an account."""
    raw = raw.strip()
    if not raw:
        return Contributor(ContributorKind.ANONYMOUS, "", deleted=True)
    try:
        ipaddress.ip_address(raw)
    except ValueError:
        return Contributor(ContributorKind.ACCOUNT, raw)
    return Contributor(ContributorKind.ANONYMOUS, raw)


def read_revisions_tsv(path) -> list[RevisionRecord]:
    """Fixture format: page_id, revision_id, timestamp, contributor, checksum.

    The contributor column holds an account name, an IP address, or nothing
    (deleted). Records are returned in file order.
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise ValueError(f"{path}:{line_no}: expected 5 columns, got {len(parts)}")
            page_id, revision_id, stamp, contributor, checksum = parts
            records.append(
                RevisionRecord(
                    page_id=int(page_id),
                    revision_id=int(revision_id),
                    timestamp=parse_timestamp(stamp),
                    contributor=classify_contributor(contributor),
                    checksum=checksum,
                )
            )
    return records


def _localname(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def iter_revisions_xml(path):
    """Stream RevisionRecords from a full-history XML dump (PAGES ns 0 only).

    The dump-provided sha1 is used as the checksum when present, otherwise
    the sha1 of the revision text is computed. Elements are cleared as pages
    complete so memory stays flat.
    """
    opener = bz2.open if str(path).endswith(".bz2") else open
    with opener(path, "rb") as fh:
        page_id = None
        page_ns = 0
        pending: list[RevisionRecord] = []
        for event, elem in ET.iterparse(fh, events=("end",)):
            name = _localname(elem.tag)
            if name == "page":
                if page_ns == 0:
                    yield from pending
                pending = []
                page_id = None
                page_ns = 0
                elem.clear()
            elif name == "revision":
                if page_id is None:
                    # <id> of the page appears before any <revision>
                    parent_id = None
                else:
                    parent_id = page_id
                rev_id = None
                stamp = None
                contributor = Contributor(ContributorKind.ANONYMOUS, "", deleted=True)
                sha1 = None
                text = ""
                for child in elem:
                    cname = _localname(child.tag)
                    if cname == "id":
                        rev_id = int(child.text)
                    elif cname == "timestamp":
                        stamp = parse_timestamp(child.text)
                    elif cname == "sha1":
                        sha1 = (child.text or "").strip() or None
                    elif cname == "text":
                        text = child.text or ""
                    elif cname == "contributor":
                        if child.get("deleted"):
                            contributor = Contributor(
                                ContributorKind.ANONYMOUS, "", deleted=True
                            )
                        else:
                            username = None
                            ip = None
                            for sub in child:
                                sname = _localname(sub.tag)
                                if sname == "username":
                                    username = sub.text or ""
                                elif sname == "ip":
                                    ip = sub.text or ""
                            if username is not None:
                                contributor = Contributor(ContributorKind.ACCOUNT, username)
                            elif ip is not None:
                                contributor = classify_contributor(ip)
                if rev_id is None or stamp is None or parent_id is None:
                    elem.clear()
                    continue
                checksum = sha1 or hashlib.sha1(text.encode("utf-8")).hexdigest()
                pending.append(
                    RevisionRecord(
                        page_id=parent_id,
                        revision_id=rev_id,
                        timestamp=stamp,
                        contributor=contributor,
                        checksum=checksum,
                    )
                )
                elem.clear()
            elif name == "ns":
                page_ns = int(elem.text or 0)
            elif name == "id" and page_id is None:
                page_id = int(elem.text)
            elif name == "title":
                pass
        if page_ns == 0:
            yield from pending


def extract_page_metadata_xml(path):
    """(page_id, title, redirect target or None, ns) tuples from a dump."""
    opener = bz2.open if str(path).endswith(".bz2") else open
    with opener(path, "rb") as fh:
        page_id = None
        title = None
        redirect = None
        ns = 0
        for event, elem in ET.iterparse(fh, events=("end",)):
            name = _localname(elem.tag)
            if name == "title":
                if title is None:
                    title = elem.text or ""
            elif name == "ns":
                ns = int(elem.text or 0)
            elif name == "id" and page_id is None:
                page_id = int(elem.text)
            elif name == "redirect":
                redirect = elem.get("title")
            elif name == "page":
                if page_id is not None and title is not None:
                    yield page_id, title, redirect, ns
                page_id = None
                title = None
                redirect = None
                ns = 0
                elem.clear()


def load_bot_names(paths) -> frozenset[str]:
    """Union the configured bot lists (one name per line, # comments).

    A missing file raises OSError: silently analyzing with partial bot
    knowledge would contaminate every contributor-level measure.
    """
    names: set[str] = set()
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line and not line.startswith("#"):
                    names.add(line)
    return frozenset(names)


def filter_bots(revisions, bot_names: frozenset[str]) -> list[RevisionRecord]:
    """Drop revisions whose contributor name is a known bot."""
    return [r for r in revisions if r.contributor.name not in bot_names]


def sort_revisions(revisions) -> list[RevisionRecord]:
    """Page history order: (timestamp, revision_id) breaks timestamp ties."""
    return sorted(revisions, key=lambda r: (r.timestamp, r.revision_id))


def detect_reverts(page_revisions, window: int = 10) -> None:
    """Mark identity-reverted revisions in one page's ordered history.

    Revision r is reverted iff some revision j with r < j <= r + window has a
    checksum equal to that of some revision k < r: j restored a state that
    predates r, undoing r. The restoring revision j is not thereby marked.

    Single pass: a revision j whose checksum first occurred at f < j restores
    that earlier state, so it marks every r with f < r < j and j - r <= window.
    """
    n = len(page_revisions)
    first_seen: dict[str, int] = {}
    for j in range(n):
        checksum = page_revisions[j].checksum
        f = first_seen.setdefault(checksum, j)
        if f < j:
            for r in range(max(j - window, f + 1), j):
                page_revisions[r].is_reverted = True


def compute_experience(revisions) -> None:
    """Number each contributor's revisions 1..n in global time order.

    Identity is the (kind, name) pair, so an account and an IP can never
    collide. Deleted contributors have no identity to accumulate: each of
    their revisions counts as a first edit (and is excluded from experience
    means downstream).
    """
    counts: dict[tuple, int] = {}
    for rev in sort_revisions(revisions):
        if rev.contributor.deleted:
            rev.editor_nth_edit = 1
            continue
        key = (rev.contributor.kind, rev.contributor.name)
        counts[key] = counts.get(key, 0) + 1
        rev.editor_nth_edit = counts[key]


def read_protection_log(path) -> list[ProtectionEvent]:
    """TSV: timestamp, page_id, action, level."""
    events = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{line_no}: expected 4 columns, got {len(parts)}")
            stamp, page_id, action, level = parts
            if action not in ("protect", "modify", "unprotect"):
                raise ValueError(f"{path}:{line_no}: unknown action {action!r}")
            events.append(
                ProtectionEvent(parse_timestamp(stamp), int(page_id), action, level)
            )
    return events


def restricts_editing(level: str) -> bool:
    """A spell counts only if it restricts editing: an explicit ``edit=``
    term, or a bare level with no action prefix. Move-only protection does
    not limit who can contribute text."""
    parts = [p.strip() for p in level.replace(";", ",").split(",") if p.strip()]
    if not parts:
        return True  # protection event with no recorded level: assume edit
    for part in parts:
        if "=" in part:
            action, _, value = part.partition("=")
            if action.strip().lower() == "edit" and value.strip():
                return True
        else:
            return True
    return False


def build_protection_spells(events, horizon: datetime):
    """Pair protect events with the next unprotect; open spells run to the
    horizon. A modify (or a second protect) while a spell is open closes it
    and starts a new one at the new level. Returns (spells, warnings)."""
    spells: list[ProtectionSpell] = []
    warnings: list[str] = []
    open_by_page: dict[int, tuple[datetime, str]] = {}
    for event in sorted(events, key=lambda e: (e.timestamp, e.page_id)):
        open_spell = open_by_page.get(event.page_id)
        if event.action == "unprotect":
            if open_spell is None:
                warnings.append(
                    f"page {event.page_id}: unprotect at {event.timestamp.isoformat()} "
                    "without an open spell; ignored"
                )
                continue
            start, level = open_spell
            spells.append(ProtectionSpell(event.page_id, start, event.timestamp, level))
            del open_by_page[event.page_id]
        else:  # protect or modify
            if open_spell is not None:
                start, level = open_spell
                spells.append(ProtectionSpell(event.page_id, start, event.timestamp, level))
            open_by_page[event.page_id] = (event.timestamp, event.level)
    for page_id, (start, level) in sorted(open_by_page.items()):
        spells.append(ProtectionSpell(page_id, start, horizon, level))
    return spells, warnings


def protected_proportion(spells, cutoff: datetime, horizon: datetime) -> float:
    """Fraction of [cutoff, horizon] covered by edit-restricting spells.

    Overlapping spells are merged first, so duplicated log events cannot
    inflate the proportion.
    """
    if horizon <= cutoff:
        raise ValueError("horizon must be after the cutoff")
    intervals = []
    for spell in spells:
        if not restricts_editing(spell.level):
            continue
        start = max(spell.start, cutoff)
        end = min(spell.end, horizon)
        if start < end:
            intervals.append((start, end))
    if not intervals:
        return 0.0
    intervals.sort()
    covered = 0.0
    current_start, current_end = intervals[0]
    for start, end in intervals[1:]:
        if start <= current_end:
            current_end = max(current_end, end)
        else:
            covered += (current_end - current_start).total_seconds()
            current_start, current_end = start, end
    covered += (current_end - current_start).total_seconds()
    return covered / (horizon - cutoff).total_seconds()


@dataclass
class ArticleMetrics:
    """Per-article measures; rates derive from counts so they always agree."""

    page_id: int
    title: str
    sample: str
    n_contributions: int
    n_reverted: int
    n_damaging: int
    n_no_account: int
    protected_proportion: float
    mean_editor_experience: float | None
    mean_quality: float | None = None
    mean_view_rank: float | None = None

    @property
    def revert_rate(self) -> float:
        return self.n_reverted / self.n_contributions

    @property
    def damaging_rate(self) -> float:
        return self.n_damaging / self.n_contributions

    @property
    def share_no_account(self) -> float:
        return self.n_no_account / self.n_contributions


def aggregate_article_metrics(
    revisions,
    samples: dict[int, tuple[str, str]],  # page_id -> (title, sample label)
    protected: dict[int, float],
    window: int = 10,
):
    """Annotate revisions and aggregate them per sampled article.

    Takes bot-filtered revisions, keeps only sampled pages, sorts each page's
    history, detects reverts, numbers contributor experience globally, and
    returns (metrics list, per-page revision lists, exclusion log). Articles
    with zero human revisions are excluded with a logged reason.
    """
    by_page: dict[int, list[RevisionRecord]] = {}
    for rev in revisions:
        if rev.page_id in samples:
            by_page.setdefault(rev.page_id, []).append(rev)
    kept: dict[int, list[RevisionRecord]] = {}
    for page_id, page_revs in by_page.items():
        ordered = sort_revisions(page_revs)
        detect_reverts(ordered, window=window)
        kept[page_id] = ordered
    compute_experience([rev for revs in kept.values() for rev in revs])

    metrics = []
    excluded = []
    for page_id, (title, sample) in sorted(samples.items()):
        page_revs = kept.get(page_id, [])
        if not page_revs:
            excluded.append(f"page {page_id} ({title!r}): zero human revisions")
            continue
        experiences = [
            r.editor_nth_edit for r in page_revs if not r.contributor.deleted
        ]
        metrics.append(
            ArticleMetrics(
                page_id=page_id,
                title=title,
                sample=sample,
                n_contributions=len(page_revs),
                n_reverted=sum(1 for r in page_revs if r.is_reverted),
                n_damaging=sum(1 for r in page_revs if r.is_damaging),
                n_no_account=sum(1 for r in page_revs if not r.contributor.has_account),
                protected_proportion=protected.get(page_id, 0.0),
                mean_editor_experience=(
                    sum(experiences) / len(experiences) if experiences else None
                ),
            )
        )
    return metrics, kept, excluded
