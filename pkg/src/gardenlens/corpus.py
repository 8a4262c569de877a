"""Parsing and filtering of multi-source opinion dumps.

Each supported site exports line-delimited JSON with its own field
names. Per-source adapters normalize those into `Record`; fields the
adapter does not know about are preserved in ``extra`` so nothing is
lost on a round trip. Malformed lines are collected as issues, never
fatal.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from typing import IO, Callable, Iterable

from .errors import ParseError, UnknownSource

SOURCES = ("flickr", "twitter", "instagram", "tripadvisor", "reddit")

DEFAULT_DATE_WINDOW = (dt.date(2016, 1, 1), dt.date(2023, 12, 31))
DEFAULT_MIN_WORDS = 8

# share of ASCII letters (among all letters) above which text counts as English
ASCII_LETTER_RATIO = 0.9


@dataclass
class Record:
    """One opinion post: text plus image references and site metadata."""

    id: str
    source: str
    text: str
    date: dt.date
    images: list[str] = field(default_factory=list)
    comments: list[str] = field(default_factory=list)
    rating: float | None = None
    likes: int | None = None
    author_locale: str | None = None
    geo: tuple[float, float] | None = None
    extra: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "source": self.source,
            "text": self.text,
            "date": self.date.isoformat(),
            "images": list(self.images),
            "comments": list(self.comments),
            "rating": self.rating,
            "likes": self.likes,
            "author_locale": self.author_locale,
            "geo": list(self.geo) if self.geo is not None else None,
            "extra": self.extra,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Record":
        geo = d.get("geo")
        return cls(
            id=d["id"],
            source=d["source"],
            text=d["text"],
            date=dt.date.fromisoformat(d["date"]),
            images=list(d.get("images") or []),
            comments=list(d.get("comments") or []),
            rating=d.get("rating"),
            likes=d.get("likes"),
            author_locale=d.get("author_locale"),
            geo=(float(geo[0]), float(geo[1])) if geo else None,
            extra=dict(d.get("extra") or {}),
        )


@dataclass
class CorpusStats:
    """Conservation accounting for a filter pass: kept + dropped = total."""

    total: int = 0
    kept: int = 0
    dropped_by_reason: dict[str, int] = field(default_factory=dict)

    def drop(self, reason: str) -> None:
        self.total += 1
        self.dropped_by_reason[reason] = self.dropped_by_reason.get(reason, 0) + 1

    def keep(self) -> None:
        self.total += 1
        self.kept += 1

    def dropped(self) -> int:
        return sum(self.dropped_by_reason.values())

    def check(self) -> None:
        if self.kept + self.dropped() != self.total:
            raise AssertionError(f"stats do not conserve: {self}")

    def merge(self, other: "CorpusStats") -> None:
        self.total += other.total
        self.kept += other.kept
        for reason, n in other.dropped_by_reason.items():
            self.dropped_by_reason[reason] = self.dropped_by_reason.get(reason, 0) + n

    def to_json_dict(self) -> dict:
        return {
            "total": self.total,
            "kept": self.kept,
            "dropped_by_reason": dict(sorted(self.dropped_by_reason.items())),
        }


@dataclass
class ParseIssue:
    line_no: int
    reason: str
    detail: str = ""


@dataclass
class ParseReport:
    records: list[Record] = field(default_factory=list)
    issues: list[ParseIssue] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def stats(self) -> CorpusStats:
        s = CorpusStats()
        for _ in self.records:
            s.keep()
        for issue in self.issues:
            s.drop(issue.reason)
        return s


# --- field coercion helpers ---------------------------------------------------

def _parse_date(value) -> dt.date:
    if isinstance(value, bool):
        raise ValueError("boolean is not a date")
    if isinstance(value, (int, float)):
        return dt.datetime.fromtimestamp(value, tz=dt.timezone.utc).date()
    if isinstance(value, str):
        v = value.strip()
        try:
            return dt.date.fromisoformat(v[:10])
        except ValueError:
            pass
        try:
            return dt.datetime.fromisoformat(v).date()
        except ValueError:
            pass
        # e.g. "Wed Oct 10 20:19:24 +0000 2018"
        return dt.datetime.strptime(v, "%a %b %d %H:%M:%S %z %Y").date()
    raise ValueError(f"unsupported date value: {value!r}")


def _require(raw: dict, key: str):
    if key not in raw or raw[key] in (None, ""):
        raise ParseError("missing_field", key)
    return raw[key]


def _text_of(*parts) -> str:
    chunks = [str(p).strip() for p in parts if p not in (None, "")]
    return "\n".join(c for c in chunks if c)


def _coerce_rating(value) -> float:
    try:
        rating = float(value)
    except (TypeError, ValueError):
        raise ParseError("bad_rating", repr(value))
    if not 1.0 <= rating <= 5.0:
        raise ParseError("bad_rating", f"{rating} outside [1, 5]")
    return rating


def _coerce_likes(value) -> int:
    try:
        likes = int(value)
    except (TypeError, ValueError):
        raise ParseError("bad_likes", repr(value))
    if likes < 0:
        raise ParseError("bad_likes", f"{likes} < 0")
    return likes


def _coerce_geo(lat, lon) -> tuple[float, float]:
    try:
        lat_f, lon_f = float(lat), float(lon)
    except (TypeError, ValueError):
        raise ParseError("bad_geo", f"{lat!r},{lon!r}")
    if not (-90.0 <= lat_f <= 90.0 and -180.0 <= lon_f <= 180.0):
        raise ParseError("bad_geo", f"{lat_f},{lon_f} out of range")
    return lat_f, lon_f


def _coerce_str_list(value, reason: str) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return [value]
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return list(value)
    raise ParseError(reason, repr(value))


def _coerce_date(value) -> dt.date:
    try:
        return _parse_date(value)
    except (ValueError, OverflowError, OSError) as exc:
        raise ParseError("bad_date", str(exc))


# --- per-source adapters ------------------------------------------------------
# Each adapter maps a raw JSON object onto Record fields and reports the keys
# it consumed; everything else is kept verbatim in Record.extra.

def _adapt_flickr(raw: dict) -> tuple[dict, set]:
    consumed = {"photo_id", "title", "description", "url", "urls", "faves",
                "date_taken", "latitude", "longitude", "owner_location", "comments"}
    fields = {
        "id": str(_require(raw, "photo_id")),
        "text": _text_of(raw.get("title"), raw.get("description")),
        "images": _coerce_str_list(raw.get("urls") or raw.get("url"), "bad_images"),
        "likes": _coerce_likes(raw["faves"]) if raw.get("faves") is not None else None,
        "date": _coerce_date(_require(raw, "date_taken")),
        "author_locale": raw.get("owner_location"),
        "comments": _coerce_str_list(raw.get("comments"), "bad_comments"),
    }
    if raw.get("latitude") is not None and raw.get("longitude") is not None:
        fields["geo"] = _coerce_geo(raw["latitude"], raw["longitude"])
    return fields, consumed


def _adapt_twitter(raw: dict) -> tuple[dict, set]:
    consumed = {"id_str", "id", "full_text", "text", "media", "favorite_count",
                "created_at", "user_location", "user", "comments"}
    user = raw.get("user") or {}
    fields = {
        "id": str(raw.get("id_str") or _require(raw, "id")),
        "text": str(_require(raw, "full_text") if raw.get("full_text") else _require(raw, "text")),
        "images": _coerce_str_list(raw.get("media"), "bad_images"),
        "likes": _coerce_likes(raw["favorite_count"]) if raw.get("favorite_count") is not None else None,
        "date": _coerce_date(_require(raw, "created_at")),
        "author_locale": raw.get("user_location") or user.get("location"),
        "comments": _coerce_str_list(raw.get("comments"), "bad_comments"),
    }
    return fields, consumed


def _adapt_instagram(raw: dict) -> tuple[dict, set]:
    consumed = {"id", "caption", "display_url", "display_urls", "like_count",
                "timestamp", "location", "comments"}
    fields = {
        "id": str(_require(raw, "id")),
        "text": str(_require(raw, "caption")),
        "images": _coerce_str_list(raw.get("display_urls") or raw.get("display_url"), "bad_images"),
        "likes": _coerce_likes(raw["like_count"]) if raw.get("like_count") is not None else None,
        "date": _coerce_date(_require(raw, "timestamp")),
        "comments": _coerce_str_list(raw.get("comments"), "bad_comments"),
    }
    loc = raw.get("location")
    if isinstance(loc, dict) and loc.get("lat") is not None:
        fields["geo"] = _coerce_geo(loc.get("lat"), loc.get("lng", loc.get("lon")))
    return fields, consumed


def _adapt_tripadvisor(raw: dict) -> tuple[dict, set]:
    consumed = {"review_id", "title", "text", "rating", "photos", "travel_date",
                "date", "user_location", "helpful_votes", "comments"}
    fields = {
        "id": str(_require(raw, "review_id")),
        "text": _text_of(raw.get("title"), _require(raw, "text")),
        "images": _coerce_str_list(raw.get("photos"), "bad_images"),
        "rating": _coerce_rating(raw["rating"]) if raw.get("rating") is not None else None,
        "likes": _coerce_likes(raw["helpful_votes"]) if raw.get("helpful_votes") is not None else None,
        "date": _coerce_date(raw.get("travel_date") or _require(raw, "date")),
        "author_locale": raw.get("user_location"),
        "comments": _coerce_str_list(raw.get("comments"), "bad_comments"),
    }
    return fields, consumed


def _adapt_reddit(raw: dict) -> tuple[dict, set]:
    consumed = {"id", "name", "title", "selftext", "media", "image_urls",
                "score", "created_utc", "comments"}
    fields = {
        "id": str(raw.get("name") or _require(raw, "id")),
        "text": _text_of(raw.get("title"), raw.get("selftext")),
        "images": _coerce_str_list(raw.get("image_urls") or raw.get("media"), "bad_images"),
        "likes": _coerce_likes(raw["score"]) if raw.get("score") is not None else None,
        "date": _coerce_date(_require(raw, "created_utc")),
        "comments": _coerce_str_list(raw.get("comments"), "bad_comments"),
    }
    return fields, consumed


_ADAPTERS: dict[str, Callable[[dict], tuple[dict, set]]] = {
    "flickr": _adapt_flickr,
    "twitter": _adapt_twitter,
    "instagram": _adapt_instagram,
    "tripadvisor": _adapt_tripadvisor,
    "reddit": _adapt_reddit,
}


def _read_stream(raw) -> str:
    if isinstance(raw, bytes):
        return raw.decode("utf-8")
    if isinstance(raw, str):
        return raw
    data = raw.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data


def parse_source(
    source: str,
    raw: bytes | str | IO,
    date_window: tuple[dt.date, dt.date] = DEFAULT_DATE_WINDOW,
) -> ParseReport:
    """Parse one site's line-delimited dump into Records.

    Well-formed lines become Records (ids prefixed with the source name,
    so they stay unique across sites). Bad lines are collected as issues
    with a reason; an empty stream yields an empty report plus a warning.
    """
    if source not in SOURCES:
        raise UnknownSource(f"unknown source {source!r}, expected one of {SOURCES}")
    text = _read_stream(raw)
    report = ParseReport()
    if not text.strip():
        report.warnings.append("empty input")
        return report

    adapter = _ADAPTERS[source]
    seen: set[str] = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            report.issues.append(ParseIssue(line_no, "invalid_json", str(exc)))
            continue
        if not isinstance(obj, dict):
            report.issues.append(ParseIssue(line_no, "invalid_json", "line is not a JSON object"))
            continue
        try:
            fields, consumed = adapter(obj)
        except ParseError as exc:
            report.issues.append(ParseIssue(line_no, exc.reason, exc.detail))
            continue
        record_id = f"{source}-{fields.pop('id')}"
        if record_id in seen:
            report.issues.append(ParseIssue(line_no, "duplicate_id", record_id))
            continue
        date = fields["date"]
        if not date_window[0] <= date <= date_window[1]:
            report.issues.append(ParseIssue(line_no, "date_out_of_window", date.isoformat()))
            continue
        extra = {k: v for k, v in obj.items() if k not in consumed}
        record = Record(id=record_id, source=source, extra=extra, **fields)
        seen.add(record_id)
        report.records.append(record)
    return report


# --- text filters --------------------------------------------------------------

def word_count(text: str) -> int:
    """Whitespace-delimited tokens after trimming."""
    return len(text.split())


def looks_english(text: str) -> bool:
    """ASCII-ratio heuristic: at least 90% of letters are ASCII letters."""
    letters = [ch for ch in text if ch.isalpha()]
    if not letters:
        return False
    ascii_letters = sum(1 for ch in letters if ord(ch) < 128)
    return ascii_letters / len(letters) >= ASCII_LETTER_RATIO


def filter_text(
    records: Iterable[Record],
    min_words: int = DEFAULT_MIN_WORDS,
    language: str = "english",
    detector: Callable[[str], bool] | None = None,
) -> tuple[list[Record], CorpusStats]:
    """Keep records with the target language and at least `min_words` words.

    The detector is pluggable; the default is the ASCII-ratio heuristic
    for English. Pure and idempotent: filtering an already-filtered list
    keeps everything.
    """
    if min_words < 1:
        raise ValueError("min_words must be >= 1")
    if detector is None:
        if language != "english":
            raise ValueError(f"no built-in detector for language {language!r}")
        detector = looks_english

    kept: list[Record] = []
    stats = CorpusStats()
    for record in records:
        if not detector(record.text):
            stats.drop("non_english")
        elif word_count(record.text) < min_words:
            stats.drop("too_short")
        else:
            stats.keep()
            kept.append(record)
    stats.check()
    return kept, stats
