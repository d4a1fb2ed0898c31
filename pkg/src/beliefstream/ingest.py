"""Message-level parsing: NDJSON records, cashtags, text features, filters.

Input records follow the StockTwits export layout: one JSON document per
line with top-level keys ``object``/``action``/``data``/``time``; the
message id, body, sentiment label, symbols, and author profile live under
``data`` while the creation timestamp is the top-level ``time``.
"""

from __future__ import annotations

import datetime as dt
import html
import json
import re
import string
from dataclasses import dataclass, field
from enum import IntEnum
from importlib import resources

from .calendars import TradingCalendar
from .catalog import (
    InvestorProfile,
    label_of,
    parse_approach,
    parse_experience,
    parse_holding_period,
)
from .errors import BadTimestamp, EmptyBody, MalformedJson, SchemaViolation

CASHTAG_RE = re.compile(r"\$([A-Za-z][A-Za-z0-9.\-]{0,9})")
_TOKEN_TAG_RE = re.compile(r"\$[A-Za-z][A-Za-z0-9.\-]{0,9}")
_TICKER_RE = re.compile(r"[A-Z][A-Z0-9.\-]{0,9}\Z")
_PUNCT = string.punctuation
_EPOCH_ORDINAL = dt.date(1970, 1, 1).toordinal()


class SentimentLabel(IntEnum):
    BEARISH = -1
    UNCLASSIFIED = 0
    BULLISH = 1

    @property
    def encoding(self) -> int | None:
        """+1 / -1 for classified labels, None when unclassified."""
        return None if self is SentimentLabel.UNCLASSIFIED else int(self)


@dataclass(frozen=True)
class TextFeatures:
    n_words: int
    n_chars: int
    avg_word_len: float
    n_stopwords: int
    n_cashtags: int


@dataclass(frozen=True)
class RawMessage:
    message_id: int
    user_id: int
    body: str
    created_epoch: int  # UTC seconds
    sentiment: SentimentLabel
    cashtags: tuple[str, ...]
    profile: InvestorProfile = field(default_factory=InvestorProfile)
    followers: int = 0
    following: int = 0
    ideas: int = 0
    likes: int = 0

    @property
    def created_at(self) -> dt.datetime:
        return dt.datetime.fromtimestamp(self.created_epoch, dt.timezone.utc)


def parse_timestamp(value: str) -> int:
    """Strict ``YYYY-MM-DDTHH:MM:SSZ`` to UTC epoch seconds."""
    if (
        not isinstance(value, str)
        or len(value) != 20
        or value[4] != "-"
        or value[7] != "-"
        or value[10] != "T"
        or value[13] != ":"
        or value[16] != ":"
        or value[19] != "Z"
    ):
        raise ValueError(f"timestamp not in ISO-8601 Z format: {value!r}")
    y = int(value[0:4])
    mo = int(value[5:7])
    d = int(value[8:10])
    h = int(value[11:13])
    mi = int(value[14:16])
    s = int(value[17:19])
    if h > 23 or mi > 59 or s > 59:
        raise ValueError(f"time of day out of range: {value!r}")
    days = dt.date(y, mo, d).toordinal() - _EPOCH_ORDINAL
    return days * 86400 + h * 3600 + mi * 60 + s


def format_timestamp(epoch: int) -> str:
    return dt.datetime.fromtimestamp(epoch, dt.timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


def extract_cashtags(body: str) -> list[str]:
    """Ordered, deduplicated, upper-cased tickers from ``$TICKER`` tokens."""
    seen: dict[str, None] = {}
    for m in CASHTAG_RE.finditer(body):
        seen.setdefault(m.group(1).upper())
    return list(seen)


def count_features(tokens: list[str], stopwords: frozenset[str]) -> tuple[int, int, int, int]:
    """(n_words, n_chars, n_stopwords, n_cashtag_tokens) over split tokens."""
    n_words = len(tokens)
    n_chars = 0
    n_stop = 0
    n_tags = 0
    for t in tokens:
        n_chars += len(t)
        if t[0] == "$" and _TOKEN_TAG_RE.match(t):
            n_tags += 1
        else:
            bare = t.strip(_PUNCT)
            if bare and bare.lower() in stopwords:
                n_stop += 1
    return n_words, n_chars, n_stop, n_tags


def text_features(body: str, stopwords: frozenset[str]) -> TextFeatures:
    """Whitespace-token features; stopwords matched case-insensitively on
    tokens with leading/trailing punctuation stripped."""
    tokens = body.split()
    if not tokens:
        raise EmptyBody("message body has no word tokens")
    n_words, n_chars, n_stop, n_tags = count_features(tokens, stopwords)
    return TextFeatures(n_words, n_chars, n_chars / n_words, n_stop, n_tags)


def load_stopwords(path=None) -> frozenset[str]:
    """Stopword set from a file (one word per line, # comments allowed)."""
    if path is None:
        ref = resources.files("beliefstream").joinpath("data/stopwords.txt")
        text = ref.read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    words = set()
    for line in text.splitlines():
        word = line.strip()
        if word and not word.startswith("#"):
            words.add(word.lower())
    return frozenset(words)


def _require(cond: bool, detail: str, line_no: int):
    if not cond:
        raise SchemaViolation(detail, line_no)


def _get_int(obj: dict, key: str, line_no: int, *, default=None, minimum=None) -> int:
    value = obj.get(key, default)
    if value is None or isinstance(value, bool) or not isinstance(value, int):
        raise SchemaViolation(f"field {key!r} must be an integer", line_no)
    if minimum is not None and value < minimum:
        raise SchemaViolation(f"field {key!r} must be >= {minimum}", line_no)
    return value


_SENTIMENTS = {
    "bullish": SentimentLabel.BULLISH,
    "bearish": SentimentLabel.BEARISH,
}


def parse_sentiment(value, line_no: int = 0) -> SentimentLabel:
    if value is None:
        return SentimentLabel.UNCLASSIFIED
    if isinstance(value, str):
        label = _SENTIMENTS.get(value.lower())
        if label is not None:
            return label
    raise SchemaViolation(f"unknown sentiment value {value!r}", line_no)


def normalize_symbols(values, line_no: int = 0) -> list[str]:
    """Validate and canonicalize an explicit symbols list."""
    if not isinstance(values, list):
        raise SchemaViolation("field 'symbols' must be a list", line_no)
    seen: dict[str, None] = {}
    for v in values:
        if not isinstance(v, str):
            raise SchemaViolation("symbols entries must be strings", line_no)
        sym = v.upper().lstrip("$")
        if not _TICKER_RE.match(sym):
            raise SchemaViolation(f"invalid ticker symbol {v!r}", line_no)
        seen.setdefault(sym)
    return list(seen)


def parse_message(line: str | bytes, line_no: int = 0) -> RawMessage:
    """Parse one NDJSON line into a RawMessage.

    Raises MalformedJson, SchemaViolation, or BadTimestamp; each carries
    the given line number.  Missing profile fields map to Not Classified
    and a missing/null sentiment maps to Unclassified.
    """
    try:
        obj = json.loads(line)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedJson(f"invalid JSON: {exc}", line_no) from None
    _require(isinstance(obj, dict), "top level must be a JSON object", line_no)
    for key in ("object", "action", "data", "time"):
        _require(key in obj, f"missing top-level key {key!r}", line_no)
    _require(obj["object"] == "Message", "object must be 'Message'", line_no)
    data = obj["data"]
    _require(isinstance(data, dict), "field 'data' must be an object", line_no)

    try:
        epoch = parse_timestamp(obj["time"])
    except (ValueError, TypeError) as exc:
        raise BadTimestamp(str(exc), line_no) from None

    message_id = _get_int(data, "id", line_no)
    body = data.get("body")
    _require(isinstance(body, str), "field 'body' must be a string", line_no)
    if "&" in body:
        body = html.unescape(body)
    _require(bool(body.split()), "body has no word tokens", line_no)

    sentiment = parse_sentiment(data.get("sentiment"), line_no)
    if "symbols" in data and data["symbols"] is not None:
        cashtags = normalize_symbols(data["symbols"], line_no)
    else:
        cashtags = extract_cashtags(body)

    user = data.get("user")
    _require(isinstance(user, dict), "field 'user' must be an object", line_no)
    user_id = _get_int(user, "id", line_no)
    followers = _get_int(user, "followers", line_no, default=0)
    following = _get_int(user, "following", line_no, default=0)
    ideas = _get_int(user, "ideas", line_no, default=0, minimum=0)
    likes = _get_int(user, "likes", line_no, default=0, minimum=0)
    try:
        profile = InvestorProfile(
            approach=parse_approach(user.get("approach")),
            holding_period=parse_holding_period(user.get("holding_period")),
            experience=parse_experience(user.get("experience")),
        )
    except SchemaViolation as exc:
        raise SchemaViolation(exc.detail, line_no) from None

    return RawMessage(
        message_id=message_id,
        user_id=user_id,
        body=body,
        created_epoch=epoch,
        sentiment=sentiment,
        cashtags=tuple(cashtags),
        profile=profile,
        followers=followers,
        following=following,
        ideas=ideas,
        likes=likes,
    )


def serialize_message(msg: RawMessage) -> str:
    """Render a RawMessage as one NDJSON line (inverse of parse_message)."""

    def profile_value(member) -> str | None:
        return None if member == 0 else label_of(member)

    record = {
        "object": "Message",
        "action": "create",
        "data": {
            "id": msg.message_id,
            "body": msg.body,
            "sentiment": None
            if msg.sentiment is SentimentLabel.UNCLASSIFIED
            else ("Bullish" if msg.sentiment is SentimentLabel.BULLISH else "Bearish"),
            "symbols": list(msg.cashtags),
            "user": {
                "id": msg.user_id,
                "followers": msg.followers,
                "following": msg.following,
                "ideas": msg.ideas,
                "likes": msg.likes,
                "approach": profile_value(msg.profile.approach),
                "holding_period": profile_value(msg.profile.holding_period),
                "experience": profile_value(msg.profile.experience),
            },
        },
        "time": format_timestamp(msg.created_epoch),
    }
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def filter_for_sentiment(msg: RawMessage) -> bool:
    """Measurement filter: classified sentiment and exactly one cashtag.

    Corpus characterization (frequency tables, histograms, text stats)
    ignores this filter and uses every parsed message.
    """
    return msg.sentiment is not SentimentLabel.UNCLASSIFIED and len(msg.cashtags) == 1


def assign_trading_day(ts: dt.datetime | int, cal: TradingCalendar) -> dt.date:
    """Close-to-close day owning ts; raises OutOfCalendar outside coverage."""
    if isinstance(ts, dt.datetime):
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=dt.timezone.utc)
        epoch = int(ts.timestamp())
    else:
        epoch = int(ts)
    return cal.assign(epoch)
