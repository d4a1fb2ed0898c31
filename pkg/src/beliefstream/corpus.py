"""Shard-parallel corpus ingestion into a columnar store.

Input files are cut into byte-range shards (gzip files stay whole), each
shard is parsed independently into flat columns, and shard results are
merged in canonical order: sorted input paths, ascending byte offset.
Because every per-message column ends up in global line order and all
cross-message reductions are integer counts, the merged corpus - and every
statistic derived from it - is identical for any shard decomposition or
worker count.  Duplicate message ids are resolved to the first global
occurrence; later ones become rejects.
"""

from __future__ import annotations

import datetime as dt
import gzip
import hashlib
import html
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .calendars import TradingCalendar, build_calendar
from .catalog import parse_approach, parse_experience, parse_holding_period
from .errors import BadTimestamp, ConfigError, MalformedJson, SchemaViolation
from .ingest import (
    count_features,
    extract_cashtags,
    normalize_symbols,
    parse_timestamp,
)

SHARD_TARGET_BYTES = 64 * 1024 * 1024


@dataclass(frozen=True)
class RejectRecord:
    file: str
    line_no: int
    error_kind: str
    detail: str


@dataclass
class IngestStats:
    n_files: int = 0
    n_lines: int = 0
    n_blank: int = 0
    n_parsed: int = 0
    n_malformed_json: int = 0
    n_schema_violation: int = 0
    n_bad_timestamp: int = 0
    n_duplicate_id: int = 0
    n_out_of_calendar: int = 0
    n_out_of_range: int = 0
    n_messages: int = 0
    n_users: int = 0
    n_tickers: int = 0
    n_users_negative_counts: int = 0

    @property
    def n_rejects(self) -> int:
        return (
            self.n_malformed_json
            + self.n_schema_violation
            + self.n_bad_timestamp
            + self.n_duplicate_id
            + self.n_out_of_calendar
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_rejects"] = self.n_rejects
        return d


@dataclass
class Corpus:
    """Columnar view of all in-range parsed messages plus resolved users."""

    tz_name: str
    days: tuple[dt.date, ...]          # trading days of the sample range
    closes: np.ndarray                 # int64 close epochs, aligned to days
    tickers: list[str]                 # cashtag vocabulary (sorted)
    users: np.ndarray                  # int64 user ids (sorted)
    # per-message columns, in global line order
    msg_id: np.ndarray                 # int64
    user_code: np.ndarray              # int32 index into users
    ts_epoch: np.ndarray               # int64
    day_idx: np.ndarray                # int32 index into days
    label: np.ndarray                  # int8 (+1 bullish / -1 bearish / 0)
    n_tags: np.ndarray                 # int16 distinct cashtags per message
    tag_flat: np.ndarray               # int32 codes into tickers (CSR values)
    tag_offsets: np.ndarray            # int64, len n_messages+1 (CSR offsets)
    n_words: np.ndarray                # int32
    n_chars: np.ndarray                # int32
    n_stopwords: np.ndarray            # int32
    n_cashtag_tokens: np.ndarray       # int32
    # per-user columns, aligned to users
    u_approach: np.ndarray             # int8
    u_horizon: np.ndarray              # int8
    u_experience: np.ndarray           # int8
    u_followers: np.ndarray            # int32
    u_following: np.ndarray            # int32
    u_ideas: np.ndarray                # int32
    u_likes: np.ndarray                # int32

    @property
    def n_messages(self) -> int:
        return int(self.msg_id.shape[0])

    def filtered_mask(self) -> np.ndarray:
        """Messages passing the measurement filter (classified, one cashtag)."""
        return (self.label != 0) & (self.n_tags == 1)

    def first_tag(self, mask: np.ndarray) -> np.ndarray:
        """Ticker code of the single cashtag for each masked message."""
        return self.tag_flat[self.tag_offsets[:-1][mask]].astype(np.int32)

    def calendar_view(self) -> TradingCalendar:
        return TradingCalendar(self.tz_name, self.days, self.closes)


@dataclass
class IngestResult:
    corpus: Corpus
    stats: IngestStats
    rejects: list[RejectRecord] = field(default_factory=list)


# ---------------------------------------------------------------------------
# shard planning
# ---------------------------------------------------------------------------

def plan_shards(paths, jobs: int = 1, target_bytes: int = SHARD_TARGET_BYTES):
    """(path, start, end, is_gzip) tuples in canonical order.

    Plain files are split at line boundaries into at least `jobs` pieces
    (when large enough to split); gzip files are one shard each.
    """
    shards = []
    for path in sorted(str(p) for p in paths):
        if not os.path.exists(path):
            raise ConfigError(f"input file not found: {path}")
        size = os.path.getsize(path)
        if path.endswith(".gz"):
            shards.append((path, 0, size, True))
            continue
        if size == 0:
            shards.append((path, 0, 0, False))
            continue
        pieces = min(max(1, int(jobs), -(-size // target_bytes)), 512)
        cuts = {0, size}
        with open(path, "rb") as fh:
            for k in range(1, pieces):
                fh.seek(size * k // pieces)
                fh.readline()
                cut = fh.tell()
                if cut < size:
                    cuts.add(cut)
        bounds = sorted(cuts)
        for a, b in zip(bounds, bounds[1:]):
            shards.append((path, a, b, False))
    return shards


def _iter_lines(path: str, start: int, end: int, is_gzip: bool):
    if is_gzip:
        with gzip.open(path, "rb") as fh:
            yield from fh
        return
    with open(path, "rb") as fh:
        if start:
            fh.seek(start)
        consumed = start
        for line in fh:
            yield line
            consumed += len(line)
            if consumed >= end:
                break


# ---------------------------------------------------------------------------
# shard worker
# ---------------------------------------------------------------------------

_SENT_CODES = {"Bullish": 1, "Bearish": -1, "bullish": 1, "bearish": -1}


def parse_shard(args) -> dict:
    """Parse one shard into flat columns.

    The record validation below mirrors ingest.parse_message check for
    check (tests assert the two paths agree); it is unrolled here to keep
    the per-line cost low on multi-million-message corpora.
    """
    path, start, end, is_gzip, stopwords = args
    loads = json.loads
    unescape = html.unescape
    sent_codes = dict(_SENT_CODES)
    memo_a: dict = {None: 0}
    memo_h: dict = {None: 0}
    memo_e: dict = {None: 0}

    ids: list[int] = []
    uids: list[int] = []
    ts: list[int] = []
    labels: list[int] = []
    ntags: list[int] = []
    tagflat: list[int] = []
    appr: list[int] = []
    hor: list[int] = []
    exp: list[int] = []
    fol: list[int] = []
    folw: list[int] = []
    ideas: list[int] = []
    likes: list[int] = []
    words: list[int] = []
    chars: list[int] = []
    stops: list[int] = []
    tagtok: list[int] = []
    lines_of: list[int] = []
    rejects: list[tuple[int, str, str]] = []
    vocab: dict[str, int] = {}
    n_blank = 0
    line_no = 0

    for line in _iter_lines(path, start, end, is_gzip):
        line_no += 1
        if not line.strip():
            n_blank += 1
            continue
        try:
            try:
                obj = loads(line)
            except (ValueError, UnicodeDecodeError) as exc:
                raise MalformedJson(f"invalid JSON: {exc}")
            if type(obj) is not dict:
                raise SchemaViolation("top level must be a JSON object")
            for key in ("object", "action", "data", "time"):
                if key not in obj:
                    raise SchemaViolation(f"missing top-level key {key!r}")
            if obj["object"] != "Message":
                raise SchemaViolation("object must be 'Message'")
            data = obj["data"]
            if type(data) is not dict:
                raise SchemaViolation("field 'data' must be an object")
            try:
                epoch = parse_timestamp(obj["time"])
            except (ValueError, TypeError) as exc:
                raise BadTimestamp(str(exc))

            mid = data.get("id")
            if type(mid) is not int:
                raise SchemaViolation("field 'id' must be an integer")
            body = data.get("body")
            if type(body) is not str:
                raise SchemaViolation("field 'body' must be a string")
            if "&" in body:
                body = unescape(body)
            tokens = body.split()
            if not tokens:
                raise SchemaViolation("body has no word tokens")

            sval = data.get("sentiment")
            if sval is None:
                label = 0
            else:
                label = sent_codes.get(sval, None)
                if label is None:
                    if isinstance(sval, str):
                        label = sent_codes.get(sval.lower())
                    if label is None:
                        raise SchemaViolation(f"unknown sentiment value {sval!r}")
                    sent_codes[sval] = label

            syms = data.get("symbols")
            if syms is not None:
                tags = normalize_symbols(syms)
            else:
                tags = extract_cashtags(body)

            user = data.get("user")
            if type(user) is not dict:
                raise SchemaViolation("field 'user' must be an object")
            uid = user.get("id")
            if type(uid) is not int:
                raise SchemaViolation("field 'id' must be an integer")
            nfol = user.get("followers", 0)
            nfolw = user.get("following", 0)
            nideas = user.get("ideas", 0)
            nlikes = user.get("likes", 0)
            for key, v in (
                ("followers", nfol),
                ("following", nfolw),
                ("ideas", nideas),
                ("likes", nlikes),
            ):
                if type(v) is not int:
                    raise SchemaViolation(f"field {key!r} must be an integer")
            if nideas < 0:
                raise SchemaViolation("field 'ideas' must be >= 0")
            if nlikes < 0:
                raise SchemaViolation("field 'likes' must be >= 0")

            raw_a = user.get("approach")
            code_a = memo_a.get(raw_a)
            if code_a is None:
                code_a = int(parse_approach(raw_a))
                memo_a[raw_a] = code_a
            raw_h = user.get("holding_period")
            code_h = memo_h.get(raw_h)
            if code_h is None:
                code_h = int(parse_holding_period(raw_h))
                memo_h[raw_h] = code_h
            raw_e = user.get("experience")
            code_e = memo_e.get(raw_e)
            if code_e is None:
                code_e = int(parse_experience(raw_e))
                memo_e[raw_e] = code_e

            n_words, n_chars, n_stop, n_tagtok = count_features(tokens, stopwords)
        except (MalformedJson, SchemaViolation, BadTimestamp) as exc:
            rejects.append((line_no, type(exc).__name__, exc.detail))
            continue

        ids.append(mid)
        uids.append(uid)
        ts.append(epoch)
        labels.append(label)
        ntags.append(len(tags))
        for t in tags:
            code = vocab.get(t)
            if code is None:
                code = len(vocab)
                vocab[t] = code
            tagflat.append(code)
        appr.append(code_a)
        hor.append(code_h)
        exp.append(code_e)
        fol.append(nfol)
        folw.append(nfolw)
        ideas.append(nideas)
        likes.append(nlikes)
        words.append(n_words)
        chars.append(n_chars)
        stops.append(n_stop)
        tagtok.append(n_tagtok)
        lines_of.append(line_no)

    n = len(ids)

    def arr(values, dtype):
        return np.fromiter(values, dtype, len(values))

    return {
        "path": path,
        "n_lines": line_no,
        "n_blank": n_blank,
        "rejects": rejects,
        "vocab": list(vocab),
        "msg_id": arr(ids, np.int64),
        "user_id": arr(uids, np.int64),
        "ts": arr(ts, np.int64),
        "label": arr(labels, np.int8),
        "n_tags": arr(ntags, np.int16),
        "tag_flat": arr(tagflat, np.int32),
        "approach": arr(appr, np.int8),
        "horizon": arr(hor, np.int8),
        "experience": arr(exp, np.int8),
        "followers": arr(fol, np.int32),
        "following": arr(folw, np.int32),
        "ideas": arr(ideas, np.int32),
        "likes": arr(likes, np.int32),
        "n_words": arr(words, np.int32),
        "n_chars": arr(chars, np.int32),
        "n_stopwords": arr(stops, np.int32),
        "n_cashtag_tokens": arr(tagtok, np.int32),
        "line_no": arr(lines_of, np.int64),
        "n": n,
    }


# ---------------------------------------------------------------------------
# merge
# ---------------------------------------------------------------------------

def _csr_take(flat, offsets, take_idx):
    lens = (offsets[1:] - offsets[:-1])[take_idx]
    total = int(lens.sum())
    if total == 0:
        return flat[:0], np.zeros(len(take_idx) + 1, np.int64)
    starts = offsets[:-1][take_idx]
    ends = np.cumsum(lens)
    within = np.arange(total, dtype=np.int64) - np.repeat(ends - lens, lens)
    new_flat = flat[np.repeat(starts, lens) + within]
    new_offsets = np.concatenate([[0], ends])
    return new_flat, new_offsets


def merge_shards(
    results: list[dict],
    calendar: TradingCalendar,
    date_from: dt.date,
    date_to: dt.date,
) -> IngestResult:
    """Merge shard columns (already in canonical order) into a Corpus."""
    stats = IngestStats(n_files=len({r["path"] for r in results}))
    rejects: list[RejectRecord] = []

    # per-file line offsets: shards of one file arrive in ascending order
    file_offset: dict[str, int] = {}
    shard_line_base = []
    for r in results:
        base = file_offset.get(r["path"], 0)
        shard_line_base.append(base)
        file_offset[r["path"]] = base + r["n_lines"]
        stats.n_lines += r["n_lines"]
        stats.n_blank += r["n_blank"]
        for local_line, kind, detail in r["rejects"]:
            rejects.append(RejectRecord(r["path"], base + local_line, kind, detail))
            if kind == "MalformedJson":
                stats.n_malformed_json += 1
            elif kind == "BadTimestamp":
                stats.n_bad_timestamp += 1
            else:
                stats.n_schema_violation += 1

    # global ticker vocabulary (sorted -> decomposition independent)
    all_syms: set[str] = set()
    for r in results:
        all_syms.update(r["vocab"])
    tickers = sorted(all_syms)
    tick_index = {s: i for i, s in enumerate(tickers)}

    def concat(key, dtype):
        parts = [r[key] for r in results]
        if not parts:
            return np.zeros(0, dtype)
        return np.concatenate(parts).astype(dtype, copy=False)

    msg_id = concat("msg_id", np.int64)
    n_total = msg_id.shape[0]
    stats.n_parsed = n_total
    user_id = concat("user_id", np.int64)
    ts = concat("ts", np.int64)
    label = concat("label", np.int8)
    n_tags = concat("n_tags", np.int16)
    approach = concat("approach", np.int8)
    horizon = concat("horizon", np.int8)
    experience = concat("experience", np.int8)
    followers = concat("followers", np.int32)
    following = concat("following", np.int32)
    ideas = concat("ideas", np.int32)
    likes = concat("likes", np.int32)
    n_words = concat("n_words", np.int32)
    n_chars = concat("n_chars", np.int32)
    n_stopwords = concat("n_stopwords", np.int32)
    n_cashtag_tokens = concat("n_cashtag_tokens", np.int32)
    line_no = concat("line_no", np.int64)

    flat_parts = []
    file_of_parts = []
    for fi, r in enumerate(results):
        local_vocab = r["vocab"]
        if local_vocab:
            remap = np.fromiter(
                (tick_index[s] for s in local_vocab), np.int32, len(local_vocab)
            )
            flat_parts.append(remap[r["tag_flat"]])
        else:
            flat_parts.append(r["tag_flat"])
        file_of_parts.append(np.full(r["n"], fi, np.int32))
        line_no[sum(x["n"] for x in results[:fi]) : sum(x["n"] for x in results[: fi + 1])] += shard_line_base[fi]
    tag_flat = (
        np.concatenate(flat_parts) if flat_parts else np.zeros(0, np.int32)
    )
    shard_of = (
        np.concatenate(file_of_parts) if file_of_parts else np.zeros(0, np.int32)
    )
    tag_offsets = np.concatenate([[0], np.cumsum(n_tags, dtype=np.int64)])
    shard_paths = [r["path"] for r in results]

    # duplicate ids: first global occurrence wins
    keep = np.zeros(n_total, bool)
    if n_total:
        _, first_idx = np.unique(msg_id, return_index=True)
        keep[first_idx] = True
    for i in np.flatnonzero(~keep):
        rejects.append(
            RejectRecord(
                shard_paths[shard_of[i]],
                int(line_no[i]),
                "DuplicateId",
                f"duplicate message id {int(msg_id[i])}",
            )
        )
        stats.n_duplicate_id += 1

    # close-to-close trading-day assignment
    day_abs = calendar.assign_index_many(ts)
    out_cal = keep & (day_abs == -1)
    for i in np.flatnonzero(out_cal):
        rejects.append(
            RejectRecord(
                shard_paths[shard_of[i]],
                int(line_no[i]),
                "OutOfCalendar",
                f"timestamp {int(ts[i])} outside calendar coverage",
            )
        )
    stats.n_out_of_calendar = int(out_cal.sum())

    lo, hi = calendar.range_indices(date_from, date_to)
    in_range = keep & (day_abs >= lo) & (day_abs < hi)
    stats.n_out_of_range = int((keep & ~out_cal & ~in_range).sum())

    rows = np.flatnonzero(in_range)
    tag_flat, tag_offsets = _csr_take(tag_flat, tag_offsets, rows)

    msg_id = msg_id[rows]
    user_id = user_id[rows]
    ts = ts[rows]
    day_idx = (day_abs[rows] - lo).astype(np.int32)
    label = label[rows]
    n_tags = n_tags[rows]
    approach = approach[rows]
    horizon = horizon[rows]
    experience = experience[rows]
    followers = followers[rows]
    following = following[rows]
    ideas = ideas[rows]
    likes = likes[rows]
    n_words = n_words[rows]
    n_chars = n_chars[rows]
    n_stopwords = n_stopwords[rows]
    n_cashtag_tokens = n_cashtag_tokens[rows]

    users = np.unique(user_id)
    user_code = np.searchsorted(users, user_id).astype(np.int32)

    # latest-wins profile snapshot per user (ties broken by message id)
    n_users = users.shape[0]
    u_approach = np.zeros(n_users, np.int8)
    u_horizon = np.zeros(n_users, np.int8)
    u_experience = np.zeros(n_users, np.int8)
    u_followers = np.zeros(n_users, np.int32)
    u_following = np.zeros(n_users, np.int32)
    u_ideas = np.zeros(n_users, np.int32)
    u_likes = np.zeros(n_users, np.int32)
    if n_users:
        order = np.lexsort((msg_id, ts, user_code))
        sorted_codes = user_code[order]
        last = order[
            np.concatenate(
                [np.flatnonzero(sorted_codes[1:] != sorted_codes[:-1]), [len(order) - 1]]
            )
        ]
        u_codes = user_code[last]
        u_approach[u_codes] = approach[last]
        u_horizon[u_codes] = horizon[last]
        u_experience[u_codes] = experience[last]
        u_followers[u_codes] = followers[last]
        u_following[u_codes] = following[last]
        u_ideas[u_codes] = ideas[last]
        u_likes[u_codes] = likes[last]

    stats.n_messages = int(rows.shape[0])
    stats.n_users = int(n_users)
    stats.n_tickers = int(np.unique(tag_flat).shape[0]) if tag_flat.size else 0
    stats.n_users_negative_counts = int(
        ((u_followers < 0) | (u_following < 0)).sum()
    )

    rejects.sort(key=lambda r: (r.file, r.line_no))

    corpus = Corpus(
        tz_name=calendar.tz_name,
        days=calendar.days[lo:hi],
        closes=calendar.close_epochs[lo:hi].copy(),
        tickers=tickers,
        users=users,
        msg_id=msg_id,
        user_code=user_code,
        ts_epoch=ts,
        day_idx=day_idx,
        label=label,
        n_tags=n_tags,
        tag_flat=tag_flat,
        tag_offsets=tag_offsets,
        n_words=n_words,
        n_chars=n_chars,
        n_stopwords=n_stopwords,
        n_cashtag_tokens=n_cashtag_tokens,
        u_approach=u_approach,
        u_horizon=u_horizon,
        u_experience=u_experience,
        u_followers=u_followers,
        u_following=u_following,
        u_ideas=u_ideas,
        u_likes=u_likes,
    )
    return IngestResult(corpus=corpus, stats=stats, rejects=rejects)


def ingest_corpus(
    paths,
    calendar: TradingCalendar,
    date_from: dt.date,
    date_to: dt.date,
    stopwords: frozenset[str],
    jobs: int = 1,
    target_bytes: int = SHARD_TARGET_BYTES,
) -> IngestResult:
    """Parse NDJSON corpus files and assemble the columnar store."""
    shards = plan_shards(paths, jobs=jobs, target_bytes=target_bytes)
    args = [(path, a, b, gz, stopwords) for path, a, b, gz in shards]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(parse_shard, args, chunksize=1))
    else:
        results = [parse_shard(a) for a in args]
    return merge_shards(results, calendar, date_from, date_to)


def content_hash(paths) -> str:
    """SHA-256 of the decompressed concatenation of inputs in sorted order."""
    h = hashlib.sha256()
    for path in sorted(str(p) for p in paths):
        opener = gzip.open if path.endswith(".gz") else open
        with opener(path, "rb") as fh:
            while True:
                chunk = fh.read(1 << 20)
                if not chunk:
                    break
                h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# store persistence
# ---------------------------------------------------------------------------

STORE_ARRAY_FILE = "corpus.npz"
STORE_META_FILE = "meta.json"


def save_store(corpus: Corpus, stats: IngestStats, store_dir) -> None:
    os.makedirs(store_dir, exist_ok=True)
    day_ordinals = np.fromiter(
        (d.toordinal() for d in corpus.days), np.int64, len(corpus.days)
    )
    np.savez(
        os.path.join(store_dir, STORE_ARRAY_FILE),
        day_ordinals=day_ordinals,
        closes=corpus.closes,
        tickers=np.array(corpus.tickers, dtype=np.str_),
        users=corpus.users,
        msg_id=corpus.msg_id,
        user_code=corpus.user_code,
        ts_epoch=corpus.ts_epoch,
        day_idx=corpus.day_idx,
        label=corpus.label,
        n_tags=corpus.n_tags,
        tag_flat=corpus.tag_flat,
        tag_offsets=corpus.tag_offsets,
        n_words=corpus.n_words,
        n_chars=corpus.n_chars,
        n_stopwords=corpus.n_stopwords,
        n_cashtag_tokens=corpus.n_cashtag_tokens,
        u_approach=corpus.u_approach,
        u_horizon=corpus.u_horizon,
        u_experience=corpus.u_experience,
        u_followers=corpus.u_followers,
        u_following=corpus.u_following,
        u_ideas=corpus.u_ideas,
        u_likes=corpus.u_likes,
    )
    meta = {"version": 1, "tz_name": corpus.tz_name, "stats": stats.to_dict()}
    with open(os.path.join(store_dir, STORE_META_FILE), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_store(store_dir) -> tuple[Corpus, dict]:
    arr_path = os.path.join(store_dir, STORE_ARRAY_FILE)
    meta_path = os.path.join(store_dir, STORE_META_FILE)
    if not (os.path.exists(arr_path) and os.path.exists(meta_path)):
        raise FileNotFoundError(f"no ingest store in {store_dir}")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    with np.load(arr_path, allow_pickle=False) as z:
        days = tuple(dt.date.fromordinal(int(o)) for o in z["day_ordinals"])
        corpus = Corpus(
            tz_name=meta["tz_name"],
            days=days,
            closes=z["closes"],
            tickers=[str(s) for s in z["tickers"]],
            users=z["users"],
            msg_id=z["msg_id"],
            user_code=z["user_code"],
            ts_epoch=z["ts_epoch"],
            day_idx=z["day_idx"],
            label=z["label"],
            n_tags=z["n_tags"],
            tag_flat=z["tag_flat"],
            tag_offsets=z["tag_offsets"],
            n_words=z["n_words"],
            n_chars=z["n_chars"],
            n_stopwords=z["n_stopwords"],
            n_cashtag_tokens=z["n_cashtag_tokens"],
            u_approach=z["u_approach"],
            u_horizon=z["u_horizon"],
            u_experience=z["u_experience"],
            u_followers=z["u_followers"],
            u_following=z["u_following"],
            u_ideas=z["u_ideas"],
            u_likes=z["u_likes"],
        )
    return corpus, meta["stats"]
