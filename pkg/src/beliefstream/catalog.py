"""Investor-profile taxonomy and the ticker -> sector/industry catalog."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import IntEnum
from importlib import resources
from typing import TYPE_CHECKING

import numpy as np

from .errors import ConfigError, DuplicateSymbol, SchemaViolation, UnknownSectorName

if TYPE_CHECKING:  # pragma: no cover
    from .corpus import Corpus


class Approach(IntEnum):
    NOT_CLASSIFIED = 0
    TECHNICAL = 1
    GROWTH = 2
    MOMENTUM = 3
    FUNDAMENTAL = 4
    VALUE = 5
    GLOBAL_MACRO = 6


class HoldingPeriod(IntEnum):
    NOT_CLASSIFIED = 0
    SWING_TRADER = 1
    LONG_TERM_INVESTOR = 2
    DAY_TRADER = 3
    POSITION_TRADER = 4


class Experience(IntEnum):
    NOT_CLASSIFIED = 0
    NOVICE = 1
    INTERMEDIATE = 2
    PROFESSIONAL = 3


class Sector(IntEnum):
    UNKNOWN = 0
    BASIC_MATERIALS = 1
    TECHNOLOGY = 2
    HEALTHCARE = 3
    INDUSTRIAL_GOODS = 4
    SERVICES = 5
    CONSUMER_GOODS = 6
    FINANCIAL = 7
    UTILITIES = 8
    CONGLOMERATES = 9


_LABELS = {
    Approach.NOT_CLASSIFIED: "Not Classified",
    Approach.TECHNICAL: "Technical",
    Approach.GROWTH: "Growth",
    Approach.MOMENTUM: "Momentum",
    Approach.FUNDAMENTAL: "Fundamental",
    Approach.VALUE: "Value",
    Approach.GLOBAL_MACRO: "Global Macro",
    HoldingPeriod.NOT_CLASSIFIED: "Not Classified",
    HoldingPeriod.SWING_TRADER: "Swing Trader",
    HoldingPeriod.LONG_TERM_INVESTOR: "Long Term Investor",
    HoldingPeriod.DAY_TRADER: "Day Trader",
    HoldingPeriod.POSITION_TRADER: "Position Trader",
    Experience.NOT_CLASSIFIED: "Not Classified",
    Experience.NOVICE: "Novice",
    Experience.INTERMEDIATE: "Intermediate",
    Experience.PROFESSIONAL: "Professional",
    Sector.UNKNOWN: "Unknown",
    Sector.BASIC_MATERIALS: "Basic Materials",
    Sector.TECHNOLOGY: "Technology",
    Sector.HEALTHCARE: "Healthcare",
    Sector.INDUSTRIAL_GOODS: "Industrial Goods",
    Sector.SERVICES: "Services",
    Sector.CONSUMER_GOODS: "Consumer Goods",
    Sector.FINANCIAL: "Financial",
    Sector.UTILITIES: "Utilities",
    Sector.CONGLOMERATES: "Conglomerates",
}

PROFILE_DIMENSIONS = {
    "approach": Approach,
    "holding_period": HoldingPeriod,
    "experience": Experience,
}


def label_of(member) -> str:
    """Human-readable name of a taxonomy member."""
    return _LABELS[member]


def _normalize(name: str) -> str:
    return "".join(ch for ch in name.casefold() if ch.isalnum())


def _build_parser(enum_cls):
    table = {_normalize(_LABELS[m]): m for m in enum_cls}
    table.update({_normalize(m.name): m for m in enum_cls})

    def parse(value, *, default=enum_cls.NOT_CLASSIFIED if hasattr(enum_cls, "NOT_CLASSIFIED") else None):
        if value is None or value == "":
            return default
        if not isinstance(value, str):
            raise SchemaViolation(f"expected string for {enum_cls.__name__}, got {type(value).__name__}")
        member = table.get(_normalize(value))
        if member is None:
            raise SchemaViolation(f"unknown {enum_cls.__name__} value {value!r}")
        return member

    return parse


parse_approach = _build_parser(Approach)
parse_holding_period = _build_parser(HoldingPeriod)
parse_experience = _build_parser(Experience)
_parse_sector_raw = _build_parser(Sector)


def parse_sector(value: str) -> Sector:
    """Strict sector lookup for catalog files; raises UnknownSectorName."""
    try:
        return _parse_sector_raw(value, default=None)
    except SchemaViolation as exc:
        raise UnknownSectorName(str(exc)) from exc
    except TypeError:
        raise UnknownSectorName(f"sector name missing: {value!r}")


@dataclass(frozen=True)
class InvestorProfile:
    """Self-declared profile; absent dimensions default to Not Classified."""

    approach: Approach = Approach.NOT_CLASSIFIED
    holding_period: HoldingPeriod = HoldingPeriod.NOT_CLASSIFIED
    experience: Experience = Experience.NOT_CLASSIFIED


@dataclass(frozen=True)
class TickerInfo:
    symbol: str
    sector: Sector
    industry: str


class TickerCatalog:
    """Immutable symbol -> (sector, industry) lookup."""

    def __init__(self, infos):
        table: dict[str, TickerInfo] = {}
        for info in infos:
            if info.symbol in table:
                raise DuplicateSymbol(f"duplicate catalog symbol {info.symbol}")
            table[info.symbol] = info
        self._table = table

    def __len__(self) -> int:
        return len(self._table)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._table

    def lookup(self, symbol: str) -> TickerInfo:
        info = self._table.get(symbol)
        if info is None:
            return TickerInfo(symbol, Sector.UNKNOWN, "Unknown")
        return info

    def symbols(self) -> list[str]:
        return sorted(self._table)

    def sector_codes(self, symbols) -> np.ndarray:
        """int8 sector code per symbol (Sector.UNKNOWN for unmapped)."""
        return np.fromiter(
            (int(self.lookup(s).sector) for s in symbols), np.int8, len(symbols)
        )

    def industry_vocab(self) -> list[str]:
        names = {info.industry for info in self._table.values()}
        names.add("Unknown")
        return sorted(names)

    def industry_codes(self, symbols, vocab=None):
        """(int32 industry code per symbol, vocab list)."""
        vocab = vocab if vocab is not None else self.industry_vocab()
        index = {name: i for i, name in enumerate(vocab)}
        codes = np.fromiter(
            (index[self.lookup(s).industry] for s in symbols), np.int32, len(symbols)
        )
        return codes, vocab


def load_ticker_catalog(path) -> TickerCatalog:
    """Load a catalog CSV with header symbol,sector,industry."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != ["symbol", "sector", "industry"]:
            raise ConfigError(f"{path}: expected header symbol,sector,industry")
        infos = []
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise ConfigError(f"{path}: malformed row {row!r}")
            symbol = row[0].strip().upper()
            infos.append(TickerInfo(symbol, parse_sector(row[1].strip()), row[2].strip()))
    return TickerCatalog(infos)


def default_catalog() -> TickerCatalog:
    """Catalog shipped with the package (small cross-sector ticker set)."""
    ref = resources.files("beliefstream").joinpath("data/default_tickers.csv")
    with resources.as_file(ref) as path:
        return load_ticker_catalog(path)


@dataclass(frozen=True)
class FrequencyRow:
    category: str
    n_users: int
    pct_users: float
    n_messages: int
    pct_messages: float


def _dimension_rows(user_codes: np.ndarray, msg_user_code: np.ndarray, enum_cls):
    n_cats = len(enum_cls)
    user_counts = np.bincount(user_codes, minlength=n_cats)
    msgs_per_user = np.bincount(msg_user_code, minlength=len(user_codes))
    msg_counts = np.zeros(n_cats, np.int64)
    np.add.at(msg_counts, user_codes, msgs_per_user)
    total_users = int(user_counts.sum())
    total_msgs = int(msg_counts.sum())

    def pct(n, total):
        return 100.0 * n / total if total else 0.0

    members = [m for m in enum_cls if m != enum_cls.NOT_CLASSIFIED]
    members.append(enum_cls.NOT_CLASSIFIED)
    rows = [
        FrequencyRow(
            label_of(m),
            int(user_counts[m]),
            pct(int(user_counts[m]), total_users),
            int(msg_counts[m]),
            pct(int(msg_counts[m]), total_msgs),
        )
        for m in members
    ]
    rows.append(
        FrequencyRow("Total", total_users, pct(total_users, total_users),
                     total_msgs, pct(total_msgs, total_msgs))
    )
    return rows


def profile_frequency_table(corpus: "Corpus") -> dict[str, list[FrequencyRow]]:
    """Per-dimension user/message frequency breakdown (full unfiltered corpus).

    Users are counted once per dimension under their resolved (latest
    snapshot) category; each message counts under its author's category.
    """
    return {
        "approach": _dimension_rows(corpus.u_approach, corpus.user_code, Approach),
        "holding_period": _dimension_rows(corpus.u_horizon, corpus.user_code, HoldingPeriod),
        "experience": _dimension_rows(corpus.u_experience, corpus.user_code, Experience),
    }
