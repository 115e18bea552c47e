"""Shared vocabulary: sexes, age groups, regions, quarters and panel cells.

Values here are immutable and validated at construction. Parsing of files
lives in :mod:`telenow.ingestion`.
"""

from __future__ import annotations

import datetime as dt
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Mapping, Optional, Tuple

from telenow.errors import InvalidValue


class Sex(Enum):
    MALE = "M"
    FEMALE = "F"

    @classmethod
    def parse(cls, text: str) -> "Sex":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise InvalidValue(f"unknown sex {text!r} (expected M or F)") from None

    def __str__(self) -> str:
        return self.value

    @property
    def order(self) -> int:
        return 0 if self is Sex.MALE else 1


class AgeGroup(Enum):
    A25_34 = "25-34"
    A35_44 = "35-44"
    A45_54 = "45-54"
    A55_64 = "55-64"

    @classmethod
    def parse(cls, text: str) -> "AgeGroup":
        try:
            return cls(text.strip())
        except ValueError:
            raise InvalidValue(f"unknown age group {text!r}") from None

    @classmethod
    def from_years(cls, age: int) -> Optional["AgeGroup"]:
        """Bin an age in years; ``None`` outside 25-64."""
        if age < 25 or age > 64:
            return None
        return _AGE_GROUPS[(age - 25) // 10]

    @property
    def order(self) -> int:
        return _AGE_GROUPS.index(self)

    @property
    def bounds(self) -> Tuple[int, int]:
        lo, hi = self.value.split("-")
        return int(lo), int(hi)

    def __lt__(self, other: "AgeGroup") -> bool:
        if not isinstance(other, AgeGroup):
            return NotImplemented
        return self.order < other.order

    def __str__(self) -> str:
        return self.value


_AGE_GROUPS = tuple(AgeGroup)


def normalize_region_name(name: str) -> str:
    """Case-, accent- and punctuation-insensitive key for region names."""
    text = unicodedata.normalize("NFKD", name)
    text = "".join(c for c in text if not unicodedata.combining(c))
    text = text.lower().replace("’", "'").replace("`", "'")
    text = re.sub(r"[-_/]", " ", text)
    return re.sub(r"\s+", " ", text).strip()


class Region(Enum):
    """The 20 Italian NUTS2 regions, named as in the published coefficient table."""

    ABRUZZO = "Abruzzo"
    BASILICATA = "Basilicata"
    CALABRIA = "Calabria"
    CAMPANIA = "Campania"
    EMILIA_ROMAGNA = "Emilia Romagna"
    FRIULI_VENEZIA_GIULIA = "Friuli Venezia Giulia"
    LAZIO = "Lazio"
    LIGURIA = "Liguria"
    LOMBARDIA = "Lombardia"
    MARCHE = "Marche"
    MOLISE = "Molise"
    PIEMONTE = "Piemonte"
    PUGLIA = "Puglia"
    SARDEGNA = "Sardegna"
    SICILIA = "Sicilia"
    TOSCANA = "Toscana"
    TRENTINO_ALTO_ADIGE = "Trentino alto Adige"
    UMBRIA = "Umbria"
    VALLE_D_AOSTA = "Valle d'Aosta"
    VENETO = "Veneto"

    @classmethod
    def parse(cls, text: str) -> "Region":
        region = _REGION_LOOKUP.get(normalize_region_name(text))
        if region is None:
            raise InvalidValue(f"unknown region {text!r}")
        return region

    @property
    def order(self) -> int:
        return _REGIONS.index(self)

    def __lt__(self, other: "Region") -> bool:
        if not isinstance(other, Region):
            return NotImplemented
        return self.order < other.order

    def __str__(self) -> str:
        return self.value


_REGIONS = tuple(Region)
_REGION_LOOKUP = {normalize_region_name(r.value): r for r in Region}
# spellings seen in official sources
_REGION_LOOKUP.update(
    {
        "emilia romagna": Region.EMILIA_ROMAGNA,
        "friuli venezia giulia": Region.FRIULI_VENEZIA_GIULIA,
        "trentino alto adige/sudtirol": Region.TRENTINO_ALTO_ADIGE,
        "trentino alto adige sudtirol": Region.TRENTINO_ALTO_ADIGE,
        "valle d'aosta/vallee d'aoste": Region.VALLE_D_AOSTA,
        "valle d'aosta vallee d'aoste": Region.VALLE_D_AOSTA,
        "lombardy": Region.LOMBARDIA,
        "piedmont": Region.PIEMONTE,
        "apulia": Region.PUGLIA,
        "sardinia": Region.SARDEGNA,
        "sicily": Region.SICILIA,
        "tuscany": Region.TOSCANA,
        "aosta valley": Region.VALLE_D_AOSTA,
    }
)

QUARTER_YEARS = (2020, 2021)
_QUARTER_RE = re.compile(r"^\s*(\d{4})\s*-?\s*Q([1-4])\s*$", re.IGNORECASE)


@dataclass(frozen=True, order=True)
class Quarter:
    year: int
    index: int

    def __post_init__(self):
        if self.index not in (1, 2, 3, 4):
            raise InvalidValue(f"quarter index must be 1-4, got {self.index}")
        if not QUARTER_YEARS[0] <= self.year <= QUARTER_YEARS[1]:
            raise InvalidValue(
                f"quarter year must be within {QUARTER_YEARS[0]}-{QUARTER_YEARS[1]}, "
                f"got {self.year}"
            )

    @classmethod
    def parse(cls, text: str) -> "Quarter":
        m = _QUARTER_RE.match(text)
        if m is None:
            raise InvalidValue(f"bad quarter {text!r} (expected e.g. 2020Q3)")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def of(cls, day: dt.date) -> "Quarter":
        return cls(day.year, (day.month - 1) // 3 + 1)

    @property
    def start(self) -> dt.date:
        return dt.date(self.year, 3 * (self.index - 1) + 1, 1)

    @property
    def end(self) -> dt.date:
        """Last calendar day of the quarter."""
        if self.index == 4:
            return dt.date(self.year, 12, 31)
        return dt.date(self.year, 3 * self.index + 1, 1) - dt.timedelta(days=1)

    def next(self) -> "Quarter":
        if self.index == 4:
            return Quarter(self.year + 1, 1)
        return Quarter(self.year, self.index + 1)

    def contains(self, day: dt.date) -> bool:
        return day.year == self.year and (day.month - 1) // 3 + 1 == self.index

    def __str__(self) -> str:
        return f"{self.year}Q{self.index}"


def quarter_range(first: Quarter, last: Quarter) -> Tuple[Quarter, ...]:
    """Inclusive range of consecutive quarters."""
    if last < first:
        raise InvalidValue(f"empty quarter range {first}:{last}")
    out = [first]
    while out[-1] != last:
        out.append(out[-1].next())
    return tuple(out)


def parse_quarter_range(text: str) -> Tuple[Quarter, ...]:
    """Parse ``"2021Q1:2021Q3"`` (inclusive) or a single ``"2021Q1"``."""
    if ":" in text:
        a, b = text.split(":", 1)
        return quarter_range(Quarter.parse(a), Quarter.parse(b))
    return (Quarter.parse(text),)


DEFAULT_FIT_WINDOW = (Quarter(2020, 3), Quarter(2020, 4))
DEFAULT_TARGET_QUARTERS = (Quarter(2021, 1), Quarter(2021, 2), Quarter(2021, 3))
OBSERVATION_WINDOW = (dt.date(2020, 2, 1), dt.date(2021, 8, 31))

CellKey = Tuple[Region, Sex, AgeGroup, Quarter]
GroupKey = Tuple[Region, Sex, AgeGroup]


def cell_sort_key(key: CellKey):
    region, sex, age, quarter = key
    return (region.order, sex.order, age.order, quarter)


def _check_share(name: str, value: float, *, allow_zero: bool = True) -> None:
    if value != value:
        raise InvalidValue(f"{name} is NaN")
    if value > 1.0 or value < 0.0 or (not allow_zero and value == 0.0):
        bound = "(0, 1]" if not allow_zero else "[0, 1]"
        raise InvalidValue(f"{name} must lie in {bound}, got {value!r}")


@dataclass(frozen=True)
class PanelCell:
    """One (region, sex, age group, quarter) observation.

    ``teleworking`` is ``None`` for quarters without survey data. ``employment``
    may also be ``None`` for such quarters; it is required whenever
    ``teleworking`` is present.
    """

    region: Region
    sex: Sex
    age: AgeGroup
    quarter: Quarter
    teleworking: Optional[float]
    mobility: float
    employment: Optional[float]

    def __post_init__(self):
        if self.teleworking is not None:
            _check_share("teleworking", self.teleworking)
            if self.employment is None:
                raise InvalidValue(f"cell {self.label} has teleworking but no employment")
        if self.employment is not None:
            _check_share("employment", self.employment)
        _check_share("mobility", self.mobility, allow_zero=False)

    @property
    def key(self) -> CellKey:
        return (self.region, self.sex, self.age, self.quarter)

    @property
    def group(self) -> GroupKey:
        return (self.region, self.sex, self.age)

    @property
    def label(self) -> str:
        return f"{self.region}/{self.sex}/{self.age}/{self.quarter}"


def check_unique_keys(cells: Iterable[PanelCell]) -> None:
    seen = set()
    for cell in cells:
        if cell.key in seen:
            raise InvalidValue(f"duplicate panel cell {cell.label}")
        seen.add(cell.key)


@dataclass(frozen=True)
class ODRecord:
    date: dt.date
    origin: str
    destination: str
    age: AgeGroup
    sex: Sex
    volume: int

    def __post_init__(self):
        if self.volume < 0:
            raise InvalidValue(f"volume must be non-negative, got {self.volume}")

    @property
    def is_diagonal(self) -> bool:
        return self.origin == self.destination


@dataclass(frozen=True)
class MunicipalityMap:
    """Municipality (or sub-municipal zone) code to region."""

    regions: Mapping[str, Region] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "regions", dict(self.regions))

    def __getitem__(self, code: str) -> Region:
        return self.regions[code]

    def __contains__(self, code: object) -> bool:
        return code in self.regions

    def __len__(self) -> int:
        return len(self.regions)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MunicipalityMap):
            return NotImplemented
        return self.regions == other.regions

    def __hash__(self) -> int:
        return hash(tuple(sorted((k, v.value) for k, v in self.regions.items())))

    def codes(self) -> Tuple[str, ...]:
        return tuple(self.regions)

    def missing_regions(self) -> Tuple[Region, ...]:
        present = set(self.regions.values())
        return tuple(r for r in Region if r not in present)

    def by_region(self) -> Dict[Region, Tuple[str, ...]]:
        out: Dict[Region, list] = {}
        for code, region in self.regions.items():
            out.setdefault(region, []).append(code)
        return {r: tuple(c) for r, c in out.items()}
