"""CSV readers and writers for the external file contracts.

All share columns are fractions in [0, 1]; a value above 1 is an error and is
never reinterpreted as a percentage. Dates are ISO-8601. Writers emit floats
with ``repr`` so that re-parsing a written file gives back identical values.
"""

from __future__ import annotations

import csv
import datetime as dt
import os
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from telenow.domain import (
    OBSERVATION_WINDOW,
    AgeGroup,
    CellKey,
    MunicipalityMap,
    ODRecord,
    PanelCell,
    Quarter,
    Region,
    Sex,
    cell_sort_key,
)
from telenow.errors import (
    BadDate,
    DuplicateCode,
    DuplicateKey,
    InputError,
    InvalidValue,
    MalformedRow,
    MissingColumn,
    MissingCombination,
    NegativeVolume,
    ShareOutOfRange,
    UnknownMunicipality,
    UnknownRegion,
)

OD_COLUMNS = ("date", "origin", "destination", "age_group", "sex", "volume")
LFS_AGGREGATE_COLUMNS = ("region", "sex", "age_group", "quarter", "employment", "teleworking", "sample_n")
LFS_MICRO_COLUMNS = ("region", "sex", "age", "quarter", "employed", "teleworked", "weight")
MUNICIPALITY_COLUMNS = ("code", "region")
CENSUS_COLUMNS = ("region", "sex", "outside_share")
PANEL_COLUMNS = ("region", "sex", "age_group", "quarter", "teleworking", "mobility", "employment")


@dataclass(frozen=True)
class LfsAggregateRow:
    region: Region
    sex: Sex
    age: AgeGroup
    quarter: Quarter
    employment: float
    teleworking: Optional[float]
    sample_n: int

    @property
    def key(self) -> CellKey:
        return (self.region, self.sex, self.age, self.quarter)


@dataclass(frozen=True)
class LfsMicroRow:
    region: Region
    sex: Sex
    age: int
    quarter: Quarter
    employed: bool
    teleworked: bool
    weight: float

    def __post_init__(self):
        if not self.weight > 0:
            raise InvalidValue(f"survey weight must be positive, got {self.weight!r}")
        if self.teleworked and not self.employed:
            raise InvalidValue("teleworked respondent must be employed")


@dataclass(frozen=True)
class CensusMobilityRow:
    region: Region
    sex: Sex
    outside_share: float


# -- low-level helpers -------------------------------------------------------


def _open_rows(path, columns: Sequence[str]) -> Iterator[Tuple[int, Dict[str, str]]]:
    """Yield ``(line_number, row)`` after checking the header."""
    path = os.fspath(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise InputError("file not found", path=path) from None
    except IsADirectoryError:
        raise InputError("is a directory, expected a CSV file", path=path) from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError("empty file (no header)", line=1, path=path) from None
        header = [h.strip().lstrip("﻿") for h in header]
        for name in columns:
            if name not in header:
                raise MissingColumn(name, 1, path)
        index = {name: header.index(name) for name in columns}
        for raw in reader:
            line = reader.line_num
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise MalformedRow(f"expected {len(header)} fields, got {len(raw)}", line, path)
            yield line, {name: raw[i].strip() for name, i in index.items()}


def _parsed(path, columns, parse_row: Callable[[int, Dict[str, str]], object]) -> list:
    out = []
    try:
        for line, row in _open_rows(path, columns):
            try:
                out.append(parse_row(line, row))
            except InputError:
                raise
            except (InvalidValue, ValueError) as exc:
                raise MalformedRow(str(exc), line) from None
    except InputError as exc:
        if exc.path is None:
            exc.at(os.fspath(path))
        raise
    return out


def _share(text: str, name: str, line: int, *, optional: bool = False) -> Optional[float]:
    if text == "":
        if optional:
            return None
        raise MalformedRow(f"{name} is empty", line)
    try:
        value = float(text)
    except ValueError:
        raise MalformedRow(f"{name} {text!r} is not a number", line) from None
    if not 0.0 <= value <= 1.0:
        raise ShareOutOfRange(f"{name} {text} outside [0, 1] (shares are fractions, not percents)", line)
    return value


def _region(text: str, line: int) -> Region:
    try:
        return Region.parse(text)
    except InvalidValue:
        raise UnknownRegion(text, line) from None


def _flag(text: str, name: str, line: int) -> bool:
    if text in ("1", "0"):
        return text == "1"
    raise MalformedRow(f"{name} must be 0 or 1, got {text!r}", line)


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _write(target, columns: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    """Write to a path, or to an open text stream."""
    if hasattr(target, "write"):
        writer = csv.writer(target, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
        return
    with open(os.fspath(target), "w", newline="", encoding="utf-8") as fh:
        _write(fh, columns, rows)


# -- OD matrices -------------------------------------------------------------


def parse_od_csv(path, munimap: MunicipalityMap, window: Tuple[dt.date, dt.date] = OBSERVATION_WINDOW) -> List[ODRecord]:
    """Read daily origin-destination volumes.

    Parameters
    ----------
    path : path-like
        CSV with header ``date,origin,destination,age_group,sex,volume``.
    munimap : MunicipalityMap
        Both endpoint codes of every row must appear here.
    window : (date, date)
        Inclusive observation window; rows dated outside it are rejected.
    """
    first, last = window

    def row(line, r):
        try:
            day = dt.date.fromisoformat(r["date"])
        except ValueError:
            raise BadDate(f"bad date {r['date']!r} (expected YYYY-MM-DD)", line) from None
        if len(r["date"]) != 10:
            raise BadDate(f"bad date {r['date']!r} (expected YYYY-MM-DD)", line)
        if not first <= day <= last:
            raise BadDate(f"date {day} outside observation window {first}..{last}", line)
        for col in ("origin", "destination"):
            if r[col] not in munimap:
                raise UnknownMunicipality(r[col], line)
        try:
            volume = int(r["volume"])
        except ValueError:
            raise MalformedRow(f"volume {r['volume']!r} is not an integer", line) from None
        if volume < 0:
            raise NegativeVolume(f"negative volume {volume}", line)
        return ODRecord(
            date=day,
            origin=r["origin"],
            destination=r["destination"],
            age=AgeGroup.parse(r["age_group"]),
            sex=Sex.parse(r["sex"]),
            volume=volume,
        )

    return _parsed(path, OD_COLUMNS, row)


def write_od_csv(path, records: Iterable[ODRecord]) -> None:
    _write(
        path,
        OD_COLUMNS,
        ((r.date.isoformat(), r.origin, r.destination, r.age.value, r.sex.value, r.volume) for r in records),
    )


# -- LFS ---------------------------------------------------------------------


def parse_lfs_aggregate_csv(path) -> List[LfsAggregateRow]:
    seen: Dict[CellKey, int] = {}

    def row(line, r):
        out = LfsAggregateRow(
            region=_region(r["region"], line),
            sex=Sex.parse(r["sex"]),
            age=AgeGroup.parse(r["age_group"]),
            quarter=Quarter.parse(r["quarter"]),
            employment=_share(r["employment"], "employment", line),
            teleworking=_share(r["teleworking"], "teleworking", line, optional=True),
            sample_n=_positive_int(r["sample_n"], "sample_n", line),
        )
        if out.key in seen:
            raise DuplicateKey(_key_text(out.key), line)
        seen[out.key] = line
        return out

    return _parsed(path, LFS_AGGREGATE_COLUMNS, row)


def _positive_int(text: str, name: str, line: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise MalformedRow(f"{name} {text!r} is not an integer", line) from None
    if value <= 0:
        raise MalformedRow(f"{name} must be positive, got {value}", line)
    return value


def _key_text(key) -> str:
    return "(" + ", ".join(str(k) for k in key) + ")"


def write_lfs_aggregate_csv(path, rows: Iterable[LfsAggregateRow]) -> None:
    _write(
        path,
        LFS_AGGREGATE_COLUMNS,
        (
            (r.region.value, r.sex.value, r.age.value, str(r.quarter), _fmt(r.employment), _fmt(r.teleworking), r.sample_n)
            for r in rows
        ),
    )


def parse_lfs_micro_csv(path) -> List[LfsMicroRow]:
    def row(line, r):
        try:
            age = int(r["age"])
        except ValueError:
            raise MalformedRow(f"age {r['age']!r} is not an integer", line) from None
        try:
            weight = float(r["weight"])
        except ValueError:
            raise MalformedRow(f"weight {r['weight']!r} is not a number", line) from None
        employed = _flag(r["employed"], "employed", line)
        teleworked = _flag(r["teleworked"], "teleworked", line) if r["teleworked"] != "" else False
        return LfsMicroRow(
            region=_region(r["region"], line),
            sex=Sex.parse(r["sex"]),
            age=age,
            quarter=Quarter.parse(r["quarter"]),
            employed=employed,
            teleworked=teleworked,
            weight=weight,
        )

    return _parsed(path, LFS_MICRO_COLUMNS, row)


def write_lfs_micro_csv(path, rows: Iterable[LfsMicroRow]) -> None:
    _write(
        path,
        LFS_MICRO_COLUMNS,
        (
            (r.region.value, r.sex.value, r.age, str(r.quarter), int(r.employed), int(r.teleworked), _fmt(r.weight))
            for r in rows
        ),
    )


# -- municipality map --------------------------------------------------------


def parse_municipality_map(path) -> MunicipalityMap:
    """Read ``code,region`` pairs.

    Sub-municipal zones (e.g. Milan's ``MI-03``) are ordinary distinct codes.
    Repeating a code with the same region is tolerated.
    """
    regions: Dict[str, Region] = {}

    def row(line, r):
        code = r["code"]
        if code == "":
            raise MalformedRow("empty municipality code", line)
        region = _region(r["region"], line)
        if code in regions and regions[code] is not region:
            raise DuplicateCode(code, line)
        regions[code] = region

    _parsed(path, MUNICIPALITY_COLUMNS, row)
    return MunicipalityMap(regions)


def write_municipality_map(path, munimap: MunicipalityMap) -> None:
    _write(path, MUNICIPALITY_COLUMNS, ((code, region.value) for code, region in munimap.regions.items()))


# -- census ------------------------------------------------------------------


def parse_census_csv(path) -> List[CensusMobilityRow]:
    """Read the 40-row (region, sex) census share of out-of-municipality workers."""
    seen = set()

    def row(line, r):
        out = CensusMobilityRow(
            region=_region(r["region"], line),
            sex=Sex.parse(r["sex"]),
            outside_share=_share(r["outside_share"], "outside_share", line),
        )
        key = (out.region, out.sex)
        if key in seen:
            raise DuplicateKey(_key_text(key), line)
        seen.add(key)
        return out

    rows = _parsed(path, CENSUS_COLUMNS, row)
    for region in Region:
        for sex in Sex:
            if (region, sex) not in seen:
                raise MissingCombination(region, sex, os.fspath(path))
    return rows


def write_census_csv(path, rows: Iterable[CensusMobilityRow]) -> None:
    _write(path, CENSUS_COLUMNS, ((r.region.value, r.sex.value, _fmt(r.outside_share)) for r in rows))


# -- panel -------------------------------------------------------------------


def read_panel_csv(path) -> List[PanelCell]:
    """Read a panel written by :func:`write_panel_csv`.

    ``teleworking`` and ``employment`` may be blank for quarters without
    survey data.
    """
    seen = set()

    def row(line, r):
        try:
            mobility = float(r["mobility"])
        except ValueError:
            raise MalformedRow(f"mobility {r['mobility']!r} is not a number", line) from None
        if not 0.0 < mobility <= 1.0:
            raise ShareOutOfRange(f"mobility {r['mobility']} outside (0, 1]", line)
        cell = PanelCell(
            region=_region(r["region"], line),
            sex=Sex.parse(r["sex"]),
            age=AgeGroup.parse(r["age_group"]),
            quarter=Quarter.parse(r["quarter"]),
            teleworking=_share(r["teleworking"], "teleworking", line, optional=True),
            mobility=mobility,
            employment=_share(r["employment"], "employment", line, optional=True),
        )
        if cell.key in seen:
            raise DuplicateKey(_key_text(cell.key), line)
        seen.add(cell.key)
        return cell

    return _parsed(path, PANEL_COLUMNS, row)


def write_panel_csv(path, cells: Iterable[PanelCell]) -> None:
    ordered = sorted(cells, key=lambda c: cell_sort_key(c.key))
    _write(
        path,
        PANEL_COLUMNS,
        (
            (c.region.value, c.sex.value, c.age.value, str(c.quarter), _fmt(c.teleworking), _fmt(c.mobility), _fmt(c.employment))
            for c in ordered
        ),
    )
