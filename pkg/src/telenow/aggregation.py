"""From raw OD records and survey rows to the quarterly regression panel."""

from __future__ import annotations

import datetime as dt
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Collection, Dict, Iterable, List, Mapping, Optional, Sequence

from telenow.domain import (
    AgeGroup,
    CellKey,
    GroupKey,
    MunicipalityMap,
    ODRecord,
    PanelCell,
    Quarter,
    Region,
    Sex,
    cell_sort_key,
)
from telenow.errors import EmptyQuarter, InvalidValue, MissingCell
from telenow.ingestion import LfsAggregateRow, LfsMicroRow

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DailyMobilityShare:
    region: Region
    sex: Sex
    age: AgeGroup
    date: dt.date
    movers: int
    total: int

    def __post_init__(self):
        if self.total <= 0:
            raise InvalidValue("total volume must be positive")
        if not 0 <= self.movers <= self.total:
            raise InvalidValue(f"movers {self.movers} outside [0, {self.total}]")
        if not is_weekday(self.date):
            raise InvalidValue(f"{self.date} is not a weekday")

    @property
    def share(self) -> float:
        return self.movers / self.total

    @property
    def group(self) -> GroupKey:
        return (self.region, self.sex, self.age)


def is_weekday(day: dt.date, holidays: Collection[dt.date] = ()) -> bool:
    return day.weekday() < 5 and day not in holidays


def daily_mobility_share(
    records: Iterable[ODRecord],
    munimap: MunicipalityMap,
    date: dt.date,
    holidays: Collection[dt.date] = (),
) -> List[DailyMobilityShare]:
    """Share of users whose daytime area differs from their night-time area.

    Groups are keyed by the region of the origin (residence) code. Any row whose
    destination code differs from its origin code counts as a mover, so moves
    between sub-municipal zones of the same city count too. Weekend dates and
    ``holidays`` give an empty result; groups with zero total volume are
    omitted.
    """
    if not is_weekday(date, holidays):
        return []
    movers: Dict[GroupKey, int] = defaultdict(int)
    totals: Dict[GroupKey, int] = defaultdict(int)
    for rec in records:
        if rec.date != date:
            raise InvalidValue(f"record dated {rec.date} passed for day {date}")
        key = (munimap[rec.origin], rec.sex, rec.age)
        totals[key] += rec.volume
        if not rec.is_diagonal:
            movers[key] += rec.volume
    out = [
        DailyMobilityShare(region, sex, age, date, movers[(region, sex, age)], total)
        for (region, sex, age), total in totals.items()
        if total > 0
    ]
    out.sort(key=lambda d: (d.region.order, d.sex.order, d.age.order))
    return out


def quarterly_mobility_share(daily: Sequence[DailyMobilityShare], quarter: Quarter) -> Dict[GroupKey, float]:
    """Unweighted mean of daily shares per (region, sex, age)."""
    if not daily:
        raise EmptyQuarter(f"no daily mobility values for {quarter}")
    sums: Dict[GroupKey, float] = defaultdict(float)
    counts: Dict[GroupKey, int] = defaultdict(int)
    for d in daily:
        if not quarter.contains(d.date):
            raise InvalidValue(f"daily value dated {d.date} is outside {quarter}")
        sums[d.group] += d.share
        counts[d.group] += 1
    return {g: sums[g] / counts[g] for g in sums}


def mobility_panel(
    records: Iterable[ODRecord],
    munimap: MunicipalityMap,
    quarters: Optional[Collection[Quarter]] = None,
    holidays: Collection[dt.date] = (),
) -> Dict[CellKey, float]:
    """Quarterly mobility share for every (region, sex, age, quarter) present.

    Records are bucketed by day, reduced with :func:`daily_mobility_share`
    and averaged with :func:`quarterly_mobility_share`. ``quarters`` restricts
    the output.
    """
    by_day: Dict[dt.date, List[ODRecord]] = defaultdict(list)
    for rec in records:
        by_day[rec.date].append(rec)
    by_quarter: Dict[Quarter, List[DailyMobilityShare]] = defaultdict(list)
    for day in sorted(by_day):
        q = Quarter.of(day)
        if quarters is not None and q not in quarters:
            continue
        by_quarter[q].extend(daily_mobility_share(by_day[day], munimap, day, holidays))
    out: Dict[CellKey, float] = {}
    for q in sorted(by_quarter):
        if not by_quarter[q]:
            continue
        for (region, sex, age), share in quarterly_mobility_share(by_quarter[q], q).items():
            out[(region, sex, age, q)] = share
    return dict(sorted(out.items(), key=lambda kv: cell_sort_key(kv[0])))


def aggregate_lfs_micro(rows: Iterable[LfsMicroRow]) -> List[LfsAggregateRow]:
    """Survey-weighted employment and teleworking shares per cell.

    Respondents outside ages 25-64 are dropped. Employment is weighted over
    everyone in the cell, teleworking over the employed only; a cell with no
    employed weight is emitted with ``teleworking=None``.
    """
    total = defaultdict(float)
    employed = defaultdict(float)
    teleworked = defaultdict(float)
    count = defaultdict(int)
    for r in rows:
        age = AgeGroup.from_years(r.age)
        if age is None:
            continue
        key = (r.region, r.sex, age, r.quarter)
        total[key] += r.weight
        count[key] += 1
        if r.employed:
            employed[key] += r.weight
            if r.teleworked:
                teleworked[key] += r.weight
    out = []
    for key in sorted(total, key=cell_sort_key):
        emp = employed[key]
        if emp > 0:
            tele = min(teleworked[key] / emp, 1.0)
        else:
            log.warning("no employed respondents in %s; teleworking left undefined", "/".join(map(str, key)))
            tele = None
        region, sex, age, quarter = key
        out.append(
            LfsAggregateRow(
                region=region,
                sex=sex,
                age=age,
                quarter=quarter,
                employment=min(emp / total[key], 1.0),
                teleworking=tele,
                sample_n=count[key],
            )
        )
    return out


def assemble_panel(
    mobility: Mapping[CellKey, float],
    lfs: Iterable[LfsAggregateRow],
    include_quarters: Collection[Quarter],
) -> List[PanelCell]:
    """Inner join of quarterly mobility and survey rows on the cell key.

    Only quarters in ``include_quarters`` are considered; within them, a key
    present in one source but not the other is an error.
    """
    if not include_quarters:
        raise InvalidValue("include_quarters must not be empty")
    include = set(include_quarters)
    lfs_by_key = {row.key: row for row in lfs if row.quarter in include}
    mob_keys = {k for k in mobility if k[3] in include}
    only_mob = sorted(mob_keys - lfs_by_key.keys(), key=cell_sort_key)
    only_lfs = sorted(lfs_by_key.keys() - mob_keys, key=cell_sort_key)
    if only_mob or only_lfs:
        raise MissingCell(only_mob, only_lfs)
    cells = []
    for key in sorted(mob_keys, key=cell_sort_key):
        row = lfs_by_key[key]
        cells.append(
            PanelCell(
                region=key[0],
                sex=key[1],
                age=key[2],
                quarter=key[3],
                teleworking=row.teleworking,
                mobility=mobility[key],
                employment=row.employment,
            )
        )
    return cells


def mobility_only_cells(
    mobility: Mapping[CellKey, float],
    lfs: Iterable[LfsAggregateRow] = (),
    exclude_quarters: Collection[Quarter] = (),
) -> List[PanelCell]:
    """Cells outside the fit window, carrying whatever survey values exist.

    Used to write the nowcast-ready part of a panel: mobility is always
    present, employment and teleworking only where the survey covers the cell.
    """
    lfs_by_key = {row.key: row for row in lfs}
    out = []
    for key in sorted(mobility, key=cell_sort_key):
        if key[3] in exclude_quarters:
            continue
        row = lfs_by_key.get(key)
        out.append(
            PanelCell(
                region=key[0],
                sex=key[1],
                age=key[2],
                quarter=key[3],
                teleworking=row.teleworking if row is not None else None,
                mobility=mobility[key],
                employment=row.employment if row is not None else None,
            )
        )
    return out
