"""Teleworking predictions for quarters without survey data."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from telenow.analysis import GapCluster, classify_gap_cluster
from telenow.domain import AgeGroup, CellKey, GroupKey, PanelCell, Quarter, Region, Sex, cell_sort_key
from telenow.errors import InvalidValue, MissingEmploymentBase, MissingMobility, MissingSex
from telenow.regression import FitResult, predict_value

NOWCAST_COLUMNS = (
    "region", "sex", "age_group", "quarter", "predicted", "predicted_clamped", "mobility", "employment", "source",
)


@dataclass(frozen=True)
class HoldLastObserved:
    """Reuse each cell's latest observed employment rate."""


@dataclass(frozen=True)
class Explicit:
    """Employment per (region, sex, age, quarter); other cells hold the last observed value."""

    employment: Mapping[CellKey, float] = field(default_factory=dict)

    def __post_init__(self):
        for key, value in self.employment.items():
            if not 0.0 <= value <= 1.0:
                raise InvalidValue(f"employment {value} for {key} outside [0, 1]")


EmploymentRule = Union[HoldLastObserved, Explicit]


@dataclass(frozen=True)
class Scenario:
    target_quarters: Tuple[Quarter, ...]
    employment_rule: EmploymentRule = HoldLastObserved()

    def __post_init__(self):
        quarters = tuple(sorted(set(self.target_quarters)))
        if not quarters:
            raise InvalidValue("a scenario needs at least one target quarter")
        object.__setattr__(self, "target_quarters", quarters)


@dataclass(frozen=True)
class NowcastCell:
    region: Region
    sex: Sex
    age: AgeGroup
    quarter: Quarter
    predicted: float
    mobility: float
    employment: float
    source: str = "nowcast"

    @property
    def predicted_clamped(self) -> float:
        return min(max(self.predicted, 0.0), 1.0)

    @property
    def key(self) -> CellKey:
        return (self.region, self.sex, self.age, self.quarter)


@dataclass(frozen=True)
class NowcastResult:
    cells: Tuple[NowcastCell, ...]

    def get(self, key: CellKey) -> NowcastCell:
        for c in self.cells:
            if c.key == key:
                return c
        raise KeyError(key)

    def to_csv(self) -> str:
        return cells_to_csv(self.cells)


def cells_to_csv(cells: Iterable[NowcastCell]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(NOWCAST_COLUMNS)
    for c in sorted(cells, key=lambda c: cell_sort_key(c.key)):
        w.writerow(
            [
                c.region.value, c.sex.value, c.age.value, str(c.quarter),
                f"{c.predicted:.6g}", f"{c.predicted_clamped:.6g}",
                f"{c.mobility:.6g}", f"{c.employment:.6g}", c.source,
            ]
        )
    return buf.getvalue()


def last_observed_employment(cells: Iterable[PanelCell], before: Optional[Quarter] = None) -> Dict[CellKey, float]:
    """Employment rates of panel cells that carry one, optionally only before a quarter."""
    return {
        c.key: c.employment
        for c in cells
        if c.employment is not None and (before is None or c.quarter < before)
    }


def nowcast_quarters(
    fit: FitResult,
    mobility: Mapping[CellKey, float],
    last_observed_employment: Mapping[CellKey, float],
    scenario: Scenario,
) -> NowcastResult:
    """Predict every (region, sex, age) cell in each target quarter.

    The cells are those with an observed employment base plus any with
    mobility in a target quarter. The employment base is the latest observed
    quarter per (region, sex, age); an :class:`Explicit` rule overrides
    individual cells.
    """
    latest: Dict[GroupKey, Tuple[Quarter, float]] = {}
    for (region, sex, age, q), value in last_observed_employment.items():
        group = (region, sex, age)
        if group not in latest or latest[group][0] < q:
            latest[group] = (q, value)
    if latest:
        last_obs = max(q for q, _ in latest.values())
        if scenario.target_quarters[0] <= last_obs:
            raise InvalidValue(
                f"target quarters must follow the last observed quarter {last_obs}, got {scenario.target_quarters[0]}"
            )
    overrides = scenario.employment_rule.employment if isinstance(scenario.employment_rule, Explicit) else {}

    groups = set(latest)
    for key in mobility:
        if key[3] in scenario.target_quarters:
            groups.add(key[:3])

    out = []
    for region, sex, age in sorted(groups, key=lambda g: (g[0].order, g[1].order, g[2].order)):
        for q in scenario.target_quarters:
            key = (region, sex, age, q)
            if key not in mobility:
                raise MissingMobility(key)
            if key in overrides:
                employment = overrides[key]
            elif (region, sex, age) in latest:
                employment = latest[(region, sex, age)][1]
            else:
                raise MissingEmploymentBase(key)
            m = mobility[key]
            out.append(NowcastCell(region, sex, age, q, predict_value(fit, region, sex, m, employment), m, employment))
    return NowcastResult(tuple(out))


def observed_cells(panel: Iterable[PanelCell]) -> List[NowcastCell]:
    """Survey-observed cells in the nowcast layout, for plotting series.

    ``predicted`` carries the observed survey share and ``source`` is
    ``"observed"``.
    """
    return [
        NowcastCell(c.region, c.sex, c.age, c.quarter, c.teleworking, c.mobility, c.employment, "observed")
        for c in panel
        if c.teleworking is not None
    ]


@dataclass(frozen=True)
class GapRow:
    region: Region
    female: float
    male: float
    gap: float
    cluster: GapCluster


def gender_gap_table(result: NowcastResult, age: AgeGroup, quarter: Quarter) -> List[GapRow]:
    """Female-minus-male predicted share per region for one age group and quarter."""
    by_region: Dict[Region, Dict[Sex, float]] = {}
    for c in result.cells:
        if c.age is age and c.quarter == quarter:
            by_region.setdefault(c.region, {})[c.sex] = c.predicted
    rows = []
    for region in sorted(by_region, key=lambda r: r.order):
        shares = by_region[region]
        for sex in Sex:
            if sex not in shares:
                raise MissingSex(region, sex)
        gap = shares[Sex.FEMALE] - shares[Sex.MALE]
        rows.append(GapRow(region, shares[Sex.FEMALE], shares[Sex.MALE], gap, classify_gap_cluster(gap)))
    return rows


def gap_table_csv(rows: Sequence[GapRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["region", "female", "male", "gap", "cluster"])
    for r in rows:
        w.writerow([r.region.value, f"{r.female:.6g}", f"{r.male:.6g}", f"{r.gap:.6g}", r.cluster.value])
    return buf.getvalue()
