import datetime as dt

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from telenow.aggregation import (
    DailyMobilityShare,
    aggregate_lfs_micro,
    assemble_panel,
    daily_mobility_share,
    mobility_panel,
    quarterly_mobility_share,
)
from telenow.domain import AgeGroup, MunicipalityMap, ODRecord, Quarter, Region, Sex
from telenow.errors import EmptyQuarter, InvalidValue, MissingCell
from telenow.ingestion import LfsAggregateRow, LfsMicroRow

MONDAY = dt.date(2020, 9, 7)
SATURDAY = dt.date(2020, 9, 12)
Q3 = Quarter(2020, 3)
Q4 = Quarter(2020, 4)
F, M = Sex.FEMALE, Sex.MALE
A = AgeGroup.A25_34

MAP = MunicipalityMap(
    {"RM-001": Region.LAZIO, "LAZ001": Region.LAZIO, "LAZ002": Region.LAZIO,
     "MI-03": Region.LOMBARDIA, "MI-07": Region.LOMBARDIA, "UMB001": Region.UMBRIA}
)


def rec(origin, dest, volume, day=MONDAY, sex=F, age=A):
    return ODRecord(day, origin, dest, age, sex, volume)


def test_share_of_movers():
    (d,) = daily_mobility_share([rec("LAZ001", "LAZ001", 800), rec("LAZ001", "LAZ002", 200)], MAP, MONDAY)
    assert (d.region, d.sex, d.age) == (Region.LAZIO, F, A)
    assert (d.movers, d.total) == (200, 1000)
    assert d.share == 0.2


def test_weekend_is_empty():
    records = [rec("LAZ001", "LAZ002", 200, day=SATURDAY)]
    assert daily_mobility_share(records, MAP, SATURDAY) == []


def test_holiday_is_empty():
    assert daily_mobility_share([rec("LAZ001", "LAZ002", 5)], MAP, MONDAY, holidays={MONDAY}) == []


def test_sub_municipal_move_counts_as_mover():
    (d,) = daily_mobility_share([rec("MI-03", "MI-07", 50), rec("MI-03", "MI-03", 50)], MAP, MONDAY)
    assert d.region is Region.LOMBARDIA
    assert d.share == 0.5


def test_cross_region_destination_groups_by_origin():
    (d,) = daily_mobility_share([rec("UMB001", "LAZ001", 30), rec("UMB001", "UMB001", 70)], MAP, MONDAY)
    assert d.region is Region.UMBRIA and d.share == pytest.approx(0.3)


def test_zero_total_group_omitted():
    out = daily_mobility_share([rec("LAZ001", "LAZ002", 0), rec("UMB001", "UMB001", 10)], MAP, MONDAY)
    assert [d.region for d in out] == [Region.UMBRIA]


def test_wrong_date_rejected():
    with pytest.raises(InvalidValue):
        daily_mobility_share([rec("LAZ001", "LAZ002", 1, day=dt.date(2020, 9, 8))], MAP, MONDAY)


def _daily(share, day):
    return DailyMobilityShare(Region.LAZIO, F, A, day, round(share * 1000), 1000)


def _weekdays(quarter):
    d, out = quarter.start, []
    while d <= quarter.end:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def test_quarterly_mean():
    days = _weekdays(Q3)
    out = quarterly_mobility_share([_daily(0.2, days[0]), _daily(0.4, days[1])], Q3)
    assert out[(Region.LAZIO, F, A)] == pytest.approx(0.3, abs=1e-15)


def test_quarterly_single_day():
    assert quarterly_mobility_share([_daily(0.25, MONDAY)], Q3) == {(Region.LAZIO, F, A): 0.25}


def test_quarterly_constant():
    days = _weekdays(Q3)[:65]
    assert len(days) == 65
    out = quarterly_mobility_share([_daily(0.31, d) for d in days], Q3)
    assert out[(Region.LAZIO, F, A)] == pytest.approx(0.31, abs=1e-14)


def test_quarterly_empty():
    with pytest.raises(EmptyQuarter):
        quarterly_mobility_share([], Q3)


def test_quarterly_rejects_foreign_day():
    with pytest.raises(InvalidValue):
        quarterly_mobility_share([_daily(0.2, dt.date(2020, 10, 1))], Q3)


def test_mobility_panel_skips_weekends():
    records = [
        rec("LAZ001", "LAZ002", 100), rec("LAZ001", "LAZ001", 900),
        rec("LAZ001", "LAZ002", 900, day=SATURDAY), rec("LAZ001", "LAZ001", 100, day=SATURDAY),
    ]
    assert mobility_panel(records, MAP) == {(Region.LAZIO, F, A, Q3): 0.1}


# -- properties -----------------------------------------------------------------------

od_rows = st.lists(
    st.tuples(st.sampled_from(["LAZ001", "LAZ002", "RM-001"]), st.sampled_from(["LAZ001", "LAZ002", "RM-001"]),
              st.integers(0, 10_000)),
    min_size=1, max_size=30,
)


@given(od_rows)
def test_daily_share_bounds(rows):
    records = [rec(o, d, v) for o, d, v in rows]
    out = daily_mobility_share(records, MAP, MONDAY)
    total = sum(v for _, _, v in rows)
    if total == 0:
        assert out == []
        return
    (d,) = out
    assert 0.0 <= d.share <= 1.0
    diag_only = all(o == dd or v == 0 for o, dd, v in rows)
    assert (d.share == 0.0) == diag_only


@given(st.lists(st.integers(0, 1000), min_size=1, max_size=60))
def test_quarterly_mean_within_range(movers):
    days = _weekdays(Q3)
    daily = [DailyMobilityShare(Region.LAZIO, F, A, days[i], m, 1000) for i, m in enumerate(movers)]
    (mean,) = quarterly_mobility_share(daily, Q3).values()
    shares = [d.share for d in daily]
    assert min(shares) - 1e-15 <= mean <= max(shares) + 1e-15


# -- LFS micro aggregation ------------------------------------------------------------


def micro(employed, teleworked, weight=1.0, age=30, sex=F):
    return LfsMicroRow(Region.LAZIO, sex, age, Q3, employed, teleworked, weight)


def test_micro_equal_weights():
    rows = [micro(True, i < 3) for i in range(10)]
    (agg,) = aggregate_lfs_micro(rows)
    assert agg.teleworking == pytest.approx(0.3)
    assert agg.employment == 1.0
    assert agg.sample_n == 10


def test_micro_weighted_share():
    (agg,) = aggregate_lfs_micro([micro(True, True, 2.0), micro(True, False, 1.0)])
    assert agg.teleworking == pytest.approx(2 / 3)


def test_micro_employment_over_all_respondents():
    (agg,) = aggregate_lfs_micro([micro(True, False, 3.0), micro(False, False, 1.0)])
    assert agg.employment == pytest.approx(0.75)
    assert agg.teleworking == 0.0


def test_micro_age_filter():
    rows = [micro(True, True, age=22), micro(True, False, age=30), micro(True, True, age=70)]
    (agg,) = aggregate_lfs_micro(rows)
    assert agg.teleworking == 0.0 and agg.sample_n == 1


def test_micro_no_employed_leaves_teleworking_undefined():
    (agg,) = aggregate_lfs_micro([micro(False, False)])
    assert agg.teleworking is None and agg.employment == 0.0


def test_micro_bins_age_groups():
    out = aggregate_lfs_micro([micro(True, False, age=34), micro(True, False, age=35)])
    assert [r.age for r in out] == [AgeGroup.A25_34, AgeGroup.A35_44]


# -- panel assembly ---------------------------------------------------------------------


def _complete(quarters=(Q3, Q4)):
    mobility, lfs = {}, []
    for region in Region:
        for sex in Sex:
            for age in AgeGroup:
                for q in quarters:
                    mobility[(region, sex, age, q)] = 0.2
                    lfs.append(LfsAggregateRow(region, sex, age, q, 0.6, 0.15, 100))
    return mobility, lfs


def test_complete_panel_has_320_cells():
    mobility, lfs = _complete()
    panel = assemble_panel(mobility, lfs, {Q3, Q4})
    assert len(panel) == 320
    assert {c.key for c in panel} == set(mobility)


def test_single_quarter_panel():
    mobility, lfs = _complete()
    assert len(assemble_panel(mobility, lfs, {Q3})) == 160


def test_quarters_outside_window_ignored():
    mobility, lfs = _complete((Q3, Q4, Quarter(2020, 2)))
    del mobility[(Region.ABRUZZO, F, A, Quarter(2020, 2))]
    assert len(assemble_panel(mobility, lfs, {Q3, Q4})) == 320


def test_missing_mobility_cell():
    mobility, lfs = _complete()
    key = (Region.MOLISE, F, AgeGroup.A55_64, Q4)
    del mobility[key]
    with pytest.raises(MissingCell) as info:
        assemble_panel(mobility, lfs, {Q3, Q4})
    assert info.value.keys == [key]
    assert "Molise" in str(info.value)


def test_missing_cells_listed_from_both_sides():
    mobility, lfs = _complete()
    k1 = (Region.MOLISE, F, AgeGroup.A55_64, Q4)
    k2 = lfs[0].key
    del mobility[k1]
    lfs = lfs[1:]
    with pytest.raises(MissingCell) as info:
        assemble_panel(mobility, lfs, {Q3, Q4})
    assert set(info.value.keys) == {k1, k2}


def test_empty_window_rejected():
    mobility, lfs = _complete()
    with pytest.raises(InvalidValue):
        assemble_panel(mobility, lfs, set())
