"""Synthetic inputs generated from known coefficients.

Random draws come from numpy's ``Generator`` over the PCG64 bit generator,
seeded once per call; the Gaussian noise uses numpy's ziggurat transform of
that stream. Both algorithms are fixed by numpy's stream-compatibility
policy, so a seed reproduces the same data on every platform.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from telenow.domain import (
    DEFAULT_FIT_WINDOW,
    DEFAULT_TARGET_QUARTERS,
    OBSERVATION_WINDOW,
    AgeGroup,
    GroupKey,
    MunicipalityMap,
    ODRecord,
    PanelCell,
    Quarter,
    Region,
    Sex,
)
from telenow.errors import InvalidValue
from telenow.ingestion import (
    CensusMobilityRow,
    LfsAggregateRow,
    write_census_csv,
    write_lfs_aggregate_csv,
    write_municipality_map,
    write_od_csv,
)
from telenow.regression import (
    DEFAULT_REFERENCE,
    EMPLOYMENT,
    INTERCEPT,
    LOG_MOBILITY,
    MOBILITY,
    dummy_label,
)

log = logging.getLogger(__name__)

M, F = Sex.MALE, Sex.FEMALE

# Published estimates of the fitted model (Veneto:M is the omitted pair).
PUBLISHED_DUMMIES: Dict[Tuple[Region, Sex], float] = {
    (Region.ABRUZZO, M): -0.011, (Region.ABRUZZO, F): -0.029,
    (Region.BASILICATA, M): -0.053, (Region.BASILICATA, F): -0.034,
    (Region.CALABRIA, M): -0.115, (Region.CALABRIA, F): -0.049,
    (Region.CAMPANIA, M): -0.045, (Region.CAMPANIA, F): 0.004,
    (Region.EMILIA_ROMAGNA, M): -0.018, (Region.EMILIA_ROMAGNA, F): -0.048,
    (Region.FRIULI_VENEZIA_GIULIA, M): -0.007, (Region.FRIULI_VENEZIA_GIULIA, F): 0.002,
    (Region.LAZIO, M): 0.072, (Region.LAZIO, F): 0.094,
    (Region.LIGURIA, M): -0.021, (Region.LIGURIA, F): -0.043,
    (Region.LOMBARDIA, M): 0.076, (Region.LOMBARDIA, F): 0.083,
    (Region.MARCHE, M): -0.047, (Region.MARCHE, F): -0.044,
    (Region.MOLISE, M): -0.033, (Region.MOLISE, F): -0.014,
    (Region.PIEMONTE, M): 0.020, (Region.PIEMONTE, F): 0.012,
    (Region.PUGLIA, M): -0.130, (Region.PUGLIA, F): -0.124,
    (Region.SARDEGNA, M): -0.045, (Region.SARDEGNA, F): -0.023,
    (Region.SICILIA, M): -0.118, (Region.SICILIA, F): -0.107,
    (Region.TOSCANA, M): -0.015, (Region.TOSCANA, F): -0.027,
    (Region.TRENTINO_ALTO_ADIGE, M): 0.009, (Region.TRENTINO_ALTO_ADIGE, F): 0.0002,
    (Region.UMBRIA, M): -0.059, (Region.UMBRIA, F): -0.057,
    (Region.VALLE_D_AOSTA, M): 0.022, (Region.VALLE_D_AOSTA, F): 0.073,
    (Region.VENETO, F): -0.031,
}


def published_coefficients() -> Dict[str, float]:
    """Published estimates keyed by design-matrix column label."""
    out = {INTERCEPT: -0.091, EMPLOYMENT: 0.041, LOG_MOBILITY: -0.169}
    for region in Region:
        for sex in Sex:
            if (region, sex) in PUBLISHED_DUMMIES:
                out[dummy_label(region, sex)] = PUBLISHED_DUMMIES[(region, sex)]
    return out


@dataclass(frozen=True)
class GeneratorConfig:
    """Ground truth and sampling ranges for synthetic data.

    ``coefficients`` are keyed by column label; a missing label counts as
    zero. The mobility effect is logarithmic when ``log_mobility`` is present
    and linear when only ``mobility`` is. The default mobility range keeps
    every noiseless cell strictly inside [0, 1] under the published
    coefficients.
    """

    seed: int = 0
    coefficients: Mapping[str, float] = field(default_factory=published_coefficients)
    noise_sigma: float = 0.035
    quarters: Tuple[Quarter, ...] = DEFAULT_FIT_WINDOW
    mobility_range: Tuple[float, float] = (0.03, 0.15)
    mobility_bounds: Mapping[GroupKey, Tuple[float, float]] = field(default_factory=dict)
    employment_range: Tuple[float, float] = (0.45, 0.85)
    reference: Tuple[Region, Sex] = DEFAULT_REFERENCE
    target_quarters: Tuple[Quarter, ...] = DEFAULT_TARGET_QUARTERS
    od_group_total: int = 1000
    daily_sigma: float = 0.005

    def __post_init__(self):
        if not self.noise_sigma >= 0:
            raise InvalidValue("noise_sigma must be non-negative")
        for lo, hi in [self.mobility_range, *self.mobility_bounds.values()]:
            if not 0 < lo <= hi <= 1:
                raise InvalidValue(f"mobility bounds ({lo}, {hi}) must satisfy 0 < lo <= hi <= 1")
        lo, hi = self.employment_range
        if not 0 <= lo <= hi <= 1:
            raise InvalidValue("employment_range must lie within [0, 1]")
        if not self.quarters:
            raise InvalidValue("at least one quarter is required")

    @property
    def mobility_term(self) -> str:
        if LOG_MOBILITY in self.coefficients:
            return LOG_MOBILITY
        return MOBILITY if MOBILITY in self.coefficients else LOG_MOBILITY

    def bounds(self, group: GroupKey) -> Tuple[float, float]:
        return self.mobility_bounds.get(group, self.mobility_range)


def model_value(config: GeneratorConfig, region: Region, sex: Sex, mobility: float, employment: float) -> float:
    """Noiseless model value for one cell under ``config.coefficients``."""
    c = config.coefficients
    dummy = 0.0 if (region, sex) == config.reference else c.get(dummy_label(region, sex), 0.0)
    term = config.mobility_term
    m = math.log(mobility) if term == LOG_MOBILITY else mobility
    return c.get(INTERCEPT, 0.0) + dummy + c.get(term, 0.0) * m + c.get(EMPLOYMENT, 0.0) * employment


def _groups():
    for region in Region:
        for sex in Sex:
            for age in AgeGroup:
                yield region, sex, age


def _teleworking(value: float, label: str) -> float:
    if 0.0 <= value <= 1.0:
        return value
    log.warning("synthetic teleworking %.4f for %s clipped to [0, 1]", value, label)
    return min(max(value, 0.0), 1.0)


def generate_panel(config: GeneratorConfig = GeneratorConfig()) -> List[PanelCell]:
    """Panel of cells whose teleworking share follows the model plus Gaussian noise.

    Cells are ordered region, sex, age, quarter. Mobility and employment are
    uniform within the configured bounds.
    """
    rng = np.random.default_rng(config.seed)
    quarters = sorted(config.quarters)
    cells = []
    for region, sex, age in _groups():
        lo, hi = config.bounds((region, sex, age))
        for q in quarters:
            m = float(rng.uniform(lo, hi))
            e = float(rng.uniform(*config.employment_range))
            noise = float(rng.normal(0.0, config.noise_sigma)) if config.noise_sigma > 0 else 0.0
            value = model_value(config, region, sex, m, e) + noise
            label = f"{region}/{sex}/{age}/{q}"
            cells.append(PanelCell(region, sex, age, q, _teleworking(value, label), m, e))
    return cells


# -- municipalities and OD records ----------------------------------------------

_REGION_CODES = {
    Region.ABRUZZO: "ABR", Region.BASILICATA: "BAS", Region.CALABRIA: "CAL", Region.CAMPANIA: "CAM",
    Region.EMILIA_ROMAGNA: "EMR", Region.FRIULI_VENEZIA_GIULIA: "FVG", Region.LAZIO: "LAZ",
    Region.LIGURIA: "LIG", Region.LOMBARDIA: "LOM", Region.MARCHE: "MAR", Region.MOLISE: "MOL",
    Region.PIEMONTE: "PIE", Region.PUGLIA: "PUG", Region.SARDEGNA: "SAR", Region.SICILIA: "SIC",
    Region.TOSCANA: "TOS", Region.TRENTINO_ALTO_ADIGE: "TAA", Region.UMBRIA: "UMB",
    Region.VALLE_D_AOSTA: "VDA", Region.VENETO: "VEN",
}
MILAN_ZONES = tuple(f"MI-{i:02d}" for i in range(1, 10))
ROME_ZONES = tuple(f"RM-{i:03d}" for i in range(1, 109))


def synthetic_municipality_map() -> MunicipalityMap:
    """Three municipalities per region plus Milan's 9 and Rome's 108 zones."""
    regions: Dict[str, Region] = {}
    for region in Region:
        for i in range(1, 4):
            regions[f"{_REGION_CODES[region]}{i:03d}"] = region
    regions.update({code: Region.LOMBARDIA for code in MILAN_ZONES})
    regions.update({code: Region.LAZIO for code in ROME_ZONES})
    return MunicipalityMap(regions)


def _od_endpoints(region: Region) -> Tuple[str, str]:
    """Home code and daytime code for a region's synthetic commuters."""
    if region is Region.LOMBARDIA:
        return MILAN_ZONES[2], MILAN_ZONES[6]
    if region is Region.LAZIO:
        return ROME_ZONES[0], ROME_ZONES[41]
    code = _REGION_CODES[region]
    return f"{code}001", f"{code}002"


def generate_od_records(
    config: GeneratorConfig,
    target_daily_shares: Mapping[Tuple[Region, Sex, AgeGroup, dt.date], float],
) -> List[ODRecord]:
    """OD rows whose volumes reproduce each target daily share.

    Every (region, sex, age, day) group gets ``config.od_group_total`` users:
    a diagonal row for those staying home and a cross row for movers, with
    ``movers = round(total * share)``. Only weekdays are accepted.
    """
    total = config.od_group_total
    out: List[ODRecord] = []
    for (region, sex, age, day), share in sorted(
        target_daily_shares.items(), key=lambda kv: (kv[0][3], kv[0][0].order, kv[0][1].order, kv[0][2].order)
    ):
        if day.weekday() >= 5:
            raise InvalidValue(f"{day} is a weekend day; OD data is generated for weekdays only")
        if not 0.0 < share < 1.0:
            raise InvalidValue(f"target share {share} must lie in (0, 1)")
        movers = int(round(total * share))
        home, away = _od_endpoints(region)
        if total - movers > 0:
            out.append(ODRecord(day, home, home, age, sex, total - movers))
        if movers > 0:
            out.append(ODRecord(day, home, away, age, sex, movers))
    return out


def weekdays(quarter: Quarter, window: Tuple[dt.date, dt.date] = OBSERVATION_WINDOW) -> List[dt.date]:
    """Monday-to-Friday dates of a quarter clipped to the observation window."""
    first = max(quarter.start, window[0])
    last = min(quarter.end, window[1])
    days = []
    d = first
    while d <= last:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


# -- census ---------------------------------------------------------------------


def generate_census(config: GeneratorConfig = GeneratorConfig()) -> List[CensusMobilityRow]:
    """Census shares of out-of-municipality workers tied to the true fixed effects.

    Outside Lombardia and Lazio the share rises with the region:sex effect;
    those two get shares unrelated to their (city-zone inflated) effects.
    """
    rng = np.random.default_rng([config.seed, 1])
    rows = []
    for region in Region:
        for sex in Sex:
            base = 0.42 if sex is Sex.MALE else 0.34
            if region in (Region.LOMBARDIA, Region.LAZIO):
                share = base - 0.05 + rng.normal(0, 0.02)
            else:
                dummy = 0.0 if (region, sex) == config.reference else config.coefficients.get(dummy_label(region, sex), 0.0)
                share = base + 1.2 * dummy + rng.normal(0, 0.02)
            rows.append(CensusMobilityRow(region, sex, round(float(min(max(share, 0.01), 0.99)), 4)))
    return rows


# -- complete input bundle ------------------------------------------------------


@dataclass(frozen=True)
class Bundle:
    od: List[ODRecord]
    lfs: List[LfsAggregateRow]
    census: List[CensusMobilityRow]
    munimap: MunicipalityMap
    daily_shares: Dict[Tuple[Region, Sex, AgeGroup, dt.date], float]
    quarterly_mobility: Dict[Tuple[Region, Sex, AgeGroup, Quarter], float]


def generate_bundle(config: GeneratorConfig = GeneratorConfig()) -> Bundle:
    """All ingestion inputs for a synthetic world.

    Mobility is generated for the fit quarters and the target quarters, as
    daily shares on a 1/``od_group_total`` grid so OD volumes reproduce them
    exactly. Survey rows exist only for the fit quarters; their teleworking
    share follows the model evaluated at the realized quarterly mobility.
    """
    rng = np.random.default_rng([config.seed, 0])
    quarters = sorted(set(config.quarters) | set(config.target_quarters))
    grid = config.od_group_total
    daily: Dict[Tuple[Region, Sex, AgeGroup, dt.date], float] = {}
    quarterly: Dict[Tuple[Region, Sex, AgeGroup, Quarter], float] = {}
    days_of = {q: weekdays(q) for q in quarters}
    for region, sex, age in _groups():
        lo, hi = config.bounds((region, sex, age))
        level = float(rng.uniform(lo, hi))
        for q in quarters:
            base = min(max(level * float(rng.uniform(0.9, 1.1)), lo), hi)
            days = days_of[q]
            if not days:
                continue
            draws = base + rng.normal(0.0, config.daily_sigma, size=len(days))
            shares = np.clip(np.round(draws * grid), 1, grid - 1) / grid
            for day, s in zip(days, shares):
                daily[(region, sex, age, day)] = float(s)
            quarterly[(region, sex, age, q)] = float(np.mean(shares))

    lfs = []
    for region, sex, age in _groups():
        for q in sorted(config.quarters):
            key = (region, sex, age, q)
            if key not in quarterly:
                continue
            e = float(rng.uniform(*config.employment_range))
            noise = float(rng.normal(0.0, config.noise_sigma)) if config.noise_sigma > 0 else 0.0
            value = model_value(config, region, sex, quarterly[key], e) + noise
            tele = _teleworking(value, "/".join(map(str, key)))
            lfs.append(LfsAggregateRow(region, sex, age, q, e, tele, int(rng.integers(150, 700))))

    return Bundle(
        od=generate_od_records(config, daily),
        lfs=lfs,
        census=generate_census(config),
        munimap=synthetic_municipality_map(),
        daily_shares=daily,
        quarterly_mobility=quarterly,
    )


BUNDLE_FILES = {
    "od": "od.csv",
    "lfs": "lfs.csv",
    "census": "census.csv",
    "munimap": "munimap.csv",
    "truth": "truth.json",
}


def write_bundle(bundle: Bundle, config: GeneratorConfig, out_dir) -> Dict[str, str]:
    """Write a bundle as ingestion-format CSVs plus the ground-truth coefficients."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {k: os.path.join(out_dir, v) for k, v in BUNDLE_FILES.items()}
    write_od_csv(paths["od"], bundle.od)
    write_lfs_aggregate_csv(paths["lfs"], bundle.lfs)
    write_census_csv(paths["census"], bundle.census)
    write_municipality_map(paths["munimap"], bundle.munimap)
    truth = {
        "seed": config.seed,
        "noise_sigma": config.noise_sigma,
        "reference": dummy_label(*config.reference),
        "coefficients": dict(config.coefficients),
        "fit_quarters": [str(q) for q in sorted(config.quarters)],
        "target_quarters": [str(q) for q in sorted(config.target_quarters)],
    }
    with open(paths["truth"], "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2)
        fh.write("\n")
    return paths
