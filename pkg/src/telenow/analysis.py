"""Diagnostics around the core fit.

Log-versus-linear specification check, leave-one-group-out variable
importance, correlation of the region:sex effects with census commuting
shares, gender-gap clustering and subscriber representativeness.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Collection, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from telenow.domain import AgeGroup, PanelCell, Region, Sex
from telenow.errors import LengthMismatch, MissingGroup, TooFewPoints, ZeroVariance
from telenow.ingestion import CensusMobilityRow
from telenow.regression import (
    DEFAULT_REFERENCE,
    EMPLOYMENT,
    LOG_MOBILITY,
    MOBILITY,
    FitResult,
    build_design_matrix,
    fit_ols,
)

DEFAULT_CENSUS_EXCLUDE = frozenset({Region.LOMBARDIA, Region.LAZIO})


# -- correlation -----------------------------------------------------------------


def _check_pair(x, y) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or len(x) != len(y):
        raise LengthMismatch(f"vectors must be 1-d and of equal length, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise LengthMismatch("need at least two observations")
    return x, y


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation."""
    x, y = _check_pair(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("correlation undefined for a constant vector")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks, tied values sharing the mean of their positions."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(len(v))
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation (Pearson of average ranks)."""
    x, y = _check_pair(x, y)
    return pearson(average_ranks(x), average_ranks(y))


# -- specification comparison -----------------------------------------------------


class Specification(Enum):
    LOGGED = "Logged"
    LINEAR = "Linear"


@dataclass(frozen=True)
class ModelComparison:
    r2_logged: float
    r2_linear: float

    @property
    def chosen(self) -> Specification:
        return Specification.LOGGED if self.r2_logged >= self.r2_linear else Specification.LINEAR

    def describe(self) -> str:
        return f"R2 linear mobility -> logged mobility: {self.r2_linear:.3f} → {self.r2_logged:.3f} (chosen: {self.chosen.value})"

    def to_dict(self) -> dict:
        return {"r2_logged": self.r2_logged, "r2_linear": self.r2_linear, "chosen": self.chosen.value}


def compare_log_vs_linear(panel: Sequence[PanelCell], reference=DEFAULT_REFERENCE) -> ModelComparison:
    """Fit the model with log and with raw mobility and compare R²."""
    logged = fit_ols(build_design_matrix(panel, reference, LOG_MOBILITY))
    linear = fit_ols(build_design_matrix(panel, reference, MOBILITY))
    return ModelComparison(r2_logged=logged.r_squared, r2_linear=linear.r_squared)


# -- variable importance -------------------------------------------------------------

IMPORTANCE_GROUPS = ("employment", "log_mobility", "region:sex")


@dataclass(frozen=True)
class ImportanceReport:
    full_r2: float
    delta_r2: Mapping[str, float]

    @property
    def ranking(self) -> List[str]:
        return sorted(self.delta_r2, key=lambda g: (-self.delta_r2[g], IMPORTANCE_GROUPS.index(g)))

    def to_dict(self) -> dict:
        return {
            "full_r2": self.full_r2,
            "delta_r2": dict(self.delta_r2),
            "ranking": self.ranking,
        }


def variable_importance(panel: Sequence[PanelCell], reference=DEFAULT_REFERENCE) -> ImportanceReport:
    """Drop in R² when each predictor group is removed and the model refitted.

    Groups are the employment rate, log mobility, and the whole block of
    region:sex dummies.
    """
    design = build_design_matrix(panel, reference, LOG_MOBILITY)
    full = fit_ols(design)
    groups = {
        "employment": [EMPLOYMENT],
        "log_mobility": [LOG_MOBILITY],
        "region:sex": list(design.dummy_labels),
    }
    delta = {}
    for name, columns in groups.items():
        reduced = fit_ols(design.without(columns))
        delta[name] = full.r_squared - reduced.r_squared
    return ImportanceReport(full_r2=full.r_squared, delta_r2=delta)


# -- census validation ---------------------------------------------------------------


@dataclass(frozen=True)
class CensusPoint:
    region: Region
    sex: Sex
    coefficient: float
    outside_share: float


@dataclass(frozen=True)
class CensusValidation:
    points: Tuple[CensusPoint, ...]
    pearson: float
    spearman: float
    excluded_regions: frozenset

    def to_dict(self) -> dict:
        return {
            "n": len(self.points),
            "pearson": self.pearson,
            "spearman": self.spearman,
            "excluded_regions": sorted(r.value for r in self.excluded_regions),
        }

    def scatter_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["region", "sex", "coefficient", "outside_share"])
        for p in self.points:
            w.writerow([p.region.value, p.sex.value, f"{p.coefficient:.6g}", f"{p.outside_share:.6g}"])
        return buf.getvalue()


def validate_against_census(
    fit: FitResult,
    census: Sequence[CensusMobilityRow],
    exclude: Collection[Region] = DEFAULT_CENSUS_EXCLUDE,
) -> CensusValidation:
    """Correlate region:sex effects with census out-of-municipality shares.

    The reference pair enters with effect 0. Regions in ``exclude`` are
    dropped before correlating.
    """
    excluded = frozenset(exclude)
    shares = {(row.region, row.sex): row.outside_share for row in census}
    points = []
    for region in Region:
        if region in excluded:
            continue
        for sex in Sex:
            if (region, sex) not in shares:
                raise MissingGroup(f"census has no row for ({region}, {sex})")
            points.append(CensusPoint(region, sex, fit.dummy(region, sex), shares[(region, sex)]))
    if len(points) < 3:
        raise TooFewPoints(f"need at least 3 points, got {len(points)}")
    coef = [p.coefficient for p in points]
    share = [p.outside_share for p in points]
    return CensusValidation(tuple(points), pearson(coef, share), spearman(coef, share), excluded)


# -- gender gap clusters ---------------------------------------------------------------


class GapCluster(Enum):
    PARITY = "Parity"
    LOW = "Low"
    HIGH = "High"


PARITY_BAND = 0.01
HIGH_GAP = 0.045


def classify_gap_cluster(gap: float) -> GapCluster:
    """Cluster a female-minus-male teleworking gap.

    ``|gap| < 0.01`` is parity and ``gap >= 0.045`` is high; everything else,
    including male-favouring gaps beyond -0.01, is low.
    """
    if abs(gap) < PARITY_BAND:
        return GapCluster.PARITY
    if gap >= HIGH_GAP:
        return GapCluster.HIGH
    return GapCluster.LOW


# -- representativeness ----------------------------------------------------------------


@dataclass(frozen=True)
class RepresentativenessReport:
    differences: Mapping[Tuple[AgeGroup, Sex], float]
    sex_differences: Mapping[Sex, float]

    @property
    def max_abs_difference(self) -> float:
        return max(abs(v) for v in self.differences.values())

    @property
    def most_overrepresented(self) -> Tuple[AgeGroup, Sex]:
        return max(self.differences, key=lambda k: self.differences[k])

    def to_dict(self) -> dict:
        return {
            "differences": {f"{a.value}:{s.value}": d for (a, s), d in self.differences.items()},
            "sex_differences": {s.value: d for s, d in self.sex_differences.items()},
            "max_abs_difference": self.max_abs_difference,
        }


def representativeness_check(
    subscriber_counts: Mapping[Tuple[AgeGroup, Sex], float],
    population_counts: Mapping[Tuple[AgeGroup, Sex], float],
) -> RepresentativenessReport:
    """Signed difference between subscriber and population age-sex shares."""
    groups = [(a, s) for a in AgeGroup for s in Sex]
    for name, counts in (("subscriber", subscriber_counts), ("population", population_counts)):
        missing = [g for g in groups if g not in counts]
        if missing:
            raise MissingGroup(f"{name} counts lack groups: " + ", ".join(f"{a}:{s}" for a, s in missing))
    sub_total = float(sum(subscriber_counts[g] for g in groups))
    pop_total = float(sum(population_counts[g] for g in groups))
    if not (sub_total > 0 and pop_total > 0):
        raise MissingGroup("counts must have a positive total")
    diff = {g: subscriber_counts[g] / sub_total - population_counts[g] / pop_total for g in groups}
    by_sex = {s: sum(diff[(a, s)] for a in AgeGroup) for s in Sex}
    return RepresentativenessReport(diff, by_sex)
