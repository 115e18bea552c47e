"""Linear-log fixed-effects model: design matrix, OLS fit and prediction.

The model regresses the teleworking share of a (region, sex, age, quarter)
cell on an intercept, the employment rate, the natural log of the mobility
share and one dummy per (region, sex) pair except a reference pair.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from telenow.distributions import f_sf, t_ppf, t_sf2
from telenow.domain import CellKey, PanelCell, Region, Sex
from telenow.errors import (
    InvalidValue,
    MissingTeleworking,
    NonPositiveMobility,
    RankDeficient,
    TooFewRows,
    UnknownDummy,
)

INTERCEPT = "intercept"
EMPLOYMENT = "employment"
LOG_MOBILITY = "log_mobility"
MOBILITY = "mobility"
MOBILITY_TERMS = (LOG_MOBILITY, MOBILITY)

DEFAULT_REFERENCE: Tuple[Region, Sex] = (Region.VENETO, Sex.MALE)
RANK_TOLERANCE = 1e-10


def dummy_label(region: Region, sex: Sex) -> str:
    return f"{region.value}:{sex.value}"


def parse_dummy_label(label: str) -> Tuple[Region, Sex]:
    region, _, sex = label.rpartition(":")
    if not region:
        raise InvalidValue(f"bad region:sex label {label!r}")
    return Region.parse(region), Sex.parse(sex)


def significance_stars(p: float) -> str:
    if p != p:
        return ""
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DesignMatrix:
    column_labels: Tuple[str, ...]
    values: np.ndarray
    response: np.ndarray
    row_keys: Tuple[CellKey, ...]
    reference: Tuple[Region, Sex] = DEFAULT_REFERENCE
    mobility_term: str = LOG_MOBILITY

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "response", _frozen(self.response))
        if len(set(self.column_labels)) != len(self.column_labels):
            raise InvalidValue("column labels must be unique")
        n, p = self.values.shape
        if p != len(self.column_labels):
            raise InvalidValue(f"{p} columns but {len(self.column_labels)} labels")
        if self.response.shape != (n,):
            raise InvalidValue("response length does not match number of rows")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def dummy_labels(self) -> Tuple[str, ...]:
        return tuple(c for c in self.column_labels if ":" in c)

    def column(self, label: str) -> np.ndarray:
        return self.values[:, self.column_labels.index(label)]

    def without(self, labels: Iterable[str]) -> "DesignMatrix":
        """Copy with the named columns removed."""
        drop = set(labels)
        keep = [i for i, c in enumerate(self.column_labels) if c not in drop]
        term = self.mobility_term if self.mobility_term not in drop else ""
        return DesignMatrix(
            column_labels=tuple(self.column_labels[i] for i in keep),
            values=self.values[:, keep],
            response=self.response,
            row_keys=self.row_keys,
            reference=self.reference,
            mobility_term=term,
        )

    def with_response(self, response) -> "DesignMatrix":
        return DesignMatrix(
            self.column_labels, self.values, np.asarray(response, float), self.row_keys, self.reference, self.mobility_term
        )


def build_design_matrix(
    panel: Sequence[PanelCell],
    reference: Tuple[Region, Sex] = DEFAULT_REFERENCE,
    mobility_term: str = LOG_MOBILITY,
) -> DesignMatrix:
    """Assemble the regression matrix for a fit-ready panel.

    Columns are ``intercept, employment, log_mobility`` followed by one dummy
    per (region, sex) pair occurring in the panel, in canonical region order
    with M before F, skipping ``reference``. With ``mobility_term="mobility"``
    the raw share replaces its logarithm.
    """
    if mobility_term not in MOBILITY_TERMS:
        raise InvalidValue(f"mobility_term must be one of {MOBILITY_TERMS}")
    if not panel:
        raise TooFewRows("empty panel")
    pairs = {(c.region, c.sex) for c in panel}
    if reference not in pairs:
        raise InvalidValue(f"reference category {dummy_label(*reference)} does not occur in the panel")
    dummies = sorted(pairs - {reference}, key=lambda rs: (rs[0].order, rs[1].order))
    labels = (INTERCEPT, EMPLOYMENT, mobility_term) + tuple(dummy_label(r, s) for r, s in dummies)
    column_of = {pair: 3 + i for i, pair in enumerate(dummies)}

    X = np.zeros((len(panel), len(labels)))
    y = np.empty(len(panel))
    for i, cell in enumerate(panel):
        if cell.teleworking is None:
            raise MissingTeleworking(f"cell {cell.label} has no teleworking share")
        if not cell.mobility > 0:
            raise NonPositiveMobility(cell.key)
        X[i, 0] = 1.0
        X[i, 1] = cell.employment
        X[i, 2] = math.log(cell.mobility) if mobility_term == LOG_MOBILITY else cell.mobility
        j = column_of.get((cell.region, cell.sex))
        if j is not None:
            X[i, j] = 1.0
        y[i] = cell.teleworking
    return DesignMatrix(labels, X, y, tuple(c.key for c in panel), reference, mobility_term)


@dataclass(frozen=True)
class FitResult:
    """Estimated coefficients with their inference statistics.

    Arrays are aligned with ``labels``. ``residuals``, ``fitted`` and
    ``cov_unscaled`` are ``None`` for results rebuilt from JSON or from bare
    coefficients.
    """

    labels: Tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    r_squared: float
    adj_r_squared: float
    sigma: float
    df_residual: int
    f_statistic: float
    f_df: Tuple[int, int]
    f_p_value: float
    n: int
    reference: Tuple[Region, Sex] = DEFAULT_REFERENCE
    mobility_term: str = LOG_MOBILITY
    residuals: Optional[np.ndarray] = None
    fitted: Optional[np.ndarray] = None
    cov_unscaled: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("coefficients", "std_errors", "t_values", "p_values", "residuals", "fitted", "cov_unscaled"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _frozen(value))

    @property
    def p(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def __getitem__(self, label: str) -> float:
        return float(self.coefficients[self.labels.index(label)])

    def get(self, label: str, default: float = 0.0) -> float:
        return self[label] if label in self.labels else default

    def as_dict(self) -> Dict[str, float]:
        return {label: float(v) for label, v in zip(self.labels, self.coefficients)}

    def stars(self, label: str) -> str:
        return significance_stars(float(self.p_values[self.index(label)]))

    def dummy(self, region: Region, sex: Sex) -> float:
        """Fixed effect of a (region, sex) pair; zero for the reference pair."""
        if (region, sex) == self.reference:
            return 0.0
        label = dummy_label(region, sex)
        if label not in self.labels:
            raise UnknownDummy(region, sex)
        return self[label]

    def conf_int(self, level: float = 0.95) -> np.ndarray:
        """Two-sided t intervals, shape ``(p, 2)``."""
        q = t_ppf(0.5 + level / 2.0, self.df_residual)
        half = q * self.std_errors
        return np.column_stack([self.coefficients - half, self.coefficients + half])

    @classmethod
    def from_coefficients(
        cls,
        coefficients: Mapping[str, float],
        reference: Tuple[Region, Sex] = DEFAULT_REFERENCE,
        mobility_term: Optional[str] = None,
    ) -> "FitResult":
        """Wrap known coefficients (no inference) so they can be used to predict."""
        labels = tuple(coefficients)
        if mobility_term is None:
            mobility_term = MOBILITY if MOBILITY in labels and LOG_MOBILITY not in labels else LOG_MOBILITY
        nan = np.full(len(labels), np.nan)
        return cls(
            labels=labels,
            coefficients=np.array([coefficients[k] for k in labels], dtype=float),
            std_errors=nan,
            t_values=nan,
            p_values=nan,
            r_squared=math.nan,
            adj_r_squared=math.nan,
            sigma=math.nan,
            df_residual=0,
            f_statistic=math.nan,
            f_df=(len(labels) - 1, 0),
            f_p_value=math.nan,
            n=0,
            reference=reference,
            mobility_term=mobility_term,
        )

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        coefs = {}
        for i, label in enumerate(self.labels):
            coefs[label] = {
                "estimate": _num(self.coefficients[i]),
                "se": _num(self.std_errors[i]),
                "t": _num(self.t_values[i]),
                "p": _num(self.p_values[i]),
                "stars": significance_stars(float(self.p_values[i])),
            }
        return {
            "coefficients": coefs,
            "r2": _num(self.r_squared),
            "adj_r2": _num(self.adj_r_squared),
            "sigma": _num(self.sigma),
            "df_residual": int(self.df_residual),
            "f": {"value": _num(self.f_statistic), "df1": int(self.f_df[0]), "df2": int(self.f_df[1]), "p": _num(self.f_p_value)},
            "n": int(self.n),
            "reference": dummy_label(*self.reference),
            "mobility_term": self.mobility_term,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping) -> "FitResult":
        try:
            coefs = data["coefficients"]
            labels = tuple(coefs)
            col = lambda k: np.array([_unnum(coefs[l][k]) for l in labels], dtype=float)  # noqa: E731
            f = data["f"]
            reference = parse_dummy_label(data.get("reference", dummy_label(*DEFAULT_REFERENCE)))
            mobility_term = data.get("mobility_term", LOG_MOBILITY)
            if mobility_term not in MOBILITY_TERMS:
                raise InvalidValue(f"unknown mobility_term {mobility_term!r}")
            return cls(
                labels=labels,
                coefficients=col("estimate"),
                std_errors=col("se"),
                t_values=col("t"),
                p_values=col("p"),
                r_squared=_unnum(data["r2"]),
                adj_r_squared=_unnum(data["adj_r2"]),
                sigma=_unnum(data["sigma"]),
                df_residual=int(data["df_residual"]),
                f_statistic=_unnum(f["value"]),
                f_df=(int(f["df1"]), int(f["df2"])),
                f_p_value=_unnum(f.get("p")),
                n=int(data["n"]),
                reference=reference,
                mobility_term=mobility_term,
            )
        except (KeyError, TypeError) as exc:
            raise InvalidValue(f"malformed fit JSON: missing or bad field {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidValue(f"fit file is not valid JSON: {exc}") from None
        return cls.from_dict(data)


def _num(x) -> Optional[float]:
    x = float(x)
    return x if math.isfinite(x) else None


def _unnum(x) -> float:
    return math.nan if x is None else float(x)


def fit_ols(design: DesignMatrix) -> FitResult:
    """Ordinary least squares through a column-pivoted QR factorization.

    Raises :class:`RankDeficient` naming the columns that fall below a
    relative pivot threshold of ``1e-10``, rather than dropping them.
    """
    X, y = design.values, design.response
    n, p = X.shape
    if n <= p:
        raise TooFewRows(f"need more rows than columns, got n={n}, p={p}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InvalidValue("design matrix or response contains non-finite values")

    Q, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > RANK_TOLERANCE * diag[0])) if diag[0] > 0 else 0
    if rank < p:
        raise RankDeficient([design.column_labels[j] for j in piv[rank:]])

    coef = np.empty(p)
    coef[piv] = linalg.solve_triangular(R, Q.T @ y)
    fitted = X @ coef
    resid = y - fitted
    rss = float(resid @ resid)
    df_res = n - p
    sigma2 = rss / df_res

    r_inv = linalg.solve_triangular(R, np.eye(p))
    cov_p = r_inv @ r_inv.T
    cov = np.empty((p, p))
    cov[np.ix_(piv, piv)] = cov_p
    se = np.sqrt(np.diag(cov) * sigma2)

    with np.errstate(divide="ignore", invalid="ignore"):
        t = coef / se
    pvals = np.array([t_sf2(float(v), df_res) for v in t])

    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else math.nan
    adj = 1.0 - (1.0 - r2) * (n - 1) / df_res
    df1 = p - 1
    if df1 > 0:
        ess = max(tss - rss, 0.0)
        f_stat = (ess / df1) / sigma2 if sigma2 > 0 else math.inf
        f_p = f_sf(f_stat, df1, df_res)
    else:
        f_stat, f_p = math.nan, math.nan

    return FitResult(
        labels=design.column_labels,
        coefficients=coef,
        std_errors=se,
        t_values=t,
        p_values=pvals,
        r_squared=r2,
        adj_r_squared=adj,
        sigma=math.sqrt(sigma2),
        df_residual=df_res,
        f_statistic=f_stat,
        f_df=(df1, df_res),
        f_p_value=f_p,
        n=n,
        reference=design.reference,
        mobility_term=design.mobility_term,
        residuals=resid,
        fitted=fitted,
        cov_unscaled=cov,
    )


def fit_panel(
    panel: Sequence[PanelCell],
    reference: Tuple[Region, Sex] = DEFAULT_REFERENCE,
    mobility_term: str = LOG_MOBILITY,
) -> FitResult:
    return fit_ols(build_design_matrix(panel, reference, mobility_term))


def predict_value(
    fit: FitResult, region: Region, sex: Sex, mobility: float, employment: float
) -> float:
    if fit.mobility_term == LOG_MOBILITY:
        if not mobility > 0:
            raise NonPositiveMobility((region, sex))
        m = math.log(mobility)
    else:
        m = mobility
    return fit[INTERCEPT] + fit.dummy(region, sex) + fit[fit.mobility_term] * m + fit[EMPLOYMENT] * employment


def predict(fit: FitResult, cell: PanelCell) -> float:
    """Raw linear prediction for a cell; not clamped to [0, 1]."""
    if cell.employment is None:
        raise InvalidValue(f"cell {cell.label} has no employment rate")
    if not cell.mobility > 0:
        raise NonPositiveMobility(cell.key)
    return predict_value(fit, cell.region, cell.sex, cell.mobility, cell.employment)


# -- text rendering ------------------------------------------------------------


def _cell(fit: FitResult, label: str, digits: int = 3) -> str:
    i = fit.index(label)
    est = f"{fit.coefficients[i]:.{digits}f}{significance_stars(float(fit.p_values[i]))}"
    se = fit.std_errors[i]
    return f"{est} ({se:.{digits}f})" if math.isfinite(se) else est


def render_table(fit: FitResult, digits: int = 3) -> str:
    """Regression table laid out like the published one.

    The top block lists the common slopes and the constant; below, one row
    per region with the Male and Female fixed effects side by side.
    """
    mob_name = "log(mobility)" if fit.mobility_term == LOG_MOBILITY else "mobility"
    rows: List[Tuple[str, str, str]] = []
    top = [(EMPLOYMENT, "employment"), (fit.mobility_term, mob_name), (INTERCEPT, "Constant")]
    for label, name in top:
        if label in fit.labels:
            rows.append((name, _cell(fit, label, digits), ""))
    rows.append(("", "Male", "Female"))
    for region in Region:
        cells = []
        for sex in Sex:
            label = dummy_label(region, sex)
            cells.append(_cell(fit, label, digits) if label in fit.labels else "")
        if any(cells):
            rows.append((region.value, cells[0], cells[1]))

    width0 = max(len(r[0]) for r in rows + [("Residual Std. Error", "", "")])
    width1 = max(len(r[1]) for r in rows)
    width2 = max(len(r[2]) for r in rows)
    rule = "=" * (width0 + width1 + width2 + 6)
    thin = "-" * len(rule)
    out = [rule, f"{'':<{width0}}   Dependent variable: teleworking", thin]
    for i, (a, b, c) in enumerate(rows):
        if a == "" and b == "Male":
            out.append(thin)
        out.append(f"{a:<{width0}}   {b:<{width1}}   {c:<{width2}}".rstrip())
    out.append(thin)
    out.append(f"{'Observations':<{width0}}   {fit.n}")
    out.append(f"{'R2':<{width0}}   {fit.r_squared:.{digits}f}")
    out.append(f"{'Adjusted R2':<{width0}}   {fit.adj_r_squared:.{digits}f}")
    out.append(f"{'Residual Std. Error':<{width0}}   {fit.sigma:.{digits}f} (df = {fit.df_residual})")
    f_text = f"{fit.f_statistic:.3f}" if math.isfinite(fit.f_statistic) else "inf"
    out.append(
        f"{'F Statistic':<{width0}}   {f_text}{significance_stars(fit.f_p_value)} "
        f"(df = {fit.f_df[0]}; {fit.f_df[1]})"
    )
    out.append(rule)
    out.append(f"{'Note:':<{width0}}   *p<0.1; **p<0.05; ***p<0.01")
    return "\n".join(out) + "\n"
