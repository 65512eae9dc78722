"""Agreement statistics: Bland-Altman limits of agreement, correlation
fits, one-way ANOVA with an exact F-distribution tail, paired t p-values,
and box-plot summaries.

The F and t tail probabilities run through a hand-rolled regularized
incomplete beta function (continued fraction, modified Lentz), accurate
to well below 1e-8 over the degrees of freedom used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation


@dataclass
class PairedSeries:
    """Automatic and manual values of one clinical parameter."""

    auto: np.ndarray
    man: np.ndarray
    name: str = ""
    units: str = ""

    def __post_init__(self):
        self.auto = np.asarray(self.auto, dtype=np.float64)
        self.man = np.asarray(self.man, dtype=np.float64)
        if self.auto.shape != self.man.shape or self.auto.ndim != 1:
            raise ContractViolation(
                f"paired series need equal 1-D shapes, got {self.auto.shape} vs {self.man.shape}")
        if len(self.auto) < 2:
            raise ContractViolation(f"paired series need n >= 2, got n = {len(self.auto)}")


@dataclass
class BlandAltman:
    bias: float
    loa_low: float
    loa_high: float
    rpc: float
    cv_pct: float  # NaN when the denominator vanishes


def bland_altman(series: PairedSeries, halved_denominator: bool = False) -> BlandAltman:
    """Bias, 1.96-SD limits of agreement, reproducibility coefficient, and
    coefficient of variation of auto - manual differences.

    The CV denominator is mean(auto) + mean(man) by default; pass
    ``halved_denominator=True`` for the conventional mean of means.
    """
    d = series.auto - series.man
    bias = float(d.mean())
    sd = float(d.std(ddof=1))
    rpc = 1.96 * sd
    denom = float(series.auto.mean() + series.man.mean())
    if halved_denominator:
        denom /= 2.0
    cv = sd / denom * 100.0 if abs(denom) > 1e-300 else float("nan")
    return BlandAltman(bias=bias, loa_low=bias - rpc, loa_high=bias + rpc,
                       rpc=rpc, cv_pct=cv)


@dataclass
class LinearFit:
    slope: float
    intercept: float
    r: float


def pearson_fit(series: PairedSeries) -> LinearFit:
    """Least-squares line auto = slope*man + intercept, plus Pearson R."""
    x, y = series.man, series.auto
    sxx = float(((x - x.mean()) ** 2).sum())
    if sxx < 1e-300:
        raise ContractViolation("manual values are constant; fit undefined")
    sxy = float(((x - x.mean()) * (y - y.mean())).sum())
    slope = sxy / sxx
    intercept = float(y.mean()) - slope * float(x.mean())
    syy = float(((y - y.mean()) ** 2).sum())
    r = sxy / math.sqrt(sxx * syy) if syy > 1e-300 else 0.0
    return LinearFit(slope=slope, intercept=intercept, r=r)


# -- regularized incomplete beta (continued fraction) -------------------

def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta, by modified Lentz."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise ArithmeticError(f"incomplete beta failed to converge for a={a}, b={b}, x={x}")


def reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ContractViolation(f"beta parameters must be positive, got a={a}, b={b}")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def f_sf(f_value: float, d1: float, d2: float) -> float:
    """Upper-tail probability P(X > f) for X ~ F(d1, d2)."""
    if f_value < 0:
        raise ContractViolation(f"F statistic must be >= 0, got {f_value}")
    if d1 < 1 or d2 < 1:
        raise ContractViolation(f"degrees of freedom must be >= 1, got ({d1}, {d2})")
    if math.isinf(f_value):
        return 0.0
    return reg_inc_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f_value))


def t_sf_two_sided(t_value: float, df: float) -> float:
    """Two-sided tail probability for Student's t."""
    if df < 1:
        raise ContractViolation(f"degrees of freedom must be >= 1, got {df}")
    t2 = t_value * t_value
    return reg_inc_beta(df / 2.0, 0.5, df / (df + t2))


def paired_t_pvalue(series: PairedSeries) -> float:
    """Two-sided paired t-test p-value on auto - manual differences.

    Emitted as a labeled approximation in reports; zero-variance
    differences give p = 1 when the bias is zero and p = 0 otherwise.
    """
    d = series.auto - series.man
    n = len(d)
    sd = float(d.std(ddof=1))
    mean = float(d.mean())
    if sd < 1e-300:
        return 1.0 if abs(mean) < 1e-300 else 0.0
    t = mean / (sd / math.sqrt(n))
    return t_sf_two_sided(t, n - 1)


# -- one-way ANOVA -------------------------------------------------------

@dataclass
class AnovaTable:
    ss_between: float
    ss_within: float
    df_between: int
    df_within: int
    ms_between: float = field(init=False)
    ms_within: float = field(init=False)
    f: float = field(init=False)
    p: float = field(init=False)

    def __post_init__(self):
        if self.df_between < 1 or self.df_within < 1:
            raise ContractViolation(
                f"degrees of freedom must be >= 1, got ({self.df_between}, {self.df_within})")
        self.ms_between = self.ss_between / self.df_between
        self.ms_within = self.ss_within / self.df_within
        if self.ss_between <= 0:
            self.f = 0.0
        elif self.ms_within <= 0:
            self.f = float("inf")
        else:
            self.f = self.ms_between / self.ms_within
        self.p = f_sf(self.f, self.df_between, self.df_within)

    @property
    def ss_total(self) -> float:
        return self.ss_between + self.ss_within

    @property
    def df_total(self) -> int:
        return self.df_between + self.df_within


def anova_from_sums(ss_between: float, df_between: int,
                    ss_within: float, df_within: int) -> AnovaTable:
    """ANOVA table from precomputed sums of squares and degrees of freedom."""
    return AnovaTable(ss_between=ss_between, ss_within=ss_within,
                      df_between=df_between, df_within=df_within)


def anova_oneway(groups: list[np.ndarray]) -> AnovaTable:
    """Standard one-way decomposition across >= 2 groups of observations."""
    if len(groups) < 2:
        raise ContractViolation(f"ANOVA needs >= 2 groups, got {len(groups)}")
    arrays = [np.asarray(g, dtype=np.float64).ravel() for g in groups]
    if any(len(g) == 0 for g in arrays):
        raise ContractViolation("ANOVA groups must be non-empty")
    n = sum(len(g) for g in arrays)
    k = len(arrays)
    if n - k < 1:
        raise ContractViolation("within-group degrees of freedom would be zero")
    grand = sum(float(g.sum()) for g in arrays) / n
    ss_between = sum(len(g) * (float(g.mean()) - grand) ** 2 for g in arrays)
    ss_within = sum(float(((g - g.mean()) ** 2).sum()) for g in arrays)
    return AnovaTable(ss_between=ss_between, ss_within=ss_within,
                      df_between=k - 1, df_within=n - k)


# -- box-plot summary ----------------------------------------------------

@dataclass
class BoxSummary:
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float


def box_summary(values: np.ndarray) -> BoxSummary:
    """Quartiles plus 1.5*IQR whiskers clipped to the data range."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if len(v) == 0:
        raise ContractViolation("box summary of an empty sample")
    q1, med, q3 = (float(q) for q in np.percentile(v, [25, 50, 75]))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    if len(inside) == 0:
        inside = v
    return BoxSummary(q1=q1, median=med, q3=q3,
                      whisker_low=float(inside.min()), whisker_high=float(inside.max()))
