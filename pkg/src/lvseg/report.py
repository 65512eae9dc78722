"""CSV row formats and the agreement report.

Two row schemas flow through the harness:

  metrics CSV      id, phase, dice, jaccard, hd_mm, mad_mm
                   (plus summary rows with id "mean" / "sd")
  measurement CSV  id, phase, D_cm, S_cm2, V_ml, EF_pct, flag
                   (image rows leave EF empty; per-subject EF rows use
                   phase "EF" and leave the geometry columns empty)

All CSVs are UTF-8, comma-separated, with a mandatory header row and '.'
as the decimal separator; floats are written with full precision so that
write -> read round-trips exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolation, FormatError
from .stats import (AnovaTable, BlandAltman, BoxSummary, LinearFit, PairedSeries,
                    anova_oneway, bland_altman, box_summary, paired_t_pvalue, pearson_fit)

PARAMETERS = ("volume", "area", "length", "EF")


@dataclass
class MetricsRow:
    sample_id: str
    phase: str
    dice: float
    jaccard: float
    hd_mm: float
    mad_mm: float


@dataclass
class MeasurementRow:
    sample_id: str
    phase: str
    d_cm: float = math.nan
    s_cm2: float = math.nan
    v_ml: float = math.nan
    ef_pct: float = math.nan
    flag: str = "ok"


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def _parse(s: str) -> float:
    return math.nan if s == "" else float(s)


def write_metrics_csv(rows: list[MetricsRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "phase", "dice", "jaccard", "hd_mm", "mad_mm"])
        for r in rows:
            w.writerow([r.sample_id, r.phase, _fmt(r.dice), _fmt(r.jaccard),
                        _fmt(r.hd_mm), _fmt(r.mad_mm)])


def read_metrics_csv(path: str | Path) -> list[MetricsRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expect = ["id", "phase", "dice", "jaccard", "hd_mm", "mad_mm"]
        if reader.fieldnames != expect:
            raise FormatError(f"{path}: metrics header must be {expect}, got {reader.fieldnames}")
        for row in reader:
            rows.append(MetricsRow(row["id"], row["phase"], _parse(row["dice"]),
                                   _parse(row["jaccard"]), _parse(row["hd_mm"]),
                                   _parse(row["mad_mm"])))
    return rows


def write_measurements_csv(rows: list[MeasurementRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "phase", "D_cm", "S_cm2", "V_ml", "EF_pct", "flag"])
        for r in rows:
            w.writerow([r.sample_id, r.phase, _fmt(r.d_cm), _fmt(r.s_cm2),
                        _fmt(r.v_ml), _fmt(r.ef_pct), r.flag])


def read_measurements_csv(path: str | Path) -> list[MeasurementRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expect = ["id", "phase", "D_cm", "S_cm2", "V_ml", "EF_pct", "flag"]
        if reader.fieldnames != expect:
            raise FormatError(
                f"{path}: measurement header must be {expect}, got {reader.fieldnames}")
        for row in reader:
            rows.append(MeasurementRow(row["id"], row["phase"], _parse(row["D_cm"]),
                                       _parse(row["S_cm2"]), _parse(row["V_ml"]),
                                       _parse(row["EF_pct"]), row["flag"]))
    return rows


# -- agreement analysis --------------------------------------------------

@dataclass
class AgreementReport:
    """Per-parameter agreement bundle between one method and the manual
    reference. ``t_p`` is a paired two-sided t-test p-value, emitted as a
    labeled approximation only."""

    parameter: str
    n: int
    fit: LinearFit
    ba: BlandAltman
    abs_error_box: BoxSummary
    t_p: float


def _series_by_parameter(rows: list[MeasurementRow]) -> dict[str, dict[str, float]]:
    """parameter -> {key: value}; geometry keyed by sample id, EF by the
    subject id carried in the EF row's id column."""
    out: dict[str, dict[str, float]] = {p: {} for p in PARAMETERS}
    for r in rows:
        if r.phase == "EF":
            if not math.isnan(r.ef_pct):
                out["EF"][r.sample_id] = r.ef_pct
        elif r.flag == "ok":
            out["volume"][r.sample_id] = r.v_ml
            out["area"][r.sample_id] = r.s_cm2
            out["length"][r.sample_id] = r.d_cm
    return out


def agreement_reports(auto_rows: list[MeasurementRow],
                      manual_rows: list[MeasurementRow]) -> list[AgreementReport]:
    """One report per clinical parameter; ids must match between the two
    row sets (offenders are listed otherwise)."""
    auto = _series_by_parameter(auto_rows)
    manual = _series_by_parameter(manual_rows)
    reports = []
    for param in PARAMETERS:
        a, m = auto[param], manual[param]
        missing = sorted(set(a) ^ set(m))
        if missing:
            raise ContractViolation(
                f"{param}: ids not present on both sides: {missing}")
        keys = sorted(a)
        if len(keys) < 2:
            continue
        series = PairedSeries(auto=np.array([a[k] for k in keys]),
                              man=np.array([m[k] for k in keys]), name=param)
        reports.append(AgreementReport(
            parameter=param, n=len(keys),
            fit=pearson_fit(series), ba=bland_altman(series),
            abs_error_box=box_summary(np.abs(series.auto - series.man)),
            t_p=paired_t_pvalue(series)))
    return reports


def method_anova(per_method_rows: dict[str, list[MeasurementRow]],
                 manual_rows: list[MeasurementRow]) -> dict[str, AnovaTable]:
    """One-way ANOVA per parameter over the per-method absolute errors
    against the shared manual reference."""
    if len(per_method_rows) < 2:
        raise ContractViolation("method ANOVA needs >= 2 methods")
    manual = _series_by_parameter(manual_rows)
    tables = {}
    for param in PARAMETERS:
        groups = []
        for method in sorted(per_method_rows):
            vals = _series_by_parameter(per_method_rows[method])[param]
            keys = sorted(set(vals) & set(manual[param]))
            if keys:
                groups.append(np.array([abs(vals[k] - manual[param][k]) for k in keys]))
        if len(groups) >= 2 and sum(len(g) for g in groups) > len(groups):
            tables[param] = anova_oneway(groups)
    return tables


def anova_text_table(table: AnovaTable) -> str:
    """Plain-text table with the Source/SS/df/MS/F/p-value columns."""
    header = f"{'Source':<28}{'SS':>10}{'df':>6}{'MS':>10}{'F':>10}{'p-value':>10}"
    row_b = (f"{'between-groups variation':<28}{table.ss_between:>10.4g}"
             f"{table.df_between:>6}{table.ms_between:>10.4g}"
             f"{table.f:>10.4g}{table.p:>10.4g}")
    row_w = (f"{'within-groups variation':<28}{table.ss_within:>10.4g}"
             f"{table.df_within:>6}{table.ms_within:>10.4g}")
    row_t = f"{'Total':<28}{table.ss_total:>10.4g}{table.df_total:>6}"
    return "\n".join([header, row_b, row_w, row_t])


def write_agreement_report(reports: list[AgreementReport], directory: str | Path,
                           anova_tables: dict[str, AnovaTable] | None = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "agreement.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter", "n", "slope", "intercept", "r", "bias",
                    "loa_low", "loa_high", "rpc", "cv_pct", "paired_t_p_approx"])
        for r in reports:
            w.writerow([r.parameter, r.n, _fmt(r.fit.slope), _fmt(r.fit.intercept),
                        _fmt(r.fit.r), _fmt(r.ba.bias), _fmt(r.ba.loa_low),
                        _fmt(r.ba.loa_high), _fmt(r.ba.rpc), _fmt(r.ba.cv_pct),
                        _fmt(r.t_p)])
    with open(directory / "boxplot.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter", "q1", "median", "q3", "whisker_low", "whisker_high"])
        for r in reports:
            b = r.abs_error_box
            w.writerow([r.parameter, _fmt(b.q1), _fmt(b.median), _fmt(b.q3),
                        _fmt(b.whisker_low), _fmt(b.whisker_high)])
    if anova_tables:
        with open(directory / "anova.txt", "w", encoding="utf-8") as fh:
            for param, table in anova_tables.items():
                fh.write(f"[{param}]\n{anova_text_table(table)}\n\n")
