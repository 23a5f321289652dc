"""Aggregation of evaluation rows into the study's summary artifacts:
per-method error and sparsity tables (delimited text) plus boxplot-style
comparison figures rendered to PNG files."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fileio import read_delimited, write_delimited
from .metrics import EvalReport, sparsity_table


@dataclass(frozen=True)
class EvaluationRow:
    method: str
    rep: int
    grid_index: int
    scale_factor: float
    lam: float
    err_re: float
    err_im: float
    err_sum: float
    count_re: int
    count_im: int
    nonnull_re: bool
    nonnull_im: bool


def load_evaluation(path) -> list[EvaluationRow]:
    header, raw_rows = read_delimited(path)
    if not header:
        return []
    idx = {name: k for k, name in enumerate(header)}
    rows = []
    for raw in raw_rows:
        rows.append(
            EvaluationRow(
                method=raw[idx["method"]],
                rep=int(raw[idx["rep"]]),
                grid_index=int(raw[idx["grid_index"]]),
                scale_factor=float(raw[idx["scale_factor"]]),
                lam=float(raw[idx["lambda"]]),
                err_re=float(raw[idx["err_re"]]),
                err_im=float(raw[idx["err_im"]]),
                err_sum=float(raw[idx["err_sum"]]),
                count_re=int(raw[idx["count_re"]]),
                count_im=int(raw[idx["count_im"]]),
                nonnull_re=raw[idx["nonnull_re"]] == "1",
                nonnull_im=raw[idx["nonnull_im"]] == "1",
            )
        )
    return rows


def select_best_lambda(rows: list[EvaluationRow]) -> dict[tuple[str, int], EvaluationRow]:
    """Per (method, rep): the row minimizing err_re + err_im, ties going to
    the lowest λ."""
    best: dict[tuple[str, int], EvaluationRow] = {}
    for row in rows:
        key = (row.method, row.rep)
        current = best.get(key)
        if current is None or (row.err_sum, row.lam) < (current.err_sum, current.lam):
            best[key] = row
    return best


def _quartiles(values) -> tuple[float, float, float]:
    arr = np.asarray(list(values), dtype=float)
    q25, q50, q75 = np.percentile(arr, [25.0, 50.0, 75.0])
    return float(q25), float(q50), float(q75)


def summarize_best(rows: list[EvaluationRow]) -> tuple[list[list], list[list]]:
    """Error and count distributions (median and quartiles) per method and
    part, over the per-repetition best-λ selections."""
    best = select_best_lambda(rows)
    methods = sorted({method for method, _ in best})
    error_rows = []
    count_rows = []
    for method in methods:
        chosen = [row for (meth, _), row in best.items() if meth == method]
        for part, errs, counts in (
            ("re", [r.err_re for r in chosen], [r.count_re for r in chosen]),
            ("im", [r.err_im for r in chosen], [r.count_im for r in chosen]),
        ):
            e25, e50, e75 = _quartiles(errs)
            c25, c50, c75 = _quartiles(counts)
            error_rows.append([method, part, len(chosen), e25, e50, e75])
            count_rows.append([method, part, len(chosen), c25, c50, c75])
    return error_rows, count_rows


def build_sparsity_rows(rows: list[EvaluationRow], configuration: int) -> list[list]:
    """Sparsity table over the one-step grid, one group per regularization
    level. Levels are keyed by the scale factor κ: the absolute λ = κ·λ*
    varies per repetition with the data."""
    groups: dict[tuple[float, int], list[EvalReport]] = {}
    for row in rows:
        if row.method != "one-step":
            continue
        groups.setdefault((row.scale_factor, configuration), []).append(
            EvalReport(
                err_re=row.err_re,
                err_im=row.err_im,
                count_re=row.count_re,
                count_im=row.count_im,
                has_nonnull_re=row.nonnull_re,
                has_nonnull_im=row.nonnull_im,
            )
        )
    table = []
    for sparsity in sparsity_table(groups):
        table.append(
            [
                sparsity.configuration,
                sparsity.lambda_key,
                sparsity.part,
                sparsity.runs,
                sparsity.pct_nonnull,
                sparsity.count_min,
                sparsity.count_max,
                sparsity.count_mean,
                sparsity.count_mean_all,
            ]
        )
    return table


def write_report(out_dir, configuration: int, figures: bool = True) -> dict[str, str]:
    """Write report tables (and optionally figures) under out_dir/report."""
    out = Path(out_dir)
    report_dir = out / "report"
    rows = load_evaluation(out / "evaluation.tsv")
    if not rows:
        raise ValueError("evaluation.tsv is empty; run 'evaluate' first")

    error_rows, count_rows = summarize_best(rows)
    sparsity_rows = build_sparsity_rows(rows, configuration)
    best = select_best_lambda(rows)
    best_rows = [
        [method, rep, row.grid_index, row.scale_factor, row.lam, row.err_re, row.err_im,
         row.err_sum, row.count_re, row.count_im]
        for (method, rep), row in sorted(best.items())
    ]

    outputs = {}
    write_delimited(
        report_dir / "report_errors.tsv",
        ["method", "part", "reps", "q25", "median", "q75"],
        error_rows,
    )
    outputs["errors"] = "report/report_errors.tsv"
    write_delimited(
        report_dir / "report_counts.tsv",
        ["method", "part", "reps", "q25", "median", "q75"],
        count_rows,
    )
    outputs["counts"] = "report/report_counts.tsv"
    write_delimited(
        report_dir / "report_sparsity.tsv",
        ["configuration", "scale_factor", "part", "runs", "pct_nonnull",
         "count_min", "count_max", "count_mean", "count_mean_all"],
        sparsity_rows,
    )
    outputs["sparsity"] = "report/report_sparsity.tsv"
    write_delimited(
        report_dir / "best_lambda.tsv",
        ["method", "rep", "grid_index", "scale_factor", "lambda",
         "err_re", "err_im", "err_sum", "count_re", "count_im"],
        best_rows,
    )
    outputs["best_lambda"] = "report/best_lambda.tsv"

    if figures:
        outputs.update(render_figures(report_dir / "figures", rows, configuration))
    return outputs


def render_figures(figure_dir, rows: list[EvaluationRow], configuration: int) -> dict[str, str]:
    """Boxplots of best-λ errors and connection counts, one-step vs two-step,
    plus the sparsity trend across the one-step λ grid."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    figure_dir = Path(figure_dir)
    figure_dir.mkdir(parents=True, exist_ok=True)
    best = select_best_lambda(rows)
    methods = sorted({method for method, _ in best})
    outputs = {}

    def _boxpanel(ax, values_by_method, title, ylabel):
        data = [values_by_method[m] for m in methods]
        ax.boxplot(data, tick_labels=methods, showfliers=False)
        ax.set_title(title)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)

    fig, axes = plt.subplots(2, 2, figsize=(9, 7))
    panels = [
        ("err_re", "Error, real part", lambda r: r.err_re, axes[0, 0]),
        ("err_im", "Error, imaginary part", lambda r: r.err_im, axes[0, 1]),
        ("count_re", "Connections, real part", lambda r: r.count_re, axes[1, 0]),
        ("count_im", "Connections, imaginary part", lambda r: r.count_im, axes[1, 1]),
    ]
    for _, title, getter, ax in panels:
        values = {
            m: [getter(row) for (meth, _), row in best.items() if meth == m] for m in methods
        }
        ylabel = "localization error (m)" if title.startswith("Error") else "supra-threshold pairs"
        _boxpanel(ax, values, title, ylabel)
    fig.suptitle(f"Configuration {configuration}: best-λ comparison")
    fig.tight_layout()
    comparison_path = figure_dir / "method_comparison.png"
    fig.savefig(comparison_path, dpi=150)
    plt.close(fig)
    outputs["figure_comparison"] = str(comparison_path)

    one_step = [r for r in rows if r.method == "one-step"]
    if one_step:
        kappas = sorted({r.scale_factor for r in one_step})
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
        for part, getter, nonnull in (
            ("re", lambda r: r.count_re, lambda r: r.nonnull_re),
            ("im", lambda r: r.count_im, lambda r: r.nonnull_im),
        ):
            means = [
                np.mean([getter(r) for r in one_step if r.scale_factor == k]) for k in kappas
            ]
            pct = [
                100.0 * np.mean([nonnull(r) for r in one_step if r.scale_factor == k])
                for k in kappas
            ]
            ax1.semilogx(kappas, means, marker="o", label=part)
            ax2.semilogx(kappas, pct, marker="o", label=part)
        ax1.set_xlabel("scale factor κ (λ = κ·λ*)")
        ax1.set_ylabel("mean supra-threshold pairs")
        ax2.set_xlabel("scale factor κ (λ = κ·λ*)")
        ax2.set_ylabel("% runs with non-null part")
        for ax in (ax1, ax2):
            ax.grid(True, alpha=0.3)
            ax.legend()
        fig.suptitle(f"Configuration {configuration}: sparsity across the λ grid")
        fig.tight_layout()
        trend_path = figure_dir / "sparsity_trend.png"
        fig.savefig(trend_path, dpi=150)
        plt.close(fig)
        outputs["figure_sparsity"] = str(trend_path)
    return outputs
