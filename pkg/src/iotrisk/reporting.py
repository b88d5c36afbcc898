"""Plain-text and CSV renderings of summaries, cross-validation runs,
test metrics, tuning rankings, ablations and predictions.

The cross-validation layout is one row per run with R{repeat}-F{fold}
columns plus mean and std; the metrics layout is one row per metric with
per-class, Macro and Micro/ACC columns.  Values are percentages with one
decimal.
"""

from .dataset import CorpusSummary
from .evaluation import AblationReport, CvResult, MetricsReport, TuneResult
from .nvd import RISK_CLASSES
from .pipeline import PredictionReport

CLASS_NAMES = tuple(c.name for c in RISK_CLASSES)


def _table(rows: list[list[str]]) -> str:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for row in rows:
        cells = [row[0].ljust(widths[0])]
        cells += [cell.rjust(w) for cell, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def _pct(value: float) -> str:
    return f"{100.0 * value:.1f}"


def format_summary(summary: CorpusSummary) -> str:
    rows = [["class", "count", "share"]]
    for cls in RISK_CLASSES:
        count, fraction = summary.per_class[cls]
        rows.append([cls.name, str(count), f"{100.0 * fraction:.0f}%"])
    rows.append(["total", str(summary.total), ""])
    return _table(rows)


def format_cv(
    runs: list[tuple[str, CvResult]], k: int, repeats: int, seed: int, family: str
) -> str:
    header = ["mode"] + list(runs[0][1].fold_labels) + ["mean", "std"]
    rows = [header]
    for label, result in runs:
        rows.append(
            [label]
            + [_pct(a) for a in result.accuracies]
            + [_pct(result.mean), _pct(result.std)]
        )
    title = (
        f"stratified cross-validation accuracy (%), model={family}, "
        f"k={k}, repeats={repeats}, seed={seed}\n"
    )
    return title + _table(rows)


def cv_csv(runs: list[tuple[str, CvResult]]) -> str:
    header = ["mode"] + list(runs[0][1].fold_labels) + ["mean", "std"]
    lines = [",".join(header)]
    for label, result in runs:
        cells = [label] + [f"{a:.6f}" for a in result.accuracies]
        cells += [f"{result.mean:.6f}", f"{result.std:.6f}"]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def format_metrics(report: MetricsReport, title: str = "") -> str:
    rows = [["metric", *CLASS_NAMES, "Macro", "Micro/ACC"]]
    for name, per_class, macro, micro in (
        ("Precision", report.precision, report.macro_precision, report.micro_precision),
        ("Recall", report.recall, report.macro_recall, report.micro_recall),
        ("F-1", report.f1, report.macro_f1, report.micro_f1),
    ):
        rows.append([name] + [_pct(v) for v in per_class] + [_pct(macro), _pct(micro)])
    out = (title + "\n" if title else "") + _table(rows)
    out += f"accuracy: {_pct(report.accuracy)}%\n"
    out += "confusion matrix (rows true, columns predicted):\n"
    matrix_rows = [["", *CLASS_NAMES]]
    for cls, row in zip(CLASS_NAMES, report.confusion):
        matrix_rows.append([cls] + [str(int(v)) for v in row])
    out += _table(matrix_rows)
    if report.zero_division:
        noted = ", ".join(
            f"{CLASS_NAMES[c]}/{metric}" for c, metric in report.zero_division
        )
        out += f"zero-denominator metrics reported as 0: {noted}\n"
    return out


def metrics_csv(report: MetricsReport) -> str:
    lines = ["metric," + ",".join(CLASS_NAMES) + ",Macro,Micro/ACC"]
    for name, per_class, macro, micro in (
        ("Precision", report.precision, report.macro_precision, report.micro_precision),
        ("Recall", report.recall, report.macro_recall, report.micro_recall),
        ("F-1", report.f1, report.macro_f1, report.micro_f1),
    ):
        cells = [name] + [f"{v:.6f}" for v in per_class]
        cells += [f"{macro:.6f}", f"{micro:.6f}"]
        lines.append(",".join(cells))
    lines.append(f"Accuracy,{report.accuracy:.6f}")
    return "\n".join(lines) + "\n"


def format_tune(result: TuneResult) -> str:
    names = sorted({k for config in result.configs for k in config})
    rows = [["rank", *names, "mean", "std"]]
    for rank, index in enumerate(result.ranking, start=1):
        config = result.configs[index]
        rows.append(
            [str(rank)]
            + [str(config.get(n, "")) for n in names]
            + [_pct(result.means[index]), _pct(result.stds[index])]
        )
    out = _table(rows)
    metric = result.metric.replace("_", " ")
    out += (
        f"winner: {result.winner} "
        f"(mean {metric} {_pct(result.means[result.winner_index])}%)\n"
    )
    return out


def tune_csv(result: TuneResult) -> str:
    names = sorted({k for config in result.configs for k in config})
    lines = [",".join(["rank", *names, "mean", "std"])]
    for rank, index in enumerate(result.ranking, start=1):
        config = result.configs[index]
        cells = [str(rank)] + [str(config.get(n, "")) for n in names]
        cells += [f"{result.means[index]:.6f}", f"{result.stds[index]:.6f}"]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def format_ablation(report: AblationReport) -> str:
    rows = [["feature", "mean", "delta"]]
    for entry in report.entries:
        rows.append([entry.feature, _pct(entry.mean), _pct(entry.delta)])
    title = (
        f"baseline mean accuracy {_pct(report.baseline_mean)}% "
        f"(std {_pct(report.baseline_std)}); delta = mean after dropping the feature\n"
    )
    return title + _table(rows)


def ablation_csv(report: AblationReport) -> str:
    lines = ["feature,mean,delta"]
    for entry in report.entries:
        lines.append(f"{entry.feature},{entry.mean:.6f},{entry.delta:.6f}")
    return "\n".join(lines) + "\n"


def format_predictions(report: PredictionReport) -> str:
    rows = [["row", "predicted", *[f"p({c})" for c in CLASS_NAMES]]]
    for i, prediction in enumerate(report.predictions):
        rows.append(
            [str(i), prediction.risk.name]
            + [f"{p:.3f}" for p in prediction.probabilities]
        )
    out = _table(rows)
    for i, prediction in enumerate(report.predictions):
        for note in prediction.warnings:
            out += f"warning: row {i}: {note}\n"
    return out


def predictions_csv(report: PredictionReport) -> str:
    lines = ["row,predicted," + ",".join(f"p_{c}" for c in CLASS_NAMES) + ",warnings"]
    for i, prediction in enumerate(report.predictions):
        cells = [str(i), prediction.risk.name]
        cells += [f"{p:.6f}" for p in prediction.probabilities]
        cells.append("; ".join(prediction.warnings).replace(",", ";"))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
