"""Device records -> numeric matrix.

The model-facing representation of a categorical value is its relative
frequency in the fitting corpus (integer label codes are kept only as a
fitted intermediate).  Price passes through numerically.  All columns are
then standard-scaled with population statistics; constant columns map to
zero and are flagged.
"""

import hashlib
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import CATEGORICAL_FEATURES, FEATURE_COLUMNS
from .errors import ConfigError, DomainError, TransformError


class UnseenValueWarning(UserWarning):
    """A category absent from the fitting corpus was smoothed at transform."""


@dataclass
class LabelCodes:
    """Integer codes assigned in first-appearance order over the corpus."""

    codes: dict[str, int]

    @property
    def cardinality(self) -> int:
        return len(self.codes)


@dataclass
class FrequencyTable:
    """value -> relative frequency over the fitting corpus (sums to 1)."""

    frequencies: dict[str, float]
    n_fit: int


@dataclass
class StandardScaler:
    """Per-column mean and population standard deviation (divisor n)."""

    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray  # flags for columns with zero spread


@dataclass
class EncodedMatrix:
    """Row-major numeric matrix plus column metadata and provenance."""

    data: np.ndarray
    columns: tuple[str, ...]
    labels: np.ndarray | None
    stages: tuple[str, ...]
    unseen: tuple[tuple[int, str, str], ...] = ()


def _column_values(records, feature):
    if feature not in FEATURE_COLUMNS:
        raise ConfigError(f"unknown feature {feature!r}")
    return [getattr(record, feature) for record in records]


def fit_label_codes(records, feature: str) -> LabelCodes:
    """Fit first-appearance integer codes for one categorical feature."""
    if not records:
        raise DomainError("cannot fit on an empty corpus")
    codes: dict[str, int] = {}
    for value in _column_values(records, feature):
        if value not in codes:
            codes[value] = len(codes)
    return LabelCodes(codes=codes)


def fit_frequency(records, feature: str) -> FrequencyTable:
    """Fit relative frequencies count(v)/n for one categorical feature."""
    if not records:
        raise DomainError("cannot fit on an empty corpus")
    if feature == "price_usd":
        raise ConfigError("price_usd is continuous, not frequency-encoded")
    values = _column_values(records, feature)
    counts: dict[str, int] = {}
    for value in values:
        counts[value] = counts.get(value, 0) + 1
    n = len(values)
    return FrequencyTable(
        frequencies={v: c / n for v, c in counts.items()}, n_fit=n
    )


def fit_scaler(matrix: np.ndarray) -> StandardScaler:
    """Fit per-column mean and population std; zero-spread columns are flagged.

    Constancy is detected on the values themselves, not on the computed
    std, which can pick up ulp-level noise from the mean.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        raise DomainError("cannot fit a scaler on an empty matrix")
    means = matrix.mean(axis=0)
    stds = matrix.std(axis=0)
    constant = (matrix == matrix[0]).all(axis=0) | (stds == 0.0)
    stds = np.where(constant, 0.0, stds)
    return StandardScaler(means=means, stds=stds, constant=constant)


def apply_scaler(matrix: np.ndarray, scaler: StandardScaler) -> np.ndarray:
    """x' = (x - mean) / std per column; constant columns map to 0."""
    matrix = np.asarray(matrix, dtype=float)
    safe = np.where(scaler.constant, 1.0, scaler.stds)
    out = (matrix - scaler.means) / safe
    if scaler.constant.any():
        out[:, scaler.constant] = 0.0
    return out


class CorpusEncoder:
    """Fitted frequency tables + scaler for the ten feature columns.

    `unseen_policy` governs values that were absent from the fitting
    corpus at transform time: "smooth" substitutes 1/(n_fit+1) and warns,
    "reject" raises.
    """

    def __init__(self, label_codes, tables, scaler, unseen_policy="smooth"):
        if unseen_policy not in ("smooth", "reject"):
            raise ConfigError(f"unknown unseen policy {unseen_policy!r}")
        self.label_codes = label_codes
        self.tables = tables
        self.scaler = scaler
        self.unseen_policy = unseen_policy

    @classmethod
    def fit(cls, records, unseen_policy: str = "smooth") -> "CorpusEncoder":
        if not records:
            raise DomainError("cannot fit an encoder on an empty corpus")
        label_codes = {f: fit_label_codes(records, f) for f in CATEGORICAL_FEATURES}
        tables = {f: fit_frequency(records, f) for f in CATEGORICAL_FEATURES}
        encoder = cls(label_codes, tables, None, unseen_policy)
        encoder.scaler = fit_scaler(encoder.frequency_matrix(records))
        return encoder

    def frequency_matrix(self, records, collect_unseen=None) -> np.ndarray:
        """The pre-scaling matrix: frequency values plus raw price."""
        n = len(records)
        out = np.empty((n, len(FEATURE_COLUMNS)), dtype=float)
        for j, feature in enumerate(FEATURE_COLUMNS):
            if feature == "price_usd":
                out[:, j] = [r.price_usd for r in records]
                continue
            table = self.tables[feature]
            fallback = 1.0 / (table.n_fit + 1)
            for i, value in enumerate(_column_values(records, feature)):
                freq = table.frequencies.get(value)
                if freq is None:
                    if self.unseen_policy == "reject":
                        raise TransformError(
                            f"unseen value {value!r} for feature {feature!r}"
                        )
                    warnings.warn(
                        f"{feature}={value!r} not in the fitting corpus; "
                        f"using frequency {fallback:.6g}",
                        UnseenValueWarning,
                        stacklevel=2,
                    )
                    if collect_unseen is not None:
                        collect_unseen.append((i, feature, value))
                    freq = fallback
                out[i, j] = freq
        return out

    def transform(self, records) -> EncodedMatrix:
        """Encode and scale records; labels come along when all rows have one."""
        if not records:
            raise DomainError("cannot transform an empty record list")
        unseen: list[tuple[int, str, str]] = []
        data = apply_scaler(self.frequency_matrix(records, unseen), self.scaler)
        labels = None
        if all(r.risk_score is not None for r in records):
            labels = np.array([int(r.risk_score) for r in records], dtype=int)
        return EncodedMatrix(
            data=data,
            columns=FEATURE_COLUMNS,
            labels=labels,
            stages=("frequency", "scale"),
            unseen=tuple(unseen),
        )

    def to_payload(self) -> dict:
        return {
            "unseen_policy": self.unseen_policy,
            "features": {
                f: {
                    "codes": self.label_codes[f].codes,
                    "frequencies": self.tables[f].frequencies,
                    "n_fit": self.tables[f].n_fit,
                }
                for f in CATEGORICAL_FEATURES
            },
            "scaler": {
                "columns": list(FEATURE_COLUMNS),
                "means": self.scaler.means.tolist(),
                "stds": self.scaler.stds.tolist(),
            },
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "CorpusEncoder":
        features = payload["features"]
        label_codes = {
            f: LabelCodes(codes={k: int(v) for k, v in d["codes"].items()})
            for f, d in features.items()
        }
        tables = {
            f: FrequencyTable(
                frequencies={k: float(v) for k, v in d["frequencies"].items()},
                n_fit=int(d["n_fit"]),
            )
            for f, d in features.items()
        }
        stds = np.array(payload["scaler"]["stds"], dtype=float)
        scaler = StandardScaler(
            means=np.array(payload["scaler"]["means"], dtype=float),
            stds=stds,
            constant=stds == 0.0,
        )
        return cls(label_codes, tables, scaler, payload["unseen_policy"])

    def fingerprint(self) -> str:
        """Stable digest of the fitted state; model files pin this."""
        canonical = json.dumps(self.to_payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class CorrelationReport:
    """Pairwise Pearson correlations with unit diagonal.

    Constant columns get correlation 0 against everything by convention
    and are listed in `constant`.
    """

    names: tuple[str, ...]
    matrix: np.ndarray
    constant: tuple[str, ...] = ()


def correlation_matrix(
    encoded: EncodedMatrix, include_label: bool = False
) -> CorrelationReport:
    """Pearson correlation over the encoded columns (optionally the label)."""
    data = np.asarray(encoded.data, dtype=float)
    names = list(encoded.columns)
    if include_label:
        if encoded.labels is None:
            raise DomainError("correlation with label requested on unlabelled rows")
        data = np.column_stack([data, encoded.labels.astype(float)])
        names.append("risk_score")
    if data.shape[0] < 2:
        raise DomainError("correlation needs at least two rows")
    stds = data.std(axis=0)
    constant = stds == 0.0
    centered = data - data.mean(axis=0)
    safe = np.where(constant, 1.0, stds)
    normed = centered / safe
    corr = (normed.T @ normed) / data.shape[0]
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    np.fill_diagonal(corr, 1.0)
    corr = np.clip(corr, -1.0, 1.0)
    return CorrelationReport(
        names=tuple(names),
        matrix=corr,
        constant=tuple(n for n, flag in zip(names, constant) if flag),
    )


def correlation_to_csv(report: CorrelationReport) -> str:
    """CSV rendering of a correlation matrix, for external plotting."""
    lines = ["," + ",".join(report.names)]
    for name, row in zip(report.names, report.matrix):
        lines.append(name + "," + ",".join(f"{v:.6f}" for v in row))
    return "\n".join(lines) + "\n"
