"""Pipeline assembly: mode handling (plain / t-SNE / PCA), parameter
profiles, model fitting over a corpus, and device scoring.

The reduced modes embed the scaled matrix, cluster the embedding with
k-means, and append the cluster id as a frequency-encoded, rescaled
column; the classifier then trains on the augmented matrix.  Embedding
and clustering run over the full matrix before any split, mirroring the
staged flow the evaluation tables assume.
"""

from dataclasses import dataclass, field

import numpy as np

from .dataset import DeviceRecord
from .dimred import (
    KmeansModel,
    PcaModel,
    TsneConfig,
    append_cluster_feature,
    cluster_frequencies,
    kmeans_assign,
    kmeans_fit,
    pca_fit,
    pca_transform,
    tsne_embed,
)
from .encoding import CorpusEncoder, EncodedMatrix, StandardScaler, apply_scaler, fit_scaler
from .ensemble import ModelSpec, fit_model
from .errors import ConfigError
from .nvd import RISK_CLASSES, RiskClass
from .util import derived_seed

MODES = ("wo_dr", "tsne", "pca")
FAMILIES = ("gbdt", "rfc", "voting")
PROFILES = ("desk", "paper")

_PROFILE_PARAMS = {
    "gbdt": {
        "desk": {"n_stages": 300, "learning_rate": 0.05, "max_depth": 6,
                 "min_impurity_decrease": 1e-3},
        "paper": {"n_stages": 10000, "learning_rate": 0.01, "max_depth": 500,
                  "min_impurity_decrease": 1e-2},
    },
    "rfc": {
        "desk": {"n_trees": 100, "class_weights": "balanced"},
        "paper": {"n_trees": 100, "class_weights": "balanced"},
    },
    "etc": {
        "desk": {"n_trees": 100},
        "paper": {"n_trees": 100},
    },
    "abc": {
        "desk": {"n_rounds": 50, "base_depth": 1},
        "paper": {"n_rounds": 50, "base_depth": 1},
    },
}


def profile_params(family: str, profile: str, overrides: dict | None = None) -> dict:
    """Resolved keyword parameters for a model family and profile."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    if family == "voting":
        if overrides:
            raise ConfigError("parameter overrides apply to a single model family")
        members = [
            {"family": f, "params": profile_params(f, profile)}
            for f in ("abc", "gbdt", "etc", "rfc")
        ]
        return {"members": members}
    if family not in _PROFILE_PARAMS:
        raise ConfigError(f"unknown model family {family!r}")
    params = dict(_PROFILE_PARAMS[family][profile])
    params.update(overrides or {})
    return params


@dataclass
class PipelineConfig:
    """Everything a train / evaluate / cv run needs, seed included."""

    mode: str = "wo_dr"
    family: str = "gbdt"
    profile: str = "desk"
    overrides: dict = field(default_factory=dict)
    seed: int = 0
    clusters: int = 4
    components: int | None = None
    k: int = 5
    repeats: int = 2
    test_fraction: float = 0.2
    threads: int = 1

    def validate(self) -> "PipelineConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {'/'.join(MODES)}, got {self.mode!r}")
        if self.family not in FAMILIES:
            raise ConfigError(
                f"model must be one of {'/'.join(FAMILIES)}, got {self.family!r}"
            )
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be desk or paper, got {self.profile!r}")
        if self.seed is None:
            raise ConfigError("a seed is mandatory; there is no wall-clock seeding")
        return self

    def model_spec(self) -> ModelSpec:
        return ModelSpec(
            family=self.family,
            params=profile_params(self.family, self.profile, self.overrides),
            seed=self.seed,
        )


@dataclass
class DimredArtifacts:
    """Fitted reduction stage, kept so pca-mode models can score new rows."""

    mode: str
    pca: PcaModel | None = None
    kmeans: KmeansModel | None = None
    cluster_freqs: np.ndarray | None = None
    cluster_scaler: StandardScaler | None = None
    tsne_kl: tuple[float, float] | None = None


def build_design(
    encoded: EncodedMatrix,
    mode: str,
    seed: int,
    clusters: int = 4,
    components: int | None = None,
) -> tuple[EncodedMatrix, DimredArtifacts]:
    """Apply the reduction stage of a mode to an encoded matrix."""
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if mode == "wo_dr":
        return encoded, DimredArtifacts(mode=mode)
    artifacts = DimredArtifacts(mode=mode)
    if mode == "tsne":
        embedding = tsne_embed(encoded.data, TsneConfig(seed=derived_seed(seed, 101)))
        points = embedding.coordinates
        artifacts.tsne_kl = (embedding.kl_initial, embedding.kl_final)
        stage = "tsne"
    else:
        artifacts.pca = pca_fit(encoded.data, components)
        points = pca_transform(encoded.data, artifacts.pca)
        stage = "pca"
    artifacts.kmeans = kmeans_fit(points, clusters, seed=derived_seed(seed, 102))
    artifacts.cluster_freqs = cluster_frequencies(
        artifacts.kmeans.assignments, len(artifacts.kmeans.centroids)
    )
    augmented = append_cluster_feature(encoded, artifacts.kmeans)
    artifacts.cluster_scaler = fit_scaler(augmented.data[:, -1:])
    augmented.data[:, -1:] = apply_scaler(
        augmented.data[:, -1:], artifacts.cluster_scaler
    )
    augmented = EncodedMatrix(
        data=augmented.data,
        columns=augmented.columns,
        labels=augmented.labels,
        stages=encoded.stages + (stage, "cluster"),
        unseen=augmented.unseen,
    )
    return augmented, artifacts


@dataclass
class PipelineModel:
    """A fitted classifier plus the stage artifacts needed to score rows."""

    mode: str
    family: str
    seed: int
    params: dict
    dimred: DimredArtifacts
    model: object


def fit_pipeline(
    records: list[DeviceRecord], config: PipelineConfig
) -> tuple[CorpusEncoder, PipelineModel]:
    """Fit encoder, reduction stage and classifier on a labelled corpus."""
    config.validate()
    encoder = CorpusEncoder.fit(records)
    encoded = encoder.transform(records)
    design, artifacts = build_design(
        encoded, config.mode, config.seed, config.clusters, config.components
    )
    spec = config.model_spec()
    model = fit_model(
        spec, design.data, design.labels, n_classes=len(RISK_CLASSES),
        threads=config.threads,
    )
    return encoder, PipelineModel(
        mode=config.mode,
        family=config.family,
        seed=config.seed,
        params=spec.params,
        dimred=artifacts,
        model=model,
    )


def design_for_rows(
    encoder: CorpusEncoder, pipeline: PipelineModel, records
) -> EncodedMatrix:
    """Encode new rows through a fitted pipeline's stages."""
    encoded = encoder.transform(records)
    if pipeline.mode == "wo_dr":
        return encoded
    if pipeline.mode == "tsne":
        raise ConfigError(
            "tsne-mode models cannot score new devices: the embedding has "
            "no out-of-sample transform"
        )
    artifacts = pipeline.dimred
    scores = pca_transform(encoded.data, artifacts.pca)
    assignments = kmeans_assign(scores, artifacts.kmeans)
    column = artifacts.cluster_freqs[assignments][:, None]
    column = apply_scaler(column, artifacts.cluster_scaler)
    return EncodedMatrix(
        data=np.column_stack([encoded.data, column[:, 0]]),
        columns=encoded.columns + ("cluster",),
        labels=encoded.labels,
        stages=encoded.stages + ("pca", "cluster"),
        unseen=encoded.unseen,
    )


@dataclass
class Prediction:
    risk: RiskClass
    probabilities: np.ndarray
    warnings: tuple[str, ...] = ()


@dataclass
class PredictionReport:
    predictions: list[Prediction]


def predict_devices(
    encoder: CorpusEncoder, pipeline: PipelineModel, records
) -> PredictionReport:
    """Score device rows; unseen-category smoothing is reported per row."""
    design = design_for_rows(encoder, pipeline, records)
    probabilities = pipeline.model.predict_proba(design.data)
    labels = np.argmax(probabilities, axis=1)
    notes: dict[int, list[str]] = {}
    for row, feature, value in design.unseen:
        notes.setdefault(row, []).append(
            f"{feature}={value!r} was not in the training corpus"
        )
    return PredictionReport(
        predictions=[
            Prediction(
                risk=RiskClass(int(labels[i])),
                probabilities=probabilities[i],
                warnings=tuple(notes.get(i, ())),
            )
            for i in range(len(records))
        ]
    )
