"""Versioned on-disk formats for encoders and trained models.

Both artifacts are canonical JSON (sorted keys, fixed separators), so a
run with identical inputs and seed writes byte-identical files.  A model
file pins the fingerprint of the encoder it was trained with, and loading
rejects a mismatched sidecar.
"""

import json
from pathlib import Path

import numpy as np

from .dimred import KmeansModel, PcaModel
from .encoding import CorpusEncoder, StandardScaler
from .ensemble import model_from_payload
from .errors import DataFormatError
from .nvd import RISK_CLASSES
from .pipeline import DimredArtifacts, PipelineModel

ENCODER_FORMAT = "iotrisk-encoders/1"
MODEL_FORMAT = "iotrisk-model/1"

CLASS_ORDERING = [c.name for c in RISK_CLASSES]


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def save_encoder(path: str | Path, encoder: CorpusEncoder) -> None:
    payload = {"format": ENCODER_FORMAT}
    payload.update(encoder.to_payload())
    # the sidecar is meant to be read by people; fingerprints hash the
    # canonical compact form, so the indentation changes nothing
    text = json.dumps(payload, sort_keys=True, indent=1) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_encoder(path: str | Path) -> CorpusEncoder:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not valid JSON ({exc.msg})") from exc
    if payload.get("format") != ENCODER_FORMAT:
        raise DataFormatError(
            f"{path}: expected format {ENCODER_FORMAT}, got {payload.get('format')!r}"
        )
    return CorpusEncoder.from_payload(payload)


def _scaler_payload(scaler: StandardScaler | None):
    if scaler is None:
        return None
    return {"means": scaler.means.tolist(), "stds": scaler.stds.tolist()}


def _scaler_from(payload) -> StandardScaler | None:
    if payload is None:
        return None
    stds = np.asarray(payload["stds"], dtype=float)
    return StandardScaler(
        means=np.asarray(payload["means"], dtype=float),
        stds=stds,
        constant=stds == 0.0,
    )


def _dimred_payload(artifacts: DimredArtifacts) -> dict:
    payload: dict = {"mode": artifacts.mode}
    if artifacts.pca is not None:
        payload["pca"] = {
            "components": artifacts.pca.components.tolist(),
            "explained_variance_ratio": artifacts.pca.explained_variance_ratio.tolist(),
            "means": artifacts.pca.means.tolist(),
        }
    if artifacts.kmeans is not None:
        payload["kmeans"] = {
            "centroids": artifacts.kmeans.centroids.tolist(),
            "seed": artifacts.kmeans.seed,
        }
        payload["cluster_freqs"] = artifacts.cluster_freqs.tolist()
        payload["cluster_scaler"] = _scaler_payload(artifacts.cluster_scaler)
    if artifacts.tsne_kl is not None:
        payload["tsne_kl"] = list(artifacts.tsne_kl)
    return payload


def _dimred_from(payload: dict) -> DimredArtifacts:
    artifacts = DimredArtifacts(mode=payload["mode"])
    if "pca" in payload:
        artifacts.pca = PcaModel(
            components=np.asarray(payload["pca"]["components"], dtype=float),
            explained_variance_ratio=np.asarray(
                payload["pca"]["explained_variance_ratio"], dtype=float
            ),
            means=np.asarray(payload["pca"]["means"], dtype=float),
        )
    if "kmeans" in payload:
        centroids = np.asarray(payload["kmeans"]["centroids"], dtype=float)
        artifacts.kmeans = KmeansModel(
            centroids=centroids,
            assignments=np.empty(0, dtype=int),
            inertia=0.0,
            n_iter=0,
            seed=int(payload["kmeans"]["seed"]),
        )
        artifacts.cluster_freqs = np.asarray(payload["cluster_freqs"], dtype=float)
        artifacts.cluster_scaler = _scaler_from(payload["cluster_scaler"])
    if "tsne_kl" in payload:
        artifacts.tsne_kl = tuple(payload["tsne_kl"])
    return artifacts


def save_model(
    path: str | Path, pipeline: PipelineModel, encoder_fingerprint: str
) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "classes": CLASS_ORDERING,
        "encoder_fingerprint": encoder_fingerprint,
        "mode": pipeline.mode,
        "family": pipeline.family,
        "seed": pipeline.seed,
        "params": pipeline.params,
        "dimred": _dimred_payload(pipeline.dimred),
        "model": pipeline.model.to_payload(),
    }
    Path(path).write_text(canonical_json(payload), encoding="utf-8")


def load_model(
    path: str | Path, expected_fingerprint: str | None = None
) -> PipelineModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not valid JSON ({exc.msg})") from exc
    if payload.get("format") != MODEL_FORMAT:
        raise DataFormatError(
            f"{path}: expected format {MODEL_FORMAT}, got {payload.get('format')!r}"
        )
    if payload.get("classes") != CLASS_ORDERING:
        raise DataFormatError(f"{path}: unexpected class ordering {payload.get('classes')}")
    if (
        expected_fingerprint is not None
        and payload.get("encoder_fingerprint") != expected_fingerprint
    ):
        raise DataFormatError(
            f"{path}: encoder fingerprint mismatch; the model was trained "
            "with a different encoder"
        )
    return PipelineModel(
        mode=payload["mode"],
        family=payload["family"],
        seed=int(payload["seed"]),
        params=payload["params"],
        dimred=_dimred_from(payload["dimred"]),
        model=model_from_payload(payload["model"]),
    )
