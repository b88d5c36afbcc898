"""Optional embedding and clustering stages: PCA, exact t-SNE, k-means.

These feed the two reduced pipelines: a 2-D t-SNE embedding or a PCA
projection is clustered with k-means and the cluster id joins the feature
matrix as a relative cluster-size frequency.

The t-SNE here is the exact O(n^2) formulation: per-row Gaussian
bandwidths found by binary search to the target perplexity, symmetrized
joint probabilities, Student-t low-dimensional affinities, gradient
descent with early exaggeration and a momentum switch.
"""

from dataclasses import dataclass, field

import numpy as np

from .encoding import EncodedMatrix
from .errors import ConfigError, DomainError

_EPS = np.finfo(float).tiny


@dataclass
class PcaModel:
    """Orthonormal principal axes (rows), variance ratios, column means."""

    components: np.ndarray  # (n_components, n_features)
    explained_variance_ratio: np.ndarray
    means: np.ndarray


def pca_fit(matrix, n_components: int | None = None) -> PcaModel:
    """Fit principal axes of the column-centered data.

    Components are the top eigenvectors of the covariance matrix in
    eigenvalue order (computed via SVD of the centered data).  When
    `n_components` is omitted, the smallest count preserving >= 95% of the
    variance is kept.  Signs are fixed so each component's
    largest-magnitude entry is positive.
    """
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError("pca_fit needs a non-empty 2-D matrix")
    n, d = X.shape
    means = X.mean(axis=0)
    centered = X - means
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    variances = singular**2
    total = variances.sum()
    ratios = variances / total if total > 0 else np.zeros_like(variances)
    if n_components is None:
        cumulative = np.cumsum(ratios)
        n_components = int(np.searchsorted(cumulative, 0.95 - 1e-12) + 1)
        n_components = min(n_components, len(ratios))
    if not 1 <= n_components <= min(n, d):
        raise DomainError(
            f"n_components {n_components} outside [1, {min(n, d)}]"
        )
    components = vt[:n_components].copy()
    flips = np.abs(components).argmax(axis=1)
    signs = np.sign(components[np.arange(len(components)), flips])
    signs[signs == 0] = 1.0
    components *= signs[:, None]
    return PcaModel(
        components=components,
        explained_variance_ratio=ratios[:n_components],
        means=means,
    )


def pca_transform(matrix, model: PcaModel) -> np.ndarray:
    """Centered data projected onto the principal axes."""
    X = np.asarray(matrix, dtype=float)
    return (X - model.means) @ model.components.T


def pca_inverse_transform(scores, model: PcaModel) -> np.ndarray:
    """Back-projection of principal scores into feature space."""
    return np.asarray(scores, dtype=float) @ model.components + model.means


@dataclass
class TsneConfig:
    perplexity: float = 30.0
    n_dims: int = 2
    n_iter: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iter: int = 250  # momentum switches 0.5 -> 0.8 here too
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    seed: int = 0


@dataclass
class TsneEmbedding:
    coordinates: np.ndarray
    kl_initial: float
    kl_final: float


def _squared_distances(X):
    norms = (X * X).sum(axis=1)
    d2 = norms[:, None] + norms[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def conditional_probabilities(
    matrix, perplexity: float, tol: float = 1e-3, max_steps: int = 100
) -> np.ndarray:
    """Row-conditional Gaussian affinities calibrated to a perplexity.

    Per row, the bandwidth is found by binary search until the conditional
    distribution's perplexity 2^H is within `tol` of the target (or the
    step budget runs out, as happens on degenerate geometry where the
    perplexity is constant in the bandwidth).
    """
    X = np.asarray(matrix, dtype=float)
    n = X.shape[0]
    if not 0 < perplexity < n - 1 + 1e-12:
        raise ConfigError(f"perplexity {perplexity} infeasible for {n} rows")
    d2 = _squared_distances(X)
    P = np.zeros((n, n))
    for i in range(n):
        others = np.delete(d2[i], i)
        beta, beta_lo, beta_hi = 1.0, 0.0, np.inf
        row = None
        for _ in range(max_steps):
            kernel = np.exp(-others * beta)
            total = kernel.sum()
            if total <= 0:
                row = np.full_like(others, 1.0 / len(others))
            else:
                row = kernel / total
            entropy = -(row * np.log2(np.maximum(row, _EPS))).sum()
            current = 2.0**entropy
            if abs(current - perplexity) <= tol:
                break
            if current > perplexity:  # too flat: sharpen
                beta_lo = beta
                beta = beta * 2.0 if np.isinf(beta_hi) else (beta + beta_hi) / 2.0
            else:
                beta_hi = beta
                beta = beta / 2.0 if beta_lo == 0.0 else (beta + beta_lo) / 2.0
        P[i, np.arange(n) != i] = row
    return P


def joint_probabilities(matrix, perplexity: float) -> np.ndarray:
    """Symmetrized affinities p_ij = (p_j|i + p_i|j) / 2n; entries sum to 1."""
    conditional = conditional_probabilities(matrix, perplexity)
    return (conditional + conditional.T) / (2.0 * conditional.shape[0])


def _kl_and_gradient(P, Y):
    d2 = _squared_distances(Y)
    kernel = 1.0 / (1.0 + d2)
    np.fill_diagonal(kernel, 0.0)
    Q = kernel / kernel.sum()
    kl = float(
        (P * np.log(np.maximum(P, _EPS) / np.maximum(Q, _EPS))).sum()
    )
    coeff = (P - Q) * kernel
    grad = 4.0 * ((np.diag(coeff.sum(axis=1)) - coeff) @ Y)
    return kl, grad


def tsne_embed(matrix, config: TsneConfig | None = None) -> TsneEmbedding:
    """Exact t-SNE of the rows of `matrix`.

    Gradient descent starts from a small seeded Gaussian layout, runs an
    early-exaggeration phase, then continues with higher momentum.  The
    reported divergences are against the plain (unexaggerated) affinities,
    and the final one is checked to improve on the initial one.
    """
    config = config or TsneConfig()
    X = np.asarray(matrix, dtype=float)
    if X.shape[0] < 4:
        raise DomainError("t-SNE needs at least 4 rows")
    P = joint_probabilities(X, config.perplexity)
    rng = np.random.default_rng(config.seed)
    Y = rng.normal(scale=1e-4, size=(X.shape[0], config.n_dims))
    kl_initial, _ = _kl_and_gradient(P, Y)

    update = np.zeros_like(Y)
    gains = np.ones_like(Y)  # per-coordinate adaptive rates keep lr=200 stable
    for iteration in range(config.n_iter):
        early = iteration < config.exaggeration_iter
        momentum = config.momentum_early if early else config.momentum_late
        target = P * config.early_exaggeration if early else P
        _, grad = _kl_and_gradient(target, Y)
        agree = update * grad < 0.0
        gains[agree] += 0.2
        gains[~agree] *= 0.8
        np.clip(gains, 0.01, None, out=gains)
        update = momentum * update - config.learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)

    kl_final, _ = _kl_and_gradient(P, Y)
    if not kl_final < kl_initial:
        raise DomainError(
            f"t-SNE failed to improve: KL {kl_initial:.6f} -> {kl_final:.6f}"
        )
    return TsneEmbedding(coordinates=Y, kl_initial=kl_initial, kl_final=kl_final)


@dataclass
class KmeansModel:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    n_iter: int
    seed: int
    inertia_history: list[float] = field(default_factory=list)


def _assign(X, centroids):
    d2 = (
        (X * X).sum(axis=1)[:, None]
        - 2.0 * (X @ centroids.T)
        + (centroids * centroids).sum(axis=1)[None, :]
    )
    assignments = d2.argmin(axis=1)  # ties: lowest centroid index
    return assignments, d2

def _exact_inertia(X, centroids, assignments):
    diff = X - centroids[assignments]
    return float((diff * diff).sum())


def kmeans_fit(matrix, k: int, seed: int = 0, max_iter: int = 300) -> KmeansModel:
    """Lloyd iterations from a k-means++ seeding.

    Runs until the assignments reach a fixpoint or `max_iter` passes; the
    recorded inertia never increases between iterations.  A cluster that
    empties is reseeded to the point farthest from its current centroid.
    """
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError("kmeans_fit needs a non-empty 2-D matrix")
    n = X.shape[0]
    if not 1 <= k <= n:
        raise DomainError(f"k {k} outside [1, {n}]")
    rng = np.random.default_rng(seed)

    # k-means++: subsequent seeds drawn with probability proportional to
    # the squared distance from the nearest existing seed
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    closest = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            centroids[j] = X[rng.integers(n)]
        else:
            centroids[j] = X[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, ((X - centroids[j]) ** 2).sum(axis=1))

    assignments, _ = _assign(X, centroids)
    history = [_exact_inertia(X, centroids, assignments)]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        for j in range(k):
            members = assignments == j
            if members.any():
                centroids[j] = X[members].mean(axis=0)
            else:
                distances = ((X - centroids[assignments]) ** 2).sum(axis=1)
                centroids[j] = X[distances.argmax()]
        new_assignments, _ = _assign(X, centroids)
        history.append(_exact_inertia(X, centroids, new_assignments))
        converged = (new_assignments == assignments).all()
        assignments = new_assignments
        if converged:
            break
    return KmeansModel(
        centroids=centroids,
        assignments=assignments,
        inertia=history[-1],
        n_iter=iterations,
        seed=seed,
        inertia_history=history,
    )


def kmeans_assign(matrix, model: KmeansModel) -> np.ndarray:
    """Nearest-centroid assignment for new rows."""
    assignments, _ = _assign(np.asarray(matrix, dtype=float), model.centroids)
    return assignments


def cluster_frequencies(assignments, k: int) -> np.ndarray:
    """Relative cluster sizes, indexed by cluster id."""
    counts = np.bincount(np.asarray(assignments, int), minlength=k)
    return counts / counts.sum()


def append_cluster_feature(encoded: EncodedMatrix, model: KmeansModel) -> EncodedMatrix:
    """Add a column holding each row's cluster id encoded as the relative
    cluster size, matching the frequency representation of the other
    categorical features (pre-scaling)."""
    if len(model.assignments) != encoded.data.shape[0]:
        raise DomainError(
            f"cluster assignments cover {len(model.assignments)} rows, "
            f"matrix has {encoded.data.shape[0]}"
        )
    frequencies = cluster_frequencies(model.assignments, len(model.centroids))
    column = frequencies[model.assignments]
    return EncodedMatrix(
        data=np.column_stack([encoded.data, column]),
        columns=encoded.columns + ("cluster",),
        labels=encoded.labels,
        stages=encoded.stages + ("cluster",),
        unseen=encoded.unseen,
    )


def embedding_to_csv(coordinates, assignments=None) -> str:
    """CSV export (row index, coordinates, optional cluster id)."""
    coordinates = np.asarray(coordinates, dtype=float)
    dims = coordinates.shape[1]
    header = ["row"] + [f"dim{i}" for i in range(dims)]
    if assignments is not None:
        header.append("cluster")
    lines = [",".join(header)]
    for i, row in enumerate(coordinates):
        cells = [str(i)] + [f"{v:.8f}" for v in row]
        if assignments is not None:
            cells.append(str(int(assignments[i])))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
