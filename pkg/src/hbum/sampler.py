"""Gibbs sampler for the joint unmixing / clustering / classification model.

One sweep updates, in order: abundances A, noise variance s2, cluster means
psi, cluster variances sigma2, cluster labels z, interaction matrix Q, class
labels omega. Chains run ``n_burnin`` sweeps with the cluster-field spatial
coupling at ``beta1`` and then ``n_mc`` recorded sweeps with it at zero; at
zero the label-field partition function is constant, so the Dirichlet
conditional used for Q's columns is exact on every recorded sweep.

Label fields are swept with a checkerboard schedule (two half-sweeps of
conditionally independent sites); a plain raster scan is available through
``ModelConfig.schedule`` as a fallback.

Point estimates returned by :func:`run_chain` are posterior means (empirical
averages of the recorded sweeps) for A, s2, psi, sigma2 and Q, and the
per-pixel most frequently sampled label for z and omega.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .distributions import (
    make_rng,
    sample_categorical_log,
    sample_categorical_log_many,
    sample_dirichlet,
    sample_gaussian_simplex_truncated_batch,
    sample_inverse_gamma,
    sample_inverse_gamma_array,
)
from .errors import NumericalDegeneracyError, ValidationError
from .lattice import neighbor_value_counts
from .model import (
    AbundanceMatrix,
    ClusterParams,
    EndmemberMatrix,
    InteractionMatrix,
    LabelField,
    ModelConfig,
    NoiseModel,
    ObservationMatrix,
    SupervisionData,
    class_log_prior_matrix,
    potts_neighbor_count,
)

# Post-draw floors preventing degenerate collapse on noiseless data.
SIGMA2_FLOOR = 1e-12
NOISE_SCALE_FLOOR = 1e-300


@dataclass
class ChainState:
    """Full parameter state of one chain."""

    A: AbundanceMatrix
    noise: NoiseModel
    clusters: ClusterParams
    z: LabelField
    q: InteractionMatrix
    omega: LabelField
    iteration: int = 0
    effective_beta1: float = 0.0

    def validate(self) -> None:
        self.A.validate()
        self.noise.validate()
        self.clusters.validate()
        self.z.validate()
        self.q.validate()
        self.omega.validate()
        n_clusters, n_dims = self.clusters.psi.shape
        if self.A.data.shape[0] != n_dims:
            raise ValidationError("abundance rows do not match cluster dimensions")
        if self.z.domain_size != n_clusters or self.q.n_clusters != n_clusters:
            raise ValidationError("cluster-count mismatch between z, Q and cluster params")
        if self.omega.domain_size != self.q.n_classes:
            raise ValidationError("class-count mismatch between omega and Q")
        if self.effective_beta1 < 0.0:
            raise ValidationError("effective_beta1 must be nonnegative")


@dataclass
class Trace:
    """Running accumulators over post-burn-in sweeps."""

    a_sum: np.ndarray
    s2_sum: float
    psi_sum: np.ndarray
    sigma2_sum: np.ndarray
    q_sum: np.ndarray
    z_counts: np.ndarray  # (K, P) per-pixel label tallies
    omega_counts: np.ndarray  # (J, P)
    n_recorded: int = 0

    @classmethod
    def empty(cls, n_dims: int, n_pixels: int, n_clusters: int, n_classes: int) -> "Trace":
        return cls(
            a_sum=np.zeros((n_dims, n_pixels)),
            s2_sum=0.0,
            psi_sum=np.zeros((n_clusters, n_dims)),
            sigma2_sum=np.zeros((n_clusters, n_dims)),
            q_sum=np.zeros((n_clusters, n_classes)),
            z_counts=np.zeros((n_clusters, n_pixels), dtype=np.uint32),
            omega_counts=np.zeros((n_classes, n_pixels), dtype=np.uint32),
        )

    def record(self, state: ChainState) -> None:
        n_pixels = self.a_sum.shape[1]
        self.a_sum += state.A.data
        self.s2_sum += state.noise.s2
        self.psi_sum += state.clusters.psi
        self.sigma2_sum += state.clusters.sigma2
        self.q_sum += state.q.q
        self.z_counts[state.z.labels, np.arange(n_pixels)] += 1
        self.omega_counts[state.omega.labels, np.arange(n_pixels)] += 1
        self.n_recorded += 1

    def omega_frequencies(self) -> np.ndarray:
        """(J, P) per-pixel posterior class frequencies."""
        return self.omega_counts.astype(np.float64) / self.n_recorded

    def estimates(self, lattice) -> ChainState:
        """Posterior-mean estimates for continuous parameters, per-pixel
        modal labels for the discrete fields (ties resolve to the lowest
        label)."""
        if self.n_recorded < 1:
            raise ValidationError("no recorded sweeps to estimate from")
        n = float(self.n_recorded)
        return ChainState(
            A=AbundanceMatrix(self.a_sum / n),
            noise=NoiseModel(self.s2_sum / n),
            clusters=ClusterParams(self.psi_sum / n, self.sigma2_sum / n),
            z=LabelField(
                np.argmax(self.z_counts, axis=0).astype(np.int32),
                self.z_counts.shape[0],
                lattice,
            ),
            q=InteractionMatrix(self.q_sum / n),
            omega=LabelField(
                np.argmax(self.omega_counts, axis=0).astype(np.int32),
                self.omega_counts.shape[0],
                lattice,
            ),
            iteration=self.n_recorded,
            effective_beta1=0.0,
        )


@dataclass
class _Precomp:
    """Quantities fixed for the whole chain."""

    mtm: np.ndarray  # (R, R)
    mty: np.ndarray  # (R, P)
    y_sq: float  # ||Y||_F^2
    n_obs: int  # P * d
    w1: np.ndarray  # (J, P) class log-prior matrix


def _make_precomp(Y: ObservationMatrix, M: EndmemberMatrix, sup: SupervisionData) -> _Precomp:
    return _Precomp(
        mtm=M.data.T @ M.data,
        mty=M.data.T @ Y.data,
        y_sq=float(np.sum(Y.data * Y.data)),
        n_obs=Y.data.size,
        w1=class_log_prior_matrix(sup),
    )


def _log_nonneg(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(x)


def _require_finite_option(log_weights: np.ndarray, what: str, state: ChainState) -> None:
    dead = ~np.any(np.isfinite(log_weights), axis=0)
    if np.any(dead):
        raise NumericalDegeneracyError(
            f"all {what} log-weights are -inf at iteration {state.iteration} "
            f"(first affected site {int(np.flatnonzero(dead)[0])})"
        )


# ---------------------------------------------------------------------------
# Conditional draws
# ---------------------------------------------------------------------------


def abundance_posterior(
    y: np.ndarray, M: np.ndarray, s2: float, psi_k: np.ndarray, sigma2_k: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of one pixel's Gaussian abundance conditional.

    The precision combines the scaled spectral Gram matrix with the inverse
    cluster covariance; the mean balances the back-projected observation
    against the cluster mean.
    """
    prec = M.T @ M / s2 + np.diag(1.0 / sigma2_k)
    cov = np.linalg.inv(prec)
    mean = cov @ (M.T @ y / s2 + psi_k / sigma2_k)
    return mean, cov


def sample_abundance(
    state: ChainState,
    Y: ObservationMatrix,
    M: EndmemberMatrix,
    p: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Redraw the abundance vector of pixel ``p`` from its Gaussian
    conditional given the pixel's current cluster. No simplex truncation is
    applied; the constraint acts softly through the cluster mean."""
    k = int(state.z.labels[p])
    sigma2_k = state.clusters.sigma2[k]
    prec = M.data.T @ M.data / state.noise.s2 + np.diag(1.0 / sigma2_k)
    try:
        chol = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(
            f"abundance precision not positive definite at pixel {p}, cluster {k}"
        ) from exc
    b = M.data.T @ Y.data[:, p] / state.noise.s2 + state.clusters.psi[k] / sigma2_k
    mean = solve_triangular(chol.T, solve_triangular(chol, b, lower=True), lower=False)
    draw = mean + solve_triangular(chol.T, rng.standard_normal(b.size), lower=False)
    state.A.data[:, p] = draw
    return draw


def _sample_abundances_all(state: ChainState, pre: _Precomp, rng: np.random.Generator) -> None:
    """Vectorized abundance sweep: pixels sharing a cluster share their
    posterior precision, so each cluster is one batched solve."""
    n_dims, n_pixels = state.A.data.shape
    s2 = state.noise.s2
    # One noise block drawn up front keeps rng consumption independent of
    # the current label configuration.
    noise = rng.standard_normal((n_dims, n_pixels))
    for k in range(state.clusters.n_clusters):
        idx = np.flatnonzero(state.z.labels == k)
        if idx.size == 0:
            continue
        sigma2_k = state.clusters.sigma2[k]
        prec = pre.mtm / s2 + np.diag(1.0 / sigma2_k)
        try:
            chol = np.linalg.cholesky(prec)
        except np.linalg.LinAlgError as exc:
            raise NumericalDegeneracyError(
                f"abundance precision not positive definite for cluster {k}"
            ) from exc
        b = pre.mty[:, idx] / s2 + (state.clusters.psi[k] / sigma2_k)[:, None]
        mean = solve_triangular(chol.T, solve_triangular(chol, b, lower=True), lower=False)
        state.A.data[:, idx] = mean + solve_triangular(chol.T, noise[:, idx], lower=False)


def _draw_noise_variance(
    state: ChainState, n_obs: int, total_sq: float, rng: np.random.Generator
) -> float:
    shape = 1.0 + n_obs / 2.0
    scale = max(total_sq / 2.0, NOISE_SCALE_FLOOR)
    state.noise.s2 = sample_inverse_gamma(rng, shape, scale)
    return state.noise.s2


def sample_noise_variance(
    state: ChainState, Y: ObservationMatrix, M: EndmemberMatrix, rng: np.random.Generator
) -> float:
    """Redraw s2 from its inverse-gamma conditional with shape 1 + Pd/2 and
    scale half the total squared reconstruction residual."""
    resid = Y.data - M.data @ state.A.data
    return _draw_noise_variance(state, Y.data.size, float(np.sum(resid * resid)), rng)


def _sample_noise_fast(state: ChainState, pre: _Precomp, rng: np.random.Generator) -> float:
    a = state.A.data
    total = pre.y_sq - 2.0 * float(np.sum(a * pre.mty)) + float(np.sum(a * (pre.mtm @ a)))
    return _draw_noise_variance(state, pre.n_obs, max(total, 0.0), rng)


def _cluster_sums(values: np.ndarray, z: np.ndarray, n_clusters: int) -> np.ndarray:
    """(K, R) per-cluster sums of the columns of an (R, P) matrix."""
    out = np.empty((n_clusters, values.shape[0]))
    for r in range(values.shape[0]):
        out[:, r] = np.bincount(z, weights=values[r], minlength=n_clusters)
    return out


def sample_cluster_variances(
    state: ChainState, config: ModelConfig, rng: np.random.Generator
) -> np.ndarray:
    """Redraw every sigma2[k, r] from its inverse-gamma conditional; empty
    clusters fall back to the prior draw."""
    z = state.z.labels
    n_clusters = config.n_clusters
    n_k = np.bincount(z, minlength=n_clusters).astype(np.float64)
    diff2 = (state.A.data - state.clusters.psi[z].T) ** 2
    ssq = _cluster_sums(diff2, z, n_clusters)
    shape = n_k[:, None] / 2.0 + config.xi
    scale = config.gamma + ssq / 2.0
    draws = sample_inverse_gamma_array(rng, shape, scale)
    state.clusters.sigma2 = np.maximum(draws, SIGMA2_FLOOR)
    return state.clusters.sigma2


def sample_cluster_means(
    state: ChainState, config: ModelConfig, rng: np.random.Generator
) -> np.ndarray:
    """Redraw every cluster mean from its simplex-truncated Gaussian
    conditional, centered on the cluster's empirical abundance mean with
    covariance shrunk by the cluster size; empty clusters draw from the
    uniform simplex prior."""
    z = state.z.labels
    n_clusters, n_dims = state.clusters.psi.shape
    n_k = np.bincount(z, minlength=n_clusters).astype(np.float64)
    sums = _cluster_sums(state.A.data, z, n_clusters)
    empty = n_k == 0
    denom = np.where(empty, 1.0, n_k)[:, None]
    means = sums / denom
    varis = state.clusters.sigma2 / denom
    means[empty] = 1.0 / n_dims
    varis[empty] = 1.0
    draws = sample_gaussian_simplex_truncated_batch(
        rng, means, varis, inner_iters=config.inner_iters, init=state.clusters.psi
    )
    for k in np.flatnonzero(empty):
        draws[k] = sample_dirichlet(rng, np.ones(n_dims))
    state.clusters.psi = draws
    return state.clusters.psi


def _gaussian_cluster_loglik(
    a: np.ndarray, psi: np.ndarray, sigma2: np.ndarray
) -> np.ndarray:
    """(K, P) log-density of every abundance column under every cluster."""
    n_clusters, n_dims = psi.shape
    out = np.empty((n_clusters, a.shape[1]))
    log_norm = -0.5 * (n_dims * np.log(2.0 * np.pi) + np.log(sigma2).sum(axis=1))
    for k in range(n_clusters):
        diff = a - psi[k][:, None]
        out[k] = log_norm[k] - 0.5 * np.sum(diff * diff / sigma2[k][:, None], axis=0)
    return out


def sample_cluster_labels(
    state: ChainState, config: ModelConfig, rng: np.random.Generator
) -> LabelField:
    """Redraw the cluster field. Per-site log-weights combine the Gaussian
    abundance likelihood, the interaction weight of the site's current class
    and, while ``effective_beta1`` is positive, the spatial agreement count."""
    n_clusters = config.n_clusters
    base = _gaussian_cluster_loglik(state.A.data, state.clusters.psi, state.clusters.sigma2)
    base += _log_nonneg(state.q.q)[:, state.omega.labels]
    lat = state.z.lattice
    grid = state.z.grid()
    if config.schedule == "raster":
        for p in range(lat.n_pixels):
            weights = base[:, p].copy()
            if state.effective_beta1 > 0.0:
                for k in range(n_clusters):
                    weights[k] += state.effective_beta1 * potts_neighbor_count(state.z, p, k)
            if not np.any(np.isfinite(weights)):
                raise NumericalDegeneracyError(
                    f"all cluster log-weights are -inf at pixel {p}, "
                    f"iteration {state.iteration}"
                )
            state.z.labels[p] = sample_categorical_log(rng, weights)
        return state.z
    base_grid = base.reshape(n_clusters, lat.height, lat.width)
    for mask in lat.color_masks():
        weights = base_grid[:, mask]
        if state.effective_beta1 > 0.0:
            counts = neighbor_value_counts(grid, n_clusters)
            weights = weights + state.effective_beta1 * counts[:, mask]
        _require_finite_option(weights, "cluster", state)
        grid[mask] = sample_categorical_log_many(rng, weights)
    return state.z


def sample_interaction_matrix(
    state: ChainState, sup: SupervisionData, config: ModelConfig, rng: np.random.Generator
) -> InteractionMatrix:
    """Redraw every column of Q from its Dirichlet conditional built on the
    joint (cluster, class) label counts. Exact once ``effective_beta1`` is
    zero; during burn-in it serves as the stated approximation."""
    n_clusters, n_classes = config.n_clusters, config.n_classes
    counts = np.bincount(
        state.omega.labels.astype(np.int64) * n_clusters + state.z.labels,
        minlength=n_clusters * n_classes,
    ).reshape(n_classes, n_clusters).T
    for j in range(n_classes):
        state.q.q[:, j] = sample_dirichlet(rng, counts[:, j] + config.zeta)
    return state.q


def _class_log_partition(state: ChainState, beta1: float) -> np.ndarray:
    """(J, P) log of the cluster-side normalizer entering the class-field
    conditional while the cluster coupling is active."""
    n_clusters = state.q.n_clusters
    counts = neighbor_value_counts(state.z.grid(), n_clusters).reshape(n_clusters, -1)
    energy = beta1 * counts
    peak = energy.max(axis=0)
    boosted = np.exp(energy - peak[None, :])
    return (np.log(boosted.T @ state.q.q) + peak[:, None]).T


def sample_class_labels(
    state: ChainState,
    sup: SupervisionData,
    config: ModelConfig,
    rng: np.random.Generator,
    w1: np.ndarray | None = None,
) -> LabelField:
    """Redraw the class field. Per-site log-weights combine the interaction
    weight of the site's cluster, the supervision prior and the spatial
    agreement count at ``beta2``; while ``effective_beta1`` is positive the
    cluster-side normalizer is subtracted (at zero it is identically one and
    skipped)."""
    n_classes = config.n_classes
    if w1 is None:
        w1 = class_log_prior_matrix(sup)
    base = _log_nonneg(state.q.q)[state.z.labels, :].T + w1
    if state.effective_beta1 > 0.0:
        base = base - _class_log_partition(state, state.effective_beta1)
    lat = state.omega.lattice
    grid = state.omega.grid()
    if config.schedule == "raster":
        for p in range(lat.n_pixels):
            weights = base[:, p].copy()
            if config.beta2 > 0.0:
                for j in range(n_classes):
                    weights[j] += config.beta2 * potts_neighbor_count(state.omega, p, j)
            if not np.any(np.isfinite(weights)):
                raise NumericalDegeneracyError(
                    f"all class log-weights are -inf at pixel {p}, "
                    f"iteration {state.iteration}"
                )
            state.omega.labels[p] = sample_categorical_log(rng, weights)
        return state.omega
    base_grid = base.reshape(n_classes, lat.height, lat.width)
    for mask in lat.color_masks():
        weights = base_grid[:, mask]
        if config.beta2 > 0.0:
            counts = neighbor_value_counts(grid, n_classes)
            weights = weights + config.beta2 * counts[:, mask]
        _require_finite_option(weights, "class", state)
        grid[mask] = sample_categorical_log_many(rng, weights)
    return state.omega


# ---------------------------------------------------------------------------
# Initialization and the chain driver
# ---------------------------------------------------------------------------


def _kmeans_labels(
    a: np.ndarray, n_clusters: int, rng: np.random.Generator, n_iter: int = 10
) -> np.ndarray:
    """k-means++ seeding plus a few Lloyd rounds on the columns of ``a``."""
    points = a.T
    n_points, n_dims = points.shape
    centers = np.empty((n_clusters, n_dims))
    centers[0] = points[int(rng.integers(n_points))]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for i in range(1, n_clusters):
        total = d2.sum()
        if total <= 0.0:
            centers[i] = points[int(rng.integers(n_points))]
        else:
            u = rng.random() * total
            pick = min(int(np.searchsorted(np.cumsum(d2), u)), n_points - 1)
            centers[i] = points[pick]
        d2 = np.minimum(d2, np.sum((points - centers[i]) ** 2, axis=1))
    sq_pts = np.sum(points * points, axis=1)
    labels = np.zeros(n_points, dtype=np.int32)
    for _ in range(n_iter):
        dists = sq_pts[:, None] - 2.0 * points @ centers.T + np.sum(centers * centers, axis=1)
        new_labels = dists.argmin(axis=1).astype(np.int32)
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        for k in range(n_clusters):
            members = labels == k
            if np.any(members):
                centers[k] = points[members].mean(axis=0)
    return labels


def initialize_state(
    Y: ObservationMatrix,
    M: EndmemberMatrix,
    sup: SupervisionData,
    config: ModelConfig,
    rng: np.random.Generator,
) -> ChainState:
    """Deterministic-given-seed starting point: ridge unmixing clipped to
    [0, 1] for A, k-means++ clustering of the abundance columns for z,
    cluster moments for psi/sigma2, uniform-Dirichlet columns for Q, and the
    expert labels (proportion draws where unlabeled) for omega."""
    from .distributions import project_to_simplex

    n_pixels = Y.n_pixels
    n_dims = M.n_endmembers
    if config.n_clusters > n_pixels:
        raise ValidationError(
            f"cannot form {config.n_clusters} clusters from {n_pixels} pixels"
        )
    mtm = M.data.T @ M.data
    ridge = 1e-6 * np.trace(mtm) / n_dims
    a = np.linalg.solve(mtm + ridge * np.eye(n_dims), M.data.T @ Y.data)
    np.clip(a, 0.0, 1.0, out=a)
    resid = Y.data - M.data @ a
    s2 = max(float(np.mean(resid * resid)), 1e-12)

    z = _kmeans_labels(a, config.n_clusters, rng)
    psi = np.empty((config.n_clusters, n_dims))
    sigma2 = np.empty((config.n_clusters, n_dims))
    overall_var = np.maximum(a.var(axis=1), 1e-6)
    for k in range(config.n_clusters):
        members = z == k
        if np.any(members):
            psi[k] = project_to_simplex(a[:, members].mean(axis=1))
            sigma2[k] = np.maximum(a[:, members].var(axis=1), 1e-6)
        else:
            psi[k] = 1.0 / n_dims
            sigma2[k] = overall_var

    q = np.column_stack(
        [sample_dirichlet(rng, np.ones(config.n_clusters)) for _ in range(config.n_classes)]
    )

    pi = sup.pi if config.pi_override is None else np.asarray(config.pi_override, float)
    omega = np.empty(n_pixels, dtype=np.int32)
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi)
    unlabeled = ~sup.labeled_mask()
    omega[unlabeled] = sample_categorical_log_many(
        rng, np.tile(log_pi[:, None], (1, int(unlabeled.sum())))
    )
    omega[sup.labeled_idx] = sup.c

    state = ChainState(
        A=AbundanceMatrix(a),
        noise=NoiseModel(s2),
        clusters=ClusterParams(psi, sigma2),
        z=LabelField(z, config.n_clusters, Y.lattice),
        q=InteractionMatrix(q),
        omega=LabelField(omega, config.n_classes, Y.lattice),
        iteration=0,
        effective_beta1=config.beta1,
    )
    state.validate()
    return state


def _check_dimensions(
    Y: ObservationMatrix, M: EndmemberMatrix, sup: SupervisionData, config: ModelConfig
) -> None:
    Y.validate()
    M.validate()
    sup.validate()
    config.validate()
    if Y.n_bands != M.n_bands:
        raise ValidationError(
            f"observations have {Y.n_bands} bands but endmembers have {M.n_bands}"
        )
    if M.n_endmembers != config.n_endmembers:
        raise ValidationError(
            f"config expects {config.n_endmembers} endmembers, matrix has {M.n_endmembers}"
        )
    if sup.n_pixels != Y.n_pixels:
        raise ValidationError("supervision pixel count does not match the observations")
    if sup.n_classes != config.n_classes:
        raise ValidationError("supervision class count does not match the config")


def run_chain(
    Y: ObservationMatrix,
    M: EndmemberMatrix,
    sup: SupervisionData,
    config: ModelConfig,
    rng: np.random.Generator | None = None,
    init: ChainState | None = None,
    debug_validate: bool = False,
) -> tuple[ChainState, Trace]:
    """Run one chain and return (point estimates, trace).

    ``rng`` defaults to a fresh stream derived from ``config.seed``. With
    ``debug_validate`` every sweep re-checks all state invariants.
    """
    _check_dimensions(Y, M, sup, config)
    if rng is None:
        rng = make_rng(config.seed)
    if config.pi_override is not None:
        sup = SupervisionData(
            sup.labeled_idx, sup.c, sup.eta,
            np.asarray(config.pi_override, dtype=np.float64),
            sup.n_classes, sup.n_pixels,
        )
        sup.validate()
    pre = _make_precomp(Y, M, sup)
    state = init if init is not None else initialize_state(Y, M, sup, config, rng)
    trace = Trace.empty(config.n_endmembers, Y.n_pixels, config.n_clusters, config.n_classes)
    total = config.n_burnin + config.n_mc
    for it in range(total):
        state.effective_beta1 = config.beta1 if it < config.n_burnin else 0.0
        try:
            _sample_abundances_all(state, pre, rng)
            _sample_noise_fast(state, pre, rng)
            sample_cluster_means(state, config, rng)
            sample_cluster_variances(state, config, rng)
            sample_cluster_labels(state, config, rng)
            sample_interaction_matrix(state, sup, config, rng)
            sample_class_labels(state, sup, config, rng, w1=pre.w1)
        except NumericalDegeneracyError as exc:
            raise NumericalDegeneracyError(f"sweep {it}: {exc}") from exc
        state.iteration += 1
        if debug_validate:
            state.validate()
        if it >= config.n_burnin:
            trace.record(state)
    return trace.estimates(Y.lattice), trace
