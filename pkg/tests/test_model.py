"""Domain-type invariants and the local prior evaluations."""

import numpy as np
import pytest

from hbum.errors import ValidationError
from hbum.lattice import Lattice
from hbum.model import (
    ClusterParams,
    EndmemberMatrix,
    InteractionMatrix,
    LabelField,
    ModelConfig,
    NoiseModel,
    ObservationMatrix,
    SupervisionData,
    class_log_prior_matrix,
    log_prior_class,
    potts_neighbor_count,
)


def make_sup(labeled_idx, c, eta, n_classes, n_pixels, **kw):
    return SupervisionData.from_labels(
        np.array(labeled_idx), np.array(c), eta, n_classes, n_pixels, **kw
    )


class TestTypeInvariants:
    def test_observation_shape_must_match_lattice(self):
        obs = ObservationMatrix(np.ones((4, 5)), Lattice(2, 3))
        with pytest.raises(ValidationError):
            obs.validate()

    def test_observation_rejects_non_finite(self):
        data = np.ones((2, 4))
        data[0, 1] = np.nan
        with pytest.raises(ValidationError):
            ObservationMatrix(data, Lattice(2, 2)).validate()

    def test_endmembers_reject_wide_matrix(self):
        with pytest.raises(ValidationError):
            EndmemberMatrix(np.ones((2, 3))).validate()

    def test_endmembers_reject_zero_column(self):
        data = np.ones((4, 2))
        data[:, 1] = 0.0
        with pytest.raises(ValidationError):
            EndmemberMatrix(data).validate()

    def test_noise_variance_positive(self):
        with pytest.raises(ValidationError):
            NoiseModel(0.0).validate()
        NoiseModel(0.5).validate()

    def test_cluster_means_must_be_on_simplex(self):
        psi = np.array([[0.6, 0.6]])
        with pytest.raises(ValidationError):
            ClusterParams(psi, np.ones((1, 2))).validate()

    def test_cluster_variances_positive(self):
        psi = np.array([[0.5, 0.5]])
        with pytest.raises(ValidationError):
            ClusterParams(psi, np.array([[1.0, 0.0]])).validate()

    def test_label_field_range(self):
        lat = Lattice(1, 3)
        LabelField(np.array([0, 1, 2], dtype=np.int32), 3, lat).validate()
        with pytest.raises(ValidationError):
            LabelField(np.array([0, 1, 3], dtype=np.int32), 3, lat).validate()
        with pytest.raises(ValidationError):
            LabelField(np.array([0, -1, 2], dtype=np.int32), 3, lat).validate()

    def test_interaction_columns_must_be_simplex(self):
        InteractionMatrix(np.array([[0.25, 1.0], [0.75, 0.0]])).validate()
        with pytest.raises(ValidationError):
            InteractionMatrix(np.array([[0.5, 1.0], [0.6, 0.0]])).validate()


class TestSupervisionData:
    def test_pi_computed_from_labels(self):
        sup = make_sup([0, 1, 2, 3], [0, 0, 0, 1], 0.9, 2, 10)
        np.testing.assert_allclose(sup.pi, [0.75, 0.25])

    def test_missing_class_rejected(self):
        with pytest.raises(ValidationError):
            make_sup([0, 1], [0, 0], 0.9, 2, 10)

    def test_missing_class_allowed_when_relaxed(self):
        sup = make_sup([0, 1], [0, 0], 0.9, 2, 10, require_all_classes=False)
        np.testing.assert_allclose(sup.pi, [1.0, 0.0])

    def test_confidence_strictly_inside_unit_interval(self):
        with pytest.raises(ValidationError):
            make_sup([0, 1], [0, 1], 1.0, 2, 10)
        with pytest.raises(ValidationError):
            make_sup([0, 1], [0, 1], 0.0, 2, 10)

    def test_duplicate_indices_rejected(self):
        with pytest.raises(ValidationError):
            make_sup([3, 3], [0, 1], 0.9, 2, 10)

    def test_indices_sorted_with_labels(self):
        sup = make_sup([5, 2], [1, 0], [0.9, 0.8], 2, 10)
        assert sup.labeled_idx.tolist() == [2, 5]
        assert sup.c.tolist() == [0, 1]
        np.testing.assert_allclose(sup.eta, [0.8, 0.9])


class TestPottsNeighborCount:
    def test_uniform_field_interior(self):
        lat = Lattice(3, 3)
        field = LabelField(np.zeros(9, dtype=np.int32), 2, lat)
        assert potts_neighbor_count(field, lat.index(1, 1), 0) == 4

    def test_checkerboard_field_own_label(self):
        lat = Lattice(3, 3)
        rows, cols = np.divmod(np.arange(9), 3)
        labels = ((rows + cols) % 2).astype(np.int32)
        field = LabelField(labels, 2, lat)
        center = lat.index(1, 1)
        assert potts_neighbor_count(field, center, int(labels[center])) == 0
        assert potts_neighbor_count(field, center, 1 - int(labels[center])) == 4

    def test_absent_value_counts_zero(self):
        lat = Lattice(2, 2)
        field = LabelField(np.zeros(4, dtype=np.int32), 5, lat)
        assert potts_neighbor_count(field, 0, 3) == 0

    def test_invalid_value_rejected(self):
        lat = Lattice(2, 2)
        field = LabelField(np.zeros(4, dtype=np.int32), 2, lat)
        with pytest.raises(ValidationError):
            potts_neighbor_count(field, 0, 2)


class TestClassLogPrior:
    def test_labeled_pixel_matching_label(self):
        sup = make_sup([0, 1], [0, 1], 0.95, 2, 4)
        assert log_prior_class(0, 0, sup) == pytest.approx(np.log(0.95))

    def test_labeled_pixel_other_label_two_classes(self):
        sup = make_sup([0, 1], [0, 1], 0.95, 2, 4)
        assert log_prior_class(0, 1, sup) == pytest.approx(np.log(0.05))

    def test_unlabeled_pixel_uses_proportions(self):
        sup = make_sup([0, 1], [0, 1], 0.95, 2, 4)
        assert log_prior_class(3, 0, sup) == pytest.approx(np.log(0.5))
        assert log_prior_class(3, 1, sup) == pytest.approx(np.log(0.5))

    def test_labeled_weights_normalize(self):
        sup = make_sup([0, 1, 2], [0, 1, 2], 0.8, 3, 6)
        total = sum(np.exp(log_prior_class(0, j, sup)) for j in range(3))
        assert total == pytest.approx(1.0)

    def test_unseen_class_gets_minus_inf_when_unlabeled(self):
        sup = make_sup([0, 1], [0, 0], 0.9, 2, 6, require_all_classes=False)
        assert log_prior_class(5, 1, sup) == -np.inf

    def test_matrix_matches_scalar(self):
        sup = make_sup([1, 4, 5], [2, 0, 1], [0.9, 0.7, 0.8], 3, 8)
        mat = class_log_prior_matrix(sup)
        for p in range(8):
            for j in range(3):
                assert mat[j, p] == pytest.approx(log_prior_class(p, j, sup))


class TestModelConfig:
    def test_defaults_valid(self):
        cfg = ModelConfig(n_clusters=3, n_classes=2, n_endmembers=3)
        cfg.validate()
        np.testing.assert_allclose(cfg.zeta, np.ones(3))
        assert cfg.xi == 1.0 and cfg.gamma == 0.1

    def test_scalar_zeta_broadcast(self):
        cfg = ModelConfig(n_clusters=4, n_classes=2, n_endmembers=3, zeta=2.0)
        np.testing.assert_allclose(cfg.zeta, np.full(4, 2.0))

    def test_invalid_fields_rejected(self):
        bad = [
            dict(n_clusters=0, n_classes=2, n_endmembers=3),
            dict(n_clusters=3, n_classes=2, n_endmembers=3, beta1=-0.1),
            dict(n_clusters=3, n_classes=2, n_endmembers=3, zeta=np.zeros(3)),
            dict(n_clusters=3, n_classes=2, n_endmembers=3, gamma=0.0),
            dict(n_clusters=3, n_classes=2, n_endmembers=3, n_mc=0),
            dict(n_clusters=3, n_classes=2, n_endmembers=3, n_burnin=-1),
            dict(n_clusters=3, n_classes=2, n_endmembers=3, schedule="diagonal"),
        ]
        for kwargs in bad:
            with pytest.raises(ValidationError):
                ModelConfig(**kwargs).validate()
