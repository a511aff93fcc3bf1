"""Loss formulations: values, identities, and gradient correctness."""

import numpy as np
import pytest

from multisense.crossmodal import (
    Modality,
    cross_sensory_loss,
    cross_sensory_loss_grad,
    image_loss,
    image_loss_grad,
    info_nce_symmetric,
    info_nce_symmetric_grad,
    mse_align_loss,
    mse_align_loss_grad,
)
from multisense.errors import ValidationError


def unit_rows(rng, shape):
    x = rng.normal(size=shape)
    return x / np.linalg.norm(x, axis=1, keepdims=True)


class TestInfoNce:
    def test_perfect_alignment_loss_vanishes_as_tau_shrinks(self):
        x = np.eye(8)
        losses = [info_nce_symmetric(x, x, t) for t in (0.5, 0.07, 0.02)]
        assert losses[0] > losses[1] > losses[2]
        # at tau=0.07 the residual term is (B-1) e^(-1/tau), essentially zero
        expected = np.log(1 + 7 * np.exp(-1 / 0.07))
        assert losses[1] == pytest.approx(expected, rel=1e-9)
        assert losses[2] < 1e-6

    def test_identical_rows_give_log_batch(self):
        batch = 64
        row = np.zeros(16)
        row[0] = 1.0
        x = np.tile(row, (batch, 1))
        loss = info_nce_symmetric(x, x, 0.07)
        assert loss == pytest.approx(np.log(64.0), abs=1e-6)
        assert loss == pytest.approx(4.1589, abs=1e-4)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        x = unit_rows(rng, (10, 6))
        y = unit_rows(rng, (10, 6))
        perm = rng.permutation(10)
        assert info_nce_symmetric(x[perm], y[perm]) == pytest.approx(
            info_nce_symmetric(x, y), rel=1e-12
        )

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            info_nce_symmetric(np.zeros((4, 3)), np.zeros((4, 5)))

    def test_batch_of_one_rejected(self):
        with pytest.raises(ValidationError):
            info_nce_symmetric(np.ones((1, 4)), np.ones((1, 4)))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        x = unit_rows(rng, (8, 4))
        y = unit_rows(rng, (8, 4))
        _, dx, dy = info_nce_symmetric_grad(x, y, 0.07)
        eps = 1e-6
        for grad, arr, other, first in ((dx, x, y, True), (dy, y, x, False)):
            for i in range(arr.shape[0]):
                for j in range(arr.shape[1]):
                    plus = arr.copy()
                    minus = arr.copy()
                    plus[i, j] += eps
                    minus[i, j] -= eps
                    if first:
                        num = (
                            info_nce_symmetric(plus, other, 0.07)
                            - info_nce_symmetric(minus, other, 0.07)
                        ) / (2 * eps)
                    else:
                        num = (
                            info_nce_symmetric(other, plus, 0.07)
                            - info_nce_symmetric(other, minus, 0.07)
                        ) / (2 * eps)
                    assert abs(grad[i, j] - num) < 1e-4


def batches_for(modalities, batch=6, dim=5, seed=1):
    rng = np.random.default_rng(seed)
    return {m: unit_rows(rng, (batch, dim)) for m in modalities}


class TestCompositeLosses:
    def test_image_loss_single_pair(self):
        batches = batches_for([Modality.RGB, Modality.AUDIO])
        expected = info_nce_symmetric(batches[Modality.RGB], batches[Modality.AUDIO])
        assert image_loss(batches) == pytest.approx(expected, rel=1e-12)

    def test_image_loss_counts_pairs(self):
        modalities = [Modality.RGB, Modality.AUDIO, Modality.TACTILE, Modality.DEPTH]
        batches = batches_for(modalities)
        total = sum(
            info_nce_symmetric(batches[Modality.RGB], batches[m])
            for m in modalities
            if m is not Modality.RGB
        )
        assert image_loss(batches) == pytest.approx(total, rel=1e-12)

    def test_cross_sensory_counts_all_pairs(self):
        from itertools import combinations

        modalities = [Modality.RGB, Modality.AUDIO, Modality.TACTILE, Modality.DEPTH]
        batches = batches_for(modalities)
        pairs = list(combinations(sorted(modalities, key=lambda m: m.value), 2))
        assert len(pairs) == 6
        total = sum(info_nce_symmetric(batches[a], batches[b]) for a, b in pairs)
        assert cross_sensory_loss(batches) == pytest.approx(total, rel=1e-12)

    def test_two_modality_identity(self):
        """RGB + one modality: both formulations agree exactly."""

        batches = batches_for([Modality.RGB, Modality.TACTILE], seed=5)
        assert image_loss(batches) == cross_sensory_loss(batches)

    def test_image_loss_requires_rgb(self):
        with pytest.raises(ValidationError, match="RGB"):
            image_loss(batches_for([Modality.AUDIO, Modality.DEPTH]))

    def test_composite_gradients_match_finite_differences(self):
        modalities = [Modality.RGB, Modality.AUDIO, Modality.TACTILE]
        batches = batches_for(modalities, batch=5, dim=4, seed=9)
        for loss_fn, grad_fn in (
            (image_loss, image_loss_grad),
            (cross_sensory_loss, cross_sensory_loss_grad),
        ):
            _, grads = grad_fn(batches, 0.07)
            eps = 1e-6
            for m in modalities:
                arr = batches[m]
                for i in range(arr.shape[0]):
                    for j in range(arr.shape[1]):
                        plus = {k: v.copy() for k, v in batches.items()}
                        minus = {k: v.copy() for k, v in batches.items()}
                        plus[m][i, j] += eps
                        minus[m][i, j] -= eps
                        num = (loss_fn(plus, 0.07) - loss_fn(minus, 0.07)) / (2 * eps)
                        assert abs(grads[m][i, j] - num) < 1e-4


class TestMseAlign:
    def test_zero_when_equal(self):
        x = np.ones((4, 3))
        assert mse_align_loss(x, x) == 0.0

    def test_unit_offset(self):
        x = np.zeros((4, 3))
        assert mse_align_loss(x + 1.0, x) == pytest.approx(1.0)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(6, 5))
        target = rng.normal(size=(6, 5))
        _, grad = mse_align_loss_grad(x, target)
        eps = 1e-7
        for i in range(6):
            for j in range(5):
                plus = x.copy()
                minus = x.copy()
                plus[i, j] += eps
                minus[i, j] -= eps
                num = (mse_align_loss(plus, target) - mse_align_loss(minus, target)) / (2 * eps)
                assert abs(grad[i, j] - num) < 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            mse_align_loss(np.zeros((2, 2)), np.zeros((3, 2)))
