import numpy as np
import pytest

from oracles import adpit_total_bruteforce, random_event_labels
from seld3d.labels import EventLabel
from seld3d.loss import adpit_loss, adpit_loss_grad, per_candidate_losses
from seld3d.targets import encode_targets


def _random_instance(rng, n_events=6):
    labels = random_event_labels(rng, n_events=n_events)
    target, aset = encode_targets(labels)
    pred = rng.standard_normal(target.shape)
    return pred, target, aset


class TestTotal:
    def test_zero_at_exact_target(self):
        rng = np.random.default_rng(0)
        _, target, aset = _random_instance(rng)
        assert adpit_loss(target, aset).total == 0.0

    def test_single_event_equals_plain_mse(self):
        labels = [EventLabel(7, 3, 0, 0.0, 0.0, 5.0)]
        target, aset = encode_targets(labels)
        rng = np.random.default_rng(1)
        pred = rng.standard_normal(target.shape)
        breakdown = adpit_loss(pred, aset)

        diff = pred - target
        counted = diff[:3] ** 2
        dist = diff[3] ** 2 * aset.active
        n_comps = np.where(aset.active, 4.0, 3.0)
        plain = ((counted.sum(axis=0) + dist) / n_comps).mean()
        assert breakdown.total == pytest.approx(plain, rel=1e-12)

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(2)
        for trial in range(50):
            pred, _, aset = _random_instance(rng)
            got = adpit_loss(pred, aset).total
            want = adpit_total_bruteforce(pred, aset)
            assert abs(got - want) < 1e-9

    def test_breakdown_consistency(self):
        rng = np.random.default_rng(3)
        pred, _, aset = _random_instance(rng)
        b = adpit_loss(pred, aset)
        assert b.total == pytest.approx(b.per_class.mean(), rel=1e-12)
        assert b.total == pytest.approx(b.per_frame.mean(), rel=1e-12)
        assert np.all(b.per_class >= 0) and b.total >= 0

    def test_shape_mismatch_rejected(self):
        rng = np.random.default_rng(4)
        _, _, aset = _random_instance(rng)
        with pytest.raises(ValueError):
            adpit_loss(np.zeros((4, 3, 13, 19)), aset)


class TestProperties:
    def test_track_permutation_invariance(self):
        rng = np.random.default_rng(5)
        for trial in range(20):
            pred, _, aset = _random_instance(rng)
            base = adpit_loss(pred, aset).total
            perm = rng.permutation(3)
            assert adpit_loss(pred[:, perm], aset).total == pytest.approx(base, rel=1e-12)

    def test_candidate_addition_never_increases_min(self):
        rng = np.random.default_rng(6)
        pred, _, aset = _random_instance(rng)
        losses = per_candidate_losses(pred, aset)
        for c, t in zip(*np.nonzero(aset.n_candidates > 1)):
            cell = losses[:aset.n_candidates[c, t], c, t]
            running = np.minimum.accumulate(cell)
            assert np.all(np.diff(running) <= 0)

    def test_argmin_first_index_tie_break(self):
        # padded candidates repeat candidate 0, so empty cells pick index 0
        rng = np.random.default_rng(7)
        pred, _, aset = _random_instance(rng)
        b = adpit_loss(pred, aset)
        assert np.all(b.argmin_assignment[~aset.active] == 0)


class TestGradient:
    def test_zero_at_target(self):
        rng = np.random.default_rng(8)
        _, target, aset = _random_instance(rng)
        assert not adpit_loss_grad(target, aset).any()

    def test_closed_form_single_cell(self):
        labels = [EventLabel(0, 0, 0, 90.0, 0.0, 2.0)]
        target, aset = encode_targets(labels)
        rng = np.random.default_rng(9)
        pred = rng.standard_normal(target.shape)
        grad = adpit_loss_grad(pred, aset)
        c_t_n = 13 * 20 * 3
        expected = 2.0 * (pred[1, 0, 0, 0] - 1.0) / (c_t_n * 4)
        assert grad[1, 0, 0, 0] == pytest.approx(expected, rel=1e-12)
        inactive = 2.0 * pred[0, 0, 1, 5] / (c_t_n * 3)
        assert grad[0, 0, 1, 5] == pytest.approx(inactive, rel=1e-12)
        assert grad[3, 0, 1, 5] == 0.0  # distance masked where inactive

    def test_matches_central_differences(self):
        rng = np.random.default_rng(10)
        pred, _, aset = _random_instance(rng)
        grad = adpit_loss_grad(pred, aset)
        h = 1e-5
        max_rel = 0.0
        for _ in range(60):
            idx = tuple(rng.integers(0, s) for s in pred.shape)
            plus, minus = pred.copy(), pred.copy()
            plus[idx] += h
            minus[idx] -= h
            fd = (adpit_loss(plus, aset).total - adpit_loss(minus, aset).total) / (2 * h)
            denom = max(abs(fd), abs(grad[idx]), 1e-12)
            max_rel = max(max_rel, abs(fd - grad[idx]) / denom)
        assert max_rel < 1e-5
