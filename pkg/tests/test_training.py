import numpy as np
import pytest

from flapnet.data import Label
from flapnet.errors import ValidationError
from flapnet.features import FeatureSelection
from flapnet.model import EarlyStopping, ModelConfig, predict, train
from flapnet.synth import synth_generate


def make_dataset(n_per_class, n_frames=90, seed0=0):
    items = []
    for i in range(n_per_class):
        items.append((synth_generate(Label.FLAP, n_frames, 30.0, seed=seed0 + i), 1))
        items.append((synth_generate(Label.CONTROL, n_frames, 30.0, seed=seed0 + 1000 + i), 0))
    return items


SMALL_CONFIG = ModelConfig(
    input_dim=6, hidden_units=16, learning_rate=0.01, max_epochs=15, patience=10, batch_size=8, seed=42
)
ONE = FeatureSelection.one(0)


class TestEarlyStopping:
    def test_patience_trace(self):
        """0.6, then 0.7, then ten epochs that never beat 0.7."""
        stopper = EarlyStopping(patience=10)
        values = [0.6, 0.7] + [0.7, 0.65, 0.7, 0.6, 0.7, 0.7, 0.65, 0.7, 0.7, 0.7]
        stops = [stopper.update(v) for v in values]
        assert stops == [False] * 11 + [True]
        assert stopper.epochs_seen == 12
        assert stopper.best_epoch == 2

    def test_tie_keeps_earliest(self):
        stopper = EarlyStopping(patience=3)
        for v in (0.8, 0.8, 0.8):
            stopper.update(v)
        assert stopper.best_epoch == 1

    def test_recovery_resets_patience(self):
        stopper = EarlyStopping(patience=3)
        assert not stopper.update(0.5)
        assert not stopper.update(0.4)
        assert not stopper.update(0.45)
        assert not stopper.update(0.6)  # improvement resets the counter
        assert not stopper.update(0.5)
        assert not stopper.update(0.5)
        assert stopper.update(0.5)
        assert stopper.best_epoch == 4


class TestTrain:
    def test_deterministic_weights(self):
        items = make_dataset(8)
        train_set, val_set = items[:12], items[12:]
        p1, h1 = train(SMALL_CONFIG, train_set, val_set, selection=ONE)
        p2, h2 = train(SMALL_CONFIG, train_set, val_set, selection=ONE)
        for a, b in zip(p1.arrays(), p2.arrays()):
            assert np.array_equal(a, b)
        assert h1.val_accuracy == h2.val_accuracy

    def test_input_order_invariance(self):
        items = make_dataset(8)
        train_set, val_set = items[:12], items[12:]
        config = ModelConfig(
            input_dim=6, hidden_units=16, learning_rate=0.01, max_epochs=8,
            patience=10, batch_size=8, seed=7, dropout_rate=0.0,
        )
        p1, _ = train(config, train_set, val_set, selection=ONE)
        p2, _ = train(config, list(reversed(train_set)), val_set, selection=ONE)
        for a, b in zip(p1.arrays(), p2.arrays()):
            assert np.array_equal(a, b)

    def test_augmented_training_runs_and_is_deterministic(self):
        items = make_dataset(6)
        train_set, val_set = items[:8], items[8:]
        p1, _ = train(SMALL_CONFIG, train_set, val_set, augment=True, selection=ONE)
        p2, _ = train(SMALL_CONFIG, train_set, val_set, augment=True, selection=ONE)
        for a, b in zip(p1.arrays(), p2.arrays()):
            assert np.array_equal(a, b)

    def test_loss_mostly_monotone_on_tiny_set(self):
        items = make_dataset(2, seed0=5)
        config = ModelConfig(
            input_dim=6, hidden_units=16, learning_rate=0.001, max_epochs=30,
            patience=30, batch_size=4, seed=0, dropout_rate=0.0,
        )
        _, history = train(config, items, items, selection=ONE)
        losses = history.train_loss
        violations = sum(1 for a, b in zip(losses, losses[1:]) if b > a + 1e-12)
        assert violations <= 2

    def test_overfits_small_set(self):
        items = make_dataset(5, seed0=21)
        config = ModelConfig(
            input_dim=6, hidden_units=16, learning_rate=0.01, max_epochs=60,
            patience=60, batch_size=10, seed=1,
        )
        params, history = train(config, items, items, selection=ONE)
        assert max(history.val_accuracy) == 1.0
        for clip, y in items:
            p = predict(params, clip, ONE)
            assert (p > 0.5) == bool(y)

    def test_early_stopping_restores_best(self):
        items = make_dataset(8, seed0=11)
        train_set, val_set = items[:12], items[12:]
        config = ModelConfig(
            input_dim=6, hidden_units=16, learning_rate=0.01, max_epochs=50,
            patience=5, batch_size=8, seed=3,
        )
        params, history = train(config, train_set, val_set, selection=ONE)
        assert history.epochs_run <= 50
        assert history.best_epoch >= 1
        best_acc = history.val_accuracy[history.best_epoch - 1]
        assert best_acc == max(history.val_accuracy)
        # returned weights really are the best-epoch weights
        from flapnet.model import forward_batch
        from flapnet.features import build_features

        x_val = np.stack([build_features(c, ONE) for c, _ in val_set])
        y_val = np.array([y for _, y in val_set])
        p, _ = forward_batch(params, x_val)
        assert np.mean((p > 0.5) == y_val) == pytest.approx(best_acc)

    def test_empty_sets_rejected(self):
        items = make_dataset(6)
        with pytest.raises(ValidationError):
            train(SMALL_CONFIG, [], items, selection=ONE)
        with pytest.raises(ValidationError):
            train(SMALL_CONFIG, items, [], selection=ONE)

    def test_dimension_mismatch_rejected(self):
        items = make_dataset(6)
        with pytest.raises(ValidationError):
            train(SMALL_CONFIG, items[:8], items[8:], selection=FeatureSelection.all21())
