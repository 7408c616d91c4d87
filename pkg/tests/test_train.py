import numpy as np
import pytest

from groupaffect import rng as rngmod
from groupaffect.errors import EmptyDatasetError
from groupaffect.nn import EarlyStopping, ModelSpec, TrainConfig, fit, init_params
from groupaffect.nn.model import FLATTEN, RELU, SOFTMAX, conv, dense, dropout, maxpool
from groupaffect.synthetic import face_task


def tiny_spec():
    return ModelSpec((conv(2), RELU, maxpool(), FLATTEN, dense(8), RELU, dropout(0.5), dense(3), SOFTMAX),
                     input_shape=(8, 8, 3))


def tiny_data(n, seed):
    x, y = face_task(n, seed, size=8)
    return x, y


def test_early_stopping_sequence():
    stopper = EarlyStopping(3)
    stops = [stopper.update(e, v) for e, v in enumerate([1.0, 1.0, 1.5, 1.2], start=1)]
    assert stops == [False, False, False, True]
    assert stopper.best_epoch == 1


def test_early_stopping_resets_on_improvement():
    stopper = EarlyStopping(2)
    assert not stopper.update(1, 1.0)
    assert not stopper.update(2, 1.1)
    assert not stopper.update(3, 0.5)
    assert not stopper.update(4, 0.6)
    assert stopper.update(5, 0.7)
    assert stopper.best_epoch == 3


def test_fit_stops_when_val_loss_never_improves():
    # zero learning rate: validation loss is constant after epoch 1
    x, y = tiny_data(40, 1)
    spec = tiny_spec()
    params = init_params(spec, rngmod.stream(0, rngmod.INIT))
    cfg = TrainConfig(batch_size=16, max_epochs=20, early_stop_patience=3, learning_rate=0.0)
    best, hist = fit(spec, params, x[:30], y[:30], x[30:], y[30:], cfg)
    assert len(hist.epochs) == 4
    assert hist.stopped_early and hist.best_epoch == 1
    for i in params:
        np.testing.assert_array_equal(best[i]["W"], params[i]["W"])


def test_fit_is_deterministic():
    x, y = tiny_data(40, 2)
    spec = tiny_spec()
    cfg = TrainConfig(batch_size=16, max_epochs=3, seed=11)
    runs = []
    for _ in range(2):
        params = init_params(spec, rngmod.stream(11, rngmod.INIT))
        best, hist = fit(spec, params, x[:30], y[:30], x[30:], y[30:], cfg)
        runs.append((best, hist))
    assert runs[0][1].to_rows() == runs[1][1].to_rows()
    for i in runs[0][0]:
        assert runs[0][0][i]["W"].tobytes() == runs[1][0][i]["W"].tobytes()


def test_fit_does_not_modify_input_params():
    x, y = tiny_data(20, 3)
    spec = tiny_spec()
    params = init_params(spec, rngmod.stream(0, rngmod.INIT))
    before = {i: p["W"].copy() for i, p in params.items()}
    fit(spec, params, x[:15], y[:15], x[15:], y[15:], TrainConfig(batch_size=8, max_epochs=1))
    for i in params:
        np.testing.assert_array_equal(params[i]["W"], before[i])


def test_fit_returns_best_epoch_params():
    x, y = tiny_data(60, 4)
    spec = tiny_spec()
    params = init_params(spec, rngmod.stream(0, rngmod.INIT))
    seen = []
    cfg = TrainConfig(batch_size=16, max_epochs=5, learning_rate=0.01)
    best, hist = fit(spec, params, x[:45], y[:45], x[45:], y[45:], cfg, on_epoch=seen.append)
    assert len(seen) == len(hist.epochs)
    val_losses = [r.val_loss for r in hist.epochs]
    assert hist.best_epoch == int(np.argmin(val_losses)) + 1
    from groupaffect.nn.train import evaluate_split
    loss, _ = evaluate_split(spec, best, x[45:], y[45:])
    assert loss == pytest.approx(min(val_losses), rel=1e-6)


def test_fit_rejects_empty_sets():
    spec = tiny_spec()
    params = init_params(spec, rngmod.stream(0, rngmod.INIT))
    x, y = tiny_data(10, 5)
    with pytest.raises(EmptyDatasetError):
        fit(spec, params, x[:0], y[:0], x, y, TrainConfig())
    with pytest.raises(EmptyDatasetError):
        fit(spec, params, x, y, x[:0], y[:0], TrainConfig())


def test_history_rows_have_five_columns():
    x, y = tiny_data(20, 6)
    spec = tiny_spec()
    params = init_params(spec, rngmod.stream(0, rngmod.INIT))
    _, hist = fit(spec, params, x[:15], y[:15], x[15:], y[15:], TrainConfig(batch_size=8, max_epochs=2))
    rows = hist.to_rows()
    assert [r[0] for r in rows] == [1, 2]
    assert all(len(r) == 5 for r in rows)
    assert all(0.0 <= r[2] <= 1.0 and 0.0 <= r[4] <= 1.0 for r in rows)


@pytest.mark.parametrize("kw", [{"batch_size": 0}, {"max_epochs": 0}, {"early_stop_patience": 0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)
