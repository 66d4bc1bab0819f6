import numpy as np
import pytest

from dwellcert.core.certify import compute_margins, evaluate_grid
from dwellcert.core.constants import FlowKind
from dwellcert.core.errors import NonFiniteLossError
from dwellcert.core.flowmap import FlowMapHandle
from dwellcert.core.losses import grid_loss, make_batch, sub_losses, total_loss
from tests.unit.test_core.testcertificates import (
    EXCLUSION_RADIUS,
    TAU,
    handbuilt_bundle,
    mode_settings,
    train_config,
)


def included_states(margins, samples):
    return margins.included(np.abs(samples.state_samples[:, 0]))


@pytest.fixture
def pair_ids():
    return np.random.default_rng(0).choice(6250, size=200, replace=False)


@pytest.fixture
def failing(linear1, samples1):
    """The hand-built certificate with a decay rate it cannot meet."""
    bundle = handbuilt_bundle(settings={1: mode_settings(kappa=100.0)})
    margins = compute_margins(linear1, bundle, samples1, TAU, EXCLUSION_RADIUS)
    return bundle, margins


def test_make_batch(samples1, margins1):
    batch = make_batch(samples1, [0, 1, 25, 26], included_states(margins1, samples1))
    assert batch.state_index.tolist() == [0, 0, 1, 1]
    states = samples1.state_samples[:, 0]
    dists = samples1.dist_samples[:, 0]
    np.testing.assert_array_equal(batch.xs[:, 0], states[[0, 0, 1, 1]])
    np.testing.assert_array_equal(batch.ws[:, 0], dists[[0, 1, 0, 1]])
    assert batch.included.all()
    assert batch.distinct().tolist() == [0, 2]


def test_certified_bundle_has_no_loss(bundle1, margins1, samples1, flows1, pair_ids):
    batch = make_batch(samples1, pair_ids, included_states(margins1, samples1))
    loss = total_loss(bundle1, 1, batch, margins1, flows1[1], train_config())
    assert loss.sub_losses.tolist() == [0.0] * 5
    assert loss.penalty == 0.0
    assert loss.total == 0.0
    for grad in (*loss.lyapunov_grads, *loss.controller_grads):
        assert not np.any(grad)


def test_sub_losses_of_failing_bundle(failing, samples1, flows1, pair_ids):
    bundle, margins = failing
    batch = make_batch(samples1, pair_ids, included_states(margins, samples1))
    parts = sub_losses(bundle, 1, batch, margins, flows1[1])
    assert parts.values[0] == 0.0
    assert parts.values[3] > 0
    assert np.all(parts.values >= 0)
    assert parts.slacks.shape == (200, 4)


def test_loss_gradients_match_finite_differences(failing, samples1, flows1, pair_ids):
    bundle, margins = failing
    batch = make_batch(samples1, pair_ids, included_states(margins, samples1))
    config = train_config()
    loss = total_loss(bundle, 1, batch, margins, flows1[1], config)
    assert loss.total > 0

    def objective(candidate):
        return total_loss(candidate, 1, batch, margins, flows1[1], config).total

    cert = bundle.modes[1]

    def numeric(net, name, k, index, step):
        plus = [a.copy() for a in net.arrays()]
        minus = [a.copy() for a in net.arrays()]
        plus[k][index] += step
        minus[k][index] -= step
        up = bundle.with_mode(1, **{name: net.with_arrays(plus)})
        down = bundle.with_mode(1, **{name: net.with_arrays(minus)})
        return (objective(up) - objective(down)) / (2 * step)

    # small steps keep |V(x*)| inside the zero tolerance
    for k in (0, 2):
        expected = numeric(cert.lyapunov, "lyapunov", k, (0, 0), 1e-7)
        assert loss.lyapunov_grads[k][0, 0] == pytest.approx(expected, rel=1e-4)
    for index in ((0, 0), (0, 1)):
        expected = numeric(cert.controller, "controller", 0, index, 1e-6)
        assert loss.controller_grads[0][index] == pytest.approx(expected, rel=1e-4)


class NanFlow(FlowMapHandle):
    kind = FlowKind.BUILTIN

    def _advance(self, xs, us, dt):
        return np.full_like(xs, np.nan)


def test_non_finite_loss(bundle1, samples1, margins1):
    batch = make_batch(samples1, np.arange(30), included_states(margins1, samples1))
    with pytest.raises(NonFiniteLossError) as excinfo:
        total_loss(bundle1, 1, batch, margins1, NanFlow(1, 1, 1), train_config())
    assert excinfo.value.sample_index == 0
    assert "Loss of mode 1 is not finite" in str(excinfo.value)


def test_grid_loss(bundle1, failing, margins1, samples1, flows1):
    evaluation = evaluate_grid(bundle1, margins1, samples1, flows1)[1]
    values = grid_loss(bundle1, 1, evaluation, margins1, train_config())
    assert values.total == 0.0

    bundle, margins = failing
    evaluation = evaluate_grid(bundle, margins, samples1, flows1)[1]
    values = grid_loss(bundle, 1, evaluation, margins, train_config())
    assert values.sub_losses[3] > 0
    assert values.total == pytest.approx(sum(values.sub_losses))
