"""Adam optimizer behaviour against a scalar textbook implementation."""

import numpy as np
import pytest

from latentpatch import Tape, Tensor
from latentpatch import tensor as T
from latentpatch.optim import AdamState, adam_update

from oracles import ScalarAdam


def test_first_step_magnitude():
    """With bias correction the first step is ~lr regardless of grad scale."""
    p = Tensor([0.0], requires_grad=True)
    state = AdamState.for_tensor(p)
    adam_update(p, np.array([4.0]), state, learning_rate=0.01)
    assert abs(p.data[0] - (-0.01)) < 1e-6
    assert state.t == 1


def test_zero_gradient_leaves_param_unchanged():
    p = Tensor([1.0, -2.0], requires_grad=True)
    state = AdamState.for_tensor(p)
    adam_update(p, np.zeros(2), state, learning_rate=0.1)
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


def test_converges_on_shifted_quadratic():
    p = Tensor([0.0], requires_grad=True)
    state = AdamState.for_tensor(p)
    for _ in range(100):
        with Tape() as tape:
            d = T.sub(p, Tensor([2.0]))
            loss = T.tsum(T.mul(d, d))
        grads = tape.backward(loss)
        adam_update(p, grads[p], state, learning_rate=0.1)
    assert abs(p.data[0] - 2.0) < 0.05


def test_trajectory_matches_scalar_oracle():
    oracle = ScalarAdam(lr=0.1)
    theta = 0.0
    p = Tensor([0.0], requires_grad=True)
    state = AdamState.for_tensor(p)
    for _ in range(50):
        g = 2.0 * (theta - 2.0)
        theta = oracle.step(theta, g)
        adam_update(p, np.array([2.0 * (p.data[0] - 2.0)]), state,
                    learning_rate=0.1)
        assert abs(p.data[0] - theta) < 1e-12


def test_non_finite_gradient_raises_with_step_and_coordinate():
    p = Tensor([0.0, 0.0], requires_grad=True)
    state = AdamState.for_tensor(p)
    adam_update(p, np.array([1.0, 1.0]), state, learning_rate=0.01)
    with pytest.raises(FloatingPointError, match=r"step 2.*coordinate"):
        adam_update(p, np.array([1.0, np.nan]), state, learning_rate=0.01)


def test_shape_mismatch_rejected():
    p = Tensor([0.0, 0.0], requires_grad=True)
    state = AdamState.for_tensor(p)
    with pytest.raises(T.ShapeError):
        adam_update(p, np.zeros(3), state, learning_rate=0.01)
