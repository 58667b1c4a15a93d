import numpy as np
import pytest

from gradcheck import assert_grads_match
from stockformer.errors import (
    InvalidArgumentError,
    MissingGradError,
    NotScalarError,
    ShapeMismatchError,
)
from stockformer.optim import Adam, adam_step
from stockformer.rng import Rng
from stockformer.tensor import (
    Tensor,
    add,
    affine,
    backward,
    concat,
    dropout,
    layer_norm,
    matmul,
    mse_loss,
    mul,
    no_grad,
    relu,
    reshape,
    scaled_attention,
    sigmoid,
    softmax,
    sub,
    tanh,
    tensor_slice,
    tmean,
    transpose,
    tsum,
)


def _rand(rng, *shape):
    return rng.normal(*shape)


def test_softmax_single_element_is_one():
    out = softmax(Tensor([3.7]), axis=-1)
    assert np.allclose(out.data, [1.0])


def test_softmax_rows_sum_to_one():
    x = Tensor(Rng(0).normal(6, 9))
    out = softmax(x, axis=-1)
    assert np.abs(out.data.sum(axis=-1) - 1.0).max() < 1e-12


def test_matmul_identity():
    x = np.arange(12, dtype=np.float64).reshape(3, 4)
    out = matmul(Tensor(np.eye(3)), Tensor(x))
    assert np.array_equal(out.data, x)


def test_matmul_shape_errors_name_both_shapes():
    with pytest.raises(ShapeMismatchError) as exc:
        matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))
    assert "(2, 3)" in str(exc.value) and "(4, 5)" in str(exc.value)


def test_add_rejects_non_suffix_shapes():
    with pytest.raises(ShapeMismatchError):
        add(Tensor(np.zeros((3, 4))), Tensor(np.zeros((4, 3))))


def test_backward_sum_gives_ones():
    w = Tensor(np.zeros((2, 3)), requires_grad=True)
    backward(tsum(w))
    assert np.array_equal(w.grad, np.ones((2, 3)))


def test_backward_accumulates_across_uses():
    w = Tensor(np.zeros(4), requires_grad=True)
    loss = add(tsum(w), tsum(w))
    backward(loss)
    assert np.array_equal(w.grad, 2.0 * np.ones(4))


def test_backward_requires_scalar():
    w = Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(NotScalarError):
        backward(add(w, w))


def test_no_grad_blocks_taping():
    w = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        out = tsum(mul(w, w))
    assert out._ctx is None and not out.requires_grad


def test_dropout_p0_identity_and_p1_zeros():
    x = Tensor(Rng(1).normal(5, 7), requires_grad=True)
    assert dropout(x, 0.0, None, training=True) is x
    out = dropout(x, 1.0, None, training=True)
    assert np.array_equal(out.data, np.zeros((5, 7)))


def test_dropout_eval_mode_is_identity():
    x = Tensor(np.ones((4, 4)))
    assert dropout(x, 0.5, Rng(2), training=False) is x


def test_dropout_preserves_expectation():
    x = Tensor(np.ones(100_000))
    out = dropout(x, 0.3, Rng(3), training=True)
    assert abs(out.data.mean() - 1.0) < 0.02


def test_dropout_p_out_of_range():
    with pytest.raises(InvalidArgumentError):
        dropout(Tensor(np.ones(3)), 1.5, Rng(0))


def test_layer_norm_shape_guard():
    with pytest.raises(ShapeMismatchError):
        layer_norm(Tensor(np.ones((2, 8))), Tensor(np.ones(4)), Tensor(np.zeros(8)))


def test_mse_loss_shape_guard():
    with pytest.raises(ShapeMismatchError):
        mse_loss(Tensor(np.zeros(3)), Tensor(np.zeros(4)))


# --- finite-difference checks for every op, random 3x4-ish inputs ---------


def _proj(rng, shape):
    # fixed random projection making scalar losses sensitive to every entry
    return Tensor(rng.normal(*shape))


OP_CASES = {}


def op_case(name):
    def deco(fn):
        OP_CASES[name] = fn
        return fn

    return deco


@op_case("add")
def _case_add(rng):
    a = Tensor(_rand(rng, 3, 4), requires_grad=True)
    b = Tensor(_rand(rng, 4), requires_grad=True)
    r = _proj(rng, (3, 4))
    return {"a": a, "b": b}, lambda: tsum(mul(add(a, b), r))


@op_case("sub")
def _case_sub(rng):
    a = Tensor(_rand(rng, 3, 4), requires_grad=True)
    b = Tensor(_rand(rng, 3, 4), requires_grad=True)
    r = _proj(rng, (3, 4))
    return {"a": a, "b": b}, lambda: tsum(mul(sub(a, b), r))


@op_case("mul")
def _case_mul(rng):
    a = Tensor(_rand(rng, 3, 4), requires_grad=True)
    b = Tensor(_rand(rng, 4), requires_grad=True)
    r = _proj(rng, (3, 4))
    return {"a": a, "b": b}, lambda: tsum(mul(mul(a, b), r))


@op_case("matmul")
def _case_matmul(rng):
    a = Tensor(_rand(rng, 3, 4), requires_grad=True)
    b = Tensor(_rand(rng, 4, 5), requires_grad=True)
    r = _proj(rng, (3, 5))
    return {"a": a, "b": b}, lambda: tsum(mul(matmul(a, b), r))


@op_case("matmul_batched")
def _case_matmul_batched(rng):
    a = Tensor(_rand(rng, 2, 3, 4), requires_grad=True)
    b = Tensor(_rand(rng, 4, 5), requires_grad=True)
    r = _proj(rng, (2, 3, 5))
    return {"a": a, "b": b}, lambda: tsum(mul(matmul(a, b), r))


@op_case("transpose")
def _case_transpose(rng):
    a = Tensor(_rand(rng, 3, 4), requires_grad=True)
    r = _proj(rng, (4, 3))
    return {"a": a}, lambda: tsum(mul(transpose(a), r))


@op_case("transpose_perm")
def _case_transpose_perm(rng):
    a = Tensor(_rand(rng, 2, 3, 4), requires_grad=True)
    r = _proj(rng, (3, 2, 4))
    return {"a": a}, lambda: tsum(mul(transpose(a, (1, 0, 2)), r))


@op_case("reshape")
def _case_reshape(rng):
    a = Tensor(_rand(rng, 3, 4), requires_grad=True)
    r = _proj(rng, (2, 6))
    return {"a": a}, lambda: tsum(mul(reshape(a, (2, 6)), r))


@op_case("concat")
def _case_concat(rng):
    a = Tensor(_rand(rng, 3, 2), requires_grad=True)
    b = Tensor(_rand(rng, 3, 4), requires_grad=True)
    r = _proj(rng, (3, 6))
    return {"a": a, "b": b}, lambda: tsum(mul(concat([a, b], axis=1), r))


@op_case("slice")
def _case_slice(rng):
    a = Tensor(_rand(rng, 3, 4), requires_grad=True)
    r = _proj(rng, (2,))
    return {"a": a}, lambda: tsum(mul(tensor_slice(a, (1, slice(1, 3))), r))


@op_case("softmax")
def _case_softmax(rng):
    a = Tensor(_rand(rng, 3, 4), requires_grad=True)
    r = _proj(rng, (3, 4))
    return {"a": a}, lambda: tsum(mul(softmax(a, axis=-1), r))


@op_case("softmax_scaled_masked")
def _case_softmax_scaled_masked(rng):
    a = Tensor(_rand(rng, 4, 4), requires_grad=True)
    r = _proj(rng, (4, 4))
    mask = np.zeros((4, 4))
    mask[np.triu_indices(4, k=1)] = -np.inf
    return {"a": a}, lambda: tsum(mul(softmax(a, axis=-1, scale=0.5, mask=mask), r))


@op_case("affine")
def _case_affine(rng):
    x = Tensor(_rand(rng, 2, 3, 4), requires_grad=True)
    w = Tensor(_rand(rng, 4, 5), requires_grad=True)
    b = Tensor(_rand(rng, 5), requires_grad=True)
    r = _proj(rng, (2, 3, 5))
    return {"x": x, "w": w, "b": b}, lambda: tsum(mul(affine(x, w, b), r))


@op_case("scaled_attention")
def _case_scaled_attention(rng):
    q = Tensor(_rand(rng, 2, 2, 4, 3), requires_grad=True)
    k = Tensor(_rand(rng, 2, 2, 4, 3), requires_grad=True)
    v = Tensor(_rand(rng, 2, 2, 4, 3), requires_grad=True)
    mask = np.zeros((4, 4))
    mask[np.triu_indices(4, k=1)] = -np.inf
    r = _proj(rng, (2, 2, 4, 3))
    return {"q": q, "k": k, "v": v}, lambda: tsum(
        mul(scaled_attention(q, k, v, 0.6, mask=mask), r)
    )


@op_case("tanh")
def _case_tanh(rng):
    a = Tensor(_rand(rng, 3, 4), requires_grad=True)
    r = _proj(rng, (3, 4))
    return {"a": a}, lambda: tsum(mul(tanh(a), r))


@op_case("sigmoid")
def _case_sigmoid(rng):
    a = Tensor(_rand(rng, 3, 4), requires_grad=True)
    r = _proj(rng, (3, 4))
    return {"a": a}, lambda: tsum(mul(sigmoid(a), r))


@op_case("relu")
def _case_relu(rng):
    a = Tensor(_rand(rng, 3, 4) + 0.05, requires_grad=True)
    r = _proj(rng, (3, 4))
    return {"a": a}, lambda: tsum(mul(relu(a), r))


@op_case("layer_norm")
def _case_layer_norm(rng):
    x = Tensor(_rand(rng, 3, 4), requires_grad=True)
    g = Tensor(1.0 + 0.1 * _rand(rng, 4), requires_grad=True)
    b = Tensor(0.1 * _rand(rng, 4), requires_grad=True)
    r = _proj(rng, (3, 4))
    return {"x": x, "g": g, "b": b}, lambda: tsum(mul(layer_norm(x, g, b), r))


@op_case("dropout")
def _case_dropout(rng):
    x = Tensor(_rand(rng, 3, 4), requires_grad=True)
    r = _proj(rng, (3, 4))
    # a fresh Rng per call keeps the mask identical across FD evaluations
    return {"x": x}, lambda: tsum(mul(dropout(x, 0.4, Rng(99), training=True), r))


@op_case("mse_loss")
def _case_mse_loss(rng):
    p = Tensor(_rand(rng, 3, 4), requires_grad=True)
    t = Tensor(_rand(rng, 3, 4), requires_grad=True)
    return {"p": p, "t": t}, lambda: mse_loss(p, t)


@op_case("sum_axis")
def _case_sum_axis(rng):
    a = Tensor(_rand(rng, 3, 4), requires_grad=True)
    r = _proj(rng, (4,))
    return {"a": a}, lambda: tsum(mul(tsum(a, axis=0), r))


@op_case("mean_axis")
def _case_mean_axis(rng):
    a = Tensor(_rand(rng, 3, 4), requires_grad=True)
    r = _proj(rng, (3,))
    return {"a": a}, lambda: tsum(mul(tmean(a, axis=1), r))


@pytest.mark.parametrize("name", sorted(OP_CASES))
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_op_gradients_match_finite_differences(name, seed):
    params, build_loss = OP_CASES[name](Rng(1000 * seed + 17))
    assert_grads_match(build_loss, params)


def test_three_layer_mlp_gradcheck():
    rng = Rng(314)
    w1 = Tensor(0.5 * rng.normal(5, 8), requires_grad=True)
    b1 = Tensor(np.zeros(8), requires_grad=True)
    w2 = Tensor(0.5 * rng.normal(8, 6), requires_grad=True)
    b2 = Tensor(np.zeros(6), requires_grad=True)
    w3 = Tensor(0.5 * rng.normal(6, 1), requires_grad=True)
    x = Tensor(rng.normal(4, 5))
    y = Tensor(rng.normal(4, 1))

    def build_loss():
        h1 = tanh(add(matmul(x, w1), b1))
        h2 = sigmoid(add(matmul(h1, w2), b2))
        return mse_loss(matmul(h2, w3), y)

    assert_grads_match(build_loss, {"w1": w1, "b1": b1, "w2": w2, "b2": b2, "w3": w3})


# --- Adam ------------------------------------------------------------------


def test_adam_first_step_matches_hand_computation():
    w = Tensor(np.zeros(()), requires_grad=True)
    w.grad = np.ones(())
    opt = Adam([w], lr=1e-4)
    opt.step()
    # t=1 bias correction makes the step exactly -lr * g/(|g| + eps)
    assert abs(w.data + 1e-4 / (1.0 + 1e-8)) < 1e-18
    assert w.grad is None


def test_adam_zero_grad_leaves_parameter_unchanged():
    w = Tensor(np.full((3,), 2.5), requires_grad=True)
    w.grad = np.zeros(3)
    Adam([w], lr=0.1).step()
    assert np.array_equal(w.data, np.full((3,), 2.5))


def test_adam_missing_grad_raises():
    w = Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(MissingGradError):
        Adam([w], lr=0.1).step()


def test_adam_converges_on_quadratic():
    w = Tensor(np.zeros(()), requires_grad=True)
    opt = Adam([w], lr=0.1)
    for _ in range(200):
        diff = sub(w, Tensor(3.0))
        backward(mul(diff, diff))
        opt.step()
    assert abs(w.item() - 3.0) < 0.1


def test_adam_step_function_surface():
    w = Tensor(np.zeros(()), requires_grad=True)
    state = Adam([w], lr=1.0)
    w.grad = np.ones(())
    adam_step([w], state, lr=1e-4)
    assert abs(w.data + 1e-4 / (1.0 + 1e-8)) < 1e-18


def test_determinism_same_seed_same_params_after_steps():
    def run(seed):
        rng = Rng(seed)
        w = Tensor(rng.normal(4, 4), requires_grad=True)
        x = Tensor(rng.normal(6, 4))
        y = Tensor(rng.normal(6, 4))
        opt = Adam([w], lr=1e-2)
        for _ in range(20):
            backward(mse_loss(matmul(x, w), y))
            opt.step()
        return w.data.copy()

    assert np.array_equal(run(123), run(123))
