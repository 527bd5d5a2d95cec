import math

import numpy as np
import pytest
import torch

from diffseg.losses import LossWeights, loss_boundary, loss_ce, loss_smooth, loss_sum
from diffseg.numerics import check_gradient, softmax_rows


def t(x):
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def random_probs(seed, L=12, C=3):
    g = torch.Generator().manual_seed(seed)
    return softmax_rows(torch.randn(L, C, generator=g, dtype=torch.float64) * 2)


def onehot(labels, C):
    return t(np.eye(C)[labels])


def test_ce_perfect_and_uniform():
    y = onehot([0, 1, 2, 1], 3)
    assert loss_ce(y, y).item() <= 3 * 1e-8
    p = t(np.full((5, 4), 0.25))
    y = onehot([0, 1, 2, 3, 0], 4)
    assert loss_ce(p, y).item() == pytest.approx(math.log(4) / 4, abs=1e-7)
    assert loss_ce(p, y).item() == pytest.approx(0.3466, abs=1e-4)


def test_ce_shape_mismatch():
    with pytest.raises(ValueError):
        loss_ce(t(np.ones((3, 2))), t(np.ones((3, 3))))


def test_smooth_cases():
    p = t(np.tile([[0.2, 0.8]], (6, 1)))
    assert loss_smooth(p).item() == 0.0
    p = t([[math.exp(-1)], [math.exp(-2)]])
    assert loss_smooth(p).item() == pytest.approx(1.0, abs=1e-6)
    assert loss_smooth(t([[0.3, 0.7]])).item() == 0.0


def test_smooth_clip_contract():
    # jump from class 0 to class 1: both log-differences exceed the clip
    p = t([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    L, C = p.shape
    assert loss_smooth(p, clip=4.0).item() == pytest.approx(2 * 16 / ((L - 1) * C), abs=1e-12)


def test_boundary_cases():
    p = onehot([1] * 5, 3)
    assert loss_boundary(p, t(np.zeros(4))).item() == pytest.approx(0.0, abs=1e-7)
    p = t([[1.0, 0.0], [0.5, 0.5]])  # dot product 0.5
    assert loss_boundary(p, t([1.0])).item() == pytest.approx(math.log(2), abs=1e-7)
    with pytest.raises(ValueError):
        loss_boundary(p, t([1.0, 0.0]))


def test_boundary_class_permutation_invariance():
    p = random_probs(3)
    b = t(np.random.default_rng(0).uniform(size=11))
    perm = [2, 0, 1]
    assert loss_boundary(p[:, perm], b).item() == pytest.approx(loss_boundary(p, b).item(), abs=1e-15)


@pytest.mark.parametrize("which", ["ce", "smo", "bd"])
def test_loss_gradients(which):
    g = torch.Generator().manual_seed(7)
    logits = torch.randn(12, 3, generator=g, dtype=torch.float64).requires_grad_()
    y = onehot(np.random.default_rng(1).integers(0, 3, 12), 3)
    b = t(np.random.default_rng(2).uniform(size=11))
    fn = {
        "ce": lambda: loss_ce(softmax_rows(logits), y),
        "smo": lambda: loss_smooth(softmax_rows(logits), clip=100.0),
        "bd": lambda: loss_boundary(softmax_rows(logits), b),
    }[which]
    rep = check_gradient(fn, {"logits": logits}, tol=1e-6)
    assert rep.passed, rep.max_rel_error


def test_losses_nonnegative_finite():
    for seed in range(20):
        p = random_probs(seed)
        y = onehot(np.random.default_rng(seed).integers(0, 3, 12), 3)
        b = t(np.random.default_rng(seed).uniform(size=11))
        for v in (loss_ce(p, y), loss_smooth(p), loss_boundary(p, b)):
            assert torch.isfinite(v) and v.item() >= 0


def test_ce_projected_descent_reaches_truth():
    labels = np.array([0, 2, 1, 1])
    y = onehot(labels, 3)
    p = t(np.random.default_rng(0).dirichlet(np.ones(3), size=4))
    prev = loss_ce(p, y).item()
    for _ in range(50):
        p = p.clone().requires_grad_()
        loss_ce(p, y).backward()
        with torch.no_grad():
            q = torch.clamp(p - 0.01 * p.grad, min=1e-12)
            p = q / q.sum(dim=1, keepdim=True)
        cur = loss_ce(p, y).item()
        assert cur <= prev
        prev = cur
    assert loss_ce(y, y).item() < prev


def test_loss_sum_composition():
    p, aux = random_probs(0), random_probs(1)
    y = onehot(np.random.default_rng(0).integers(0, 3, 12), 3)
    b = t(np.random.default_rng(1).uniform(size=11))
    zero, _ = loss_sum(p, y, b, LossWeights(0, 0, 0, 0), aux)
    assert zero.item() == 0.0
    only_ce, _ = loss_sum(p, y, b, LossWeights(1, 0, 0, 0), aux)
    assert only_ce.item() == loss_ce(p, y).item()
    w = LossWeights(0.7, 1.3, 0.4, 2.0)
    total, parts = loss_sum(p, y, b, w, aux)
    by_hand = (
        0.7 * loss_ce(p, y).item()
        + 1.3 * loss_smooth(p).item()
        + 0.4 * loss_boundary(p, b).item()
        + 2.0 * (loss_ce(aux, y).item() + loss_smooth(aux).item())
    )
    assert abs(total.item() - by_hand) <= 1e-12
    assert set(parts) == {"ce", "smo", "bd", "aux", "total"}


def test_weight_validation():
    with pytest.raises(ValueError):
        LossWeights(w_ce=-1)
    with pytest.raises(ValueError):
        LossWeights(smo_clip=0)
