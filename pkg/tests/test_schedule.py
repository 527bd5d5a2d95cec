import math

import numpy as np
import pytest

from diffseg.schedule import (
    NoiseSchedule,
    ScheduleConfigError,
    from_diffusion_space,
    make_linear_schedule,
    make_skip_trajectory,
    one_hot,
    to_diffusion_space,
)


def test_two_step_cumulative_product():
    sched = make_linear_schedule(2, 0.5, 0.5)
    np.testing.assert_array_equal(sched.alpha_bar, [0.5, 0.25])
    assert sched.abar(0) == 1.0


def test_eta_zero_gives_zero_sigma():
    sched = make_linear_schedule(50, eta=0.0)
    assert np.all(sched.sigma == 0)


def test_default_schedule_ends_near_zero():
    sched = make_linear_schedule()
    # independent evaluation of the product in log space
    betas = [1e-4 + (0.02 - 1e-4) * i / 999 for i in range(1000)]
    direct = math.exp(sum(math.log1p(-b) for b in betas))
    assert sched.abar(1000) == pytest.approx(direct, rel=1e-10)
    assert sched.abar(1000) < 5e-5


def test_alpha_bar_invariants():
    sched = make_linear_schedule()
    ab = sched.alpha_bar
    assert np.all(np.diff(ab) < 0)
    recomputed = np.array([np.prod(1 - sched.betas[: s + 1]) for s in range(sched.S)])
    np.testing.assert_allclose(ab, recomputed, rtol=0, atol=1e-12)
    assert np.all((sched.betas > 0) & (sched.betas < 1))


def test_sigma_bounded_by_prev_noise_level():
    sched = make_linear_schedule(eta=1.0)
    for s in range(1, sched.S + 1):
        assert sched.sigma_between(s, s - 1) ** 2 <= 1 - sched.abar(s - 1) + 1e-15
    for s, sp in zip(make_skip_trajectory(1000, 25), make_skip_trajectory(1000, 25)[1:]):
        assert sched.sigma_between(s, sp) ** 2 <= 1 - sched.abar(sp) + 1e-15
        assert sched.sigma_between(s, sp) >= 0


@pytest.mark.parametrize(
    "args", [(0, 1e-4, 0.02, 1.0), (10, 0.0, 0.02, 1.0), (10, 0.03, 0.02, 1.0), (10, 1e-4, 1.0, 1.0), (10, 1e-4, 0.02, -1.0)]
)
def test_invalid_schedule(args):
    with pytest.raises(ScheduleConfigError):
        make_linear_schedule(*args)


def test_skip_trajectories():
    t = make_skip_trajectory(1000, 25)
    assert len(t) == 26 and t[0] == 1000 and t[-1] == 0
    assert all(a > b for a, b in zip(t, t[1:]))
    assert make_skip_trajectory(4, 4) == [4, 3, 2, 1, 0]
    assert make_skip_trajectory(1000, 1) == [1000, 0]
    for n in range(1, 60):
        t = make_skip_trajectory(59, n)
        assert len(t) == n + 1 and all(a > b for a, b in zip(t, t[1:]))
    with pytest.raises(ScheduleConfigError):
        make_skip_trajectory(10, 0)
    with pytest.raises(ScheduleConfigError):
        make_skip_trajectory(10, 11)


def test_diffusion_space_maps():
    np.testing.assert_array_equal(to_diffusion_space([[0, 1, 0]]), [[-1, 1, -1]])
    y = one_hot(np.array([0, 0, 0]), 3)
    d = to_diffusion_space(y)
    assert np.all(d[:, 0] == 1) and np.all(d[:, 1:] == -1)
    y = one_hot(np.array([2, 0, 1, 1]), 3)
    np.testing.assert_array_equal(from_diffusion_space(to_diffusion_space(y)), y)
    np.testing.assert_array_equal(from_diffusion_space([[-1, 1, -1]]), [[0, 1, 0]])
    np.testing.assert_array_equal(from_diffusion_space([[0, 0]]), [[0.5, 0.5]])
    np.testing.assert_array_equal(from_diffusion_space([[3, -3]]), [[1, 0]])
    np.testing.assert_array_equal(from_diffusion_space([[-2, -5]]), [[0.5, 0.5]])
    with pytest.raises(ValueError):
        to_diffusion_space([[1, 1, 0]])


def test_schedule_is_immutable():
    sched = NoiseSchedule(np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        sched.betas[0] = 0.5
