import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipbandits.instances import (ExpertDistribution, NoiseModel, OutOfDomain, cone, custom,
                                  make_instance, multipeak, one_sided_step, plateau,
                                  sample_expert_function)

BUILTINS = [cone(), plateau(), multipeak(), cone(2), plateau(2),
            multipeak(2, centers=((0.2, 0.2), (0.8, 0.7))),
            cone(3)]


def test_point_values():
    assert cone().eval(0.5) == 1.0
    assert cone().eval(0.0) == 0.5
    assert plateau().eval(0.1) == pytest.approx(0.85)
    assert multipeak().gap(0.8) == pytest.approx(0.1)
    assert one_sided_step().eval(0.6) == 1.0
    assert one_sided_step().eval(0.61) == 0.5


def test_out_of_domain():
    with pytest.raises(OutOfDomain):
        cone().values(np.array([1.5]))


def test_make_instance_and_unknown_family():
    assert make_instance("cone", d=2).d == 2
    with pytest.raises(ValueError):
        make_instance("saddle")


def test_advertised_dimensions():
    assert (plateau().dz_true, plateau().dstar_true) == (0.0, 1.0)
    assert (plateau(2).dz_true, plateau(2).dstar_true) == (1.0, 2.0)
    assert (cone(3).dz_true, cone(3).dstar_true) == (0.0, 0.0)


@pytest.mark.parametrize("inst", BUILTINS, ids=lambda i: f"{i.family}-{i.d}")
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_lipschitz_in_sup_norm(inst, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.random((2, 64, inst.d))
    lhs = np.abs(inst.values(x) - inst.values(y))
    rhs = inst.lipschitz_true * np.abs(x - y).max(axis=1)
    assert np.all(lhs <= rhs + 1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_one_sided_condition(a, b):
    inst = one_sided_step(peak=0.4, width=0.1, drop=0.3)
    x, y = min(a, b), max(a, b)
    assert inst.eval(y) - inst.eval(x) <= inst.lipschitz_true * (y - x) + 1e-12


@pytest.mark.parametrize("inst", BUILTINS + [one_sided_step(), one_sided_step(0.2, 0.3, 0.4)],
                         ids=lambda i: f"{i.family}-{i.d}")
@pytest.mark.parametrize("r", [0.0, 0.03, 0.1, 0.3])
def test_level_set_matches_gap_predicate(inst, r):
    rng = np.random.default_rng(0)
    pts = rng.random((4000, inst.d))
    region = inst.level_set(r)
    g = inst.gaps(pts)
    inside = region.contains(pts, tol=0.0)
    # exact agreement away from the boundary
    clear = np.abs(g - r) > 1e-9
    assert np.array_equal(inside[clear], (g <= r)[clear])
    if r > 0:
        sample = region.sample(500, rng)
        assert np.all(inst.gaps(sample) <= r + 1e-9)


def test_maximizer_is_level_zero():
    assert plateau().maximizer.volume() == pytest.approx(0.5)
    assert cone().maximizer.volume() == 0.0
    assert np.all(cone().maximizer.contains(np.array([[0.5]])))


def test_global_gap():
    assert one_sided_step(peak=0.0, width=0.5, drop=0.2).global_gap() == pytest.approx(0.2)
    assert cone().global_gap() == 0.0


def test_custom_instance():
    inst = custom(lambda x: 1 - np.abs(x[..., 0] - 0.3), d=1, lipschitz=1.0, fstar=1.0)
    assert inst.gap(0.5) == pytest.approx(0.2)
    assert inst.level_set(0.1) is None
    assert inst.in_level_set(np.array([[0.35]]), 0.1).all()


def test_noise_models(rng):
    means = np.full(200000, 0.3)
    assert np.array_equal(NoiseModel("zero").observe(means, rng), means)
    g = NoiseModel("gaussian_unit").observe(means, rng)
    assert g.mean() == pytest.approx(0.3, abs=0.01)
    assert g.std() == pytest.approx(1.0, abs=0.01)
    b = NoiseModel("bernoulli").observe(means, rng)
    assert set(np.unique(b)) <= {0.0, 1.0}
    assert b.mean() == pytest.approx(0.3, abs=0.01)
    with pytest.raises(ValueError):
        NoiseModel("cauchy")


@pytest.mark.parametrize("kind", ["zero", "gaussian_unit", "bernoulli"])
def test_variates_reproduce_observe(kind):
    noise = NoiseModel(kind)
    means = np.linspace(0.1, 0.9, 50)
    a = noise.observe(means, np.random.default_rng(5))
    b = noise.apply(means, noise.variates(50, np.random.default_rng(5)))
    assert np.array_equal(a, b)


@pytest.mark.parametrize("base", [cone(), plateau(), multipeak(), cone(2)],
                         ids=lambda i: f"{i.family}-{i.d}")
def test_expert_functions_are_unclipped_and_lipschitz(base):
    dist = ExpertDistribution(base, amplitude=0.3)
    rng = np.random.default_rng(3)
    x, y = rng.random((2, 500, base.d))
    for sign in (-1.0, 1.0):
        fx = dist.realize(np.array([sign]), x)[0]
        fy = dist.realize(np.array([sign]), y)[0]
        assert np.all((fx >= 0) & (fx <= 1))
        assert np.all(np.abs(fx - fy) <= dist.lipschitz * np.abs(x - y).max(axis=1) + 1e-12)
        unclipped = base.values(x) + sign * dist.shape_values(x)
        assert np.allclose(fx, unclipped)
    # the mean of the two realizations is the base function
    both = dist.realize(np.array([-1.0, 1.0]), x)
    assert np.allclose(both.mean(axis=0), base.values(x))


def test_tent_shape_validation():
    ExpertDistribution(plateau(), amplitude=0.1, shape="tent", center=(0.05,), width=0.05)
    with pytest.raises(ValueError):
        ExpertDistribution(plateau(), amplitude=0.5, shape="tent", center=(0.5,), width=0.2)
    with pytest.raises(ValueError):
        ExpertDistribution(plateau(), shape="tent")


def test_sample_expert_function(rng):
    dist = ExpertDistribution(cone())
    f = sample_expert_function(dist, rng)
    assert f.sign in (-1.0, 1.0)
    assert f(np.array([[0.5]]))[0] == pytest.approx(1 + f.sign * 0.2 * 0.0)
    assert f(np.array([[0.25]]))[0] == pytest.approx(0.75 + f.sign * 0.2 * 0.25)
