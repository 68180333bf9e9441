import numpy as np
import pytest
from scipy import linalg

from spikelink.core import ContinuousFrame, SimClock
from spikelink.errors import BadRange, DimensionMismatch, SingularSystem
from spikelink.nef import (
    LifParams,
    NefPopulation,
    default_grid,
    default_reg,
    lif_rate,
    lif_step,
    nef_build,
    nef_decode,
    nef_encode_step,
    nef_train_decoders,
    rmse,
)


def simulate_rate(j, lif=LifParams(), seconds=2.0):
    pop = NefPopulation(np.ones((1, 1)), [1.0], [0.0], lif)
    n = int(round(seconds / lif.dt))
    count = sum(int(lif_step(pop, np.array([j]))[0]) for _ in range(n))
    return count / seconds


def test_lif_rest_stays_at_reset():
    pop = NefPopulation(np.ones((1, 1)), [1.0], [0.0])
    for _ in range(100):
        assert not lif_step(pop, np.zeros(1)).any()
    assert pop.voltage[0] == 0.0


def test_lif_subthreshold_converges_without_spiking():
    pop = NefPopulation(np.ones((1, 1)), [1.0], [0.0])
    j = np.array([0.999])
    for _ in range(2000):
        assert not lif_step(pop, j).any()
    assert pop.voltage[0] == pytest.approx(0.999, abs=1e-12)


@pytest.mark.parametrize("j", [1.2, 1.5, 2.0, 5.0, 20.0])
def test_lif_empirical_rate_matches_analytic(j):
    analytic = 1.0 / (0.002 + 0.02 * np.log(j / (j - 1.0)))
    assert lif_rate(j) == pytest.approx(analytic, rel=1e-12)
    assert abs(simulate_rate(j) - analytic) < 1.0


def test_lif_spike_offsets_in_step():
    pop = NefPopulation(np.ones((1, 1)), [1.0], [0.0])
    for _ in range(200):
        if lif_step(pop, np.array([3.0]))[0]:
            assert 0.0 <= pop.spike_offset[0] <= 1e-3
            return
    pytest.fail("neuron never fired")


def test_lif_params_validation():
    with pytest.raises(BadRange):
        LifParams(tau_m=0)
    with pytest.raises(BadRange):
        LifParams(v_reset=1.0, v_thresh=1.0)


def test_build_one_dimensional_encoders_are_signs():
    pop = nef_build(1, 2, seed=4)
    assert set(pop.encoders.ravel().tolist()) <= {-1.0, 1.0}
    assert nef_build(1, seed=0).n_neurons == 100
    assert nef_build(3, seed=0).n_neurons == 300


@pytest.mark.parametrize("seed", range(5))
def test_build_onset_and_max_rate(seed):
    pop = nef_build(2, 50, seed=seed)
    at_intercept = pop.intercepts[:, None] * pop.encoders
    assert np.all(pop.rates(at_intercept).diagonal() == 0.0)
    assert np.allclose(pop.rates(pop.encoders).diagonal(), pop.max_rates, atol=0.5)
    assert np.all((pop.intercepts >= -0.95) & (pop.intercepts <= 0.95))
    assert np.all((pop.max_rates >= 100) & (pop.max_rates <= 200))
    assert np.allclose(np.linalg.norm(pop.encoders, axis=1), 1.0)


def test_build_rejects_bad_ranges():
    with pytest.raises(BadRange):
        nef_build(0)
    with pytest.raises(BadRange):
        nef_build(1, intercept_range=(-1.0, 0.5))
    with pytest.raises(BadRange):
        nef_build(1, max_rate_range=(0.0, 10.0))
    with pytest.raises(BadRange):
        nef_build(1, max_rate_range=(600.0, 600.0))


def test_zero_input_currents_equal_biases():
    pop = nef_build(3, 30, seed=1)
    assert np.array_equal(pop.currents(np.zeros(3)), pop.biases)


def test_encode_step_fires_near_max_rate():
    pop = nef_build(1, 20, seed=2)
    pos = np.flatnonzero(pop.encoders[:, 0] > 0)
    counts = np.zeros(20)
    for k in range(40):
        b = nef_encode_step(pop, ContinuousFrame(k, [1.0]), SimClock(0.05, k))
        b.check(0.05, 20)
        counts += np.bincount(b.neuron_ids, minlength=20)
    emp = counts / 2.0
    assert np.all(np.abs(emp[pos] - pop.max_rates[pos]) <= 1.0)


def test_encode_step_mirror_symmetry():
    base = nef_build(1, 1, seed=7)
    pair = NefPopulation(
        np.array([[1.0], [-1.0]]), np.repeat(base.gains, 2), np.repeat(base.biases, 2)
    )

    def counts(x):
        pair.reset_state()
        c = np.zeros(2)
        for k in range(20):
            b = nef_encode_step(pair, ContinuousFrame(k, [x]), SimClock(0.05, k))
            c += np.bincount(b.neuron_ids, minlength=2)
        return c

    assert counts(0.6).tolist() == counts(-0.6)[::-1].tolist()


def test_encode_step_rejects_misaligned_tick():
    pop = nef_build(1, 5)
    with pytest.raises(ValueError):
        nef_encode_step(pop, ContinuousFrame(0, [0.0]), SimClock(0.0015, 0))


def test_default_reg_convention():
    pop = nef_build(1, 100, seed=0)
    assert default_reg(pop) == pytest.approx((0.1 * pop.max_rates.max()) ** 2)


def test_train_reaches_small_rmse():
    pop = nef_build(1, 100, seed=0)
    phi = nef_train_decoders(pop)
    assert phi.shape == (100, 1)
    assert rmse(pop) <= 0.02


def test_decode_half_from_steady_state_rates():
    pop = nef_build(1, 100, seed=0)
    phi = nef_train_decoders(pop)
    est = nef_decode(pop.rates(np.array([0.5])), phi)[0]
    assert 0.48 <= est <= 0.52


def test_train_large_reg_shrinks_to_zero():
    pop = nef_build(1, 1, seed=3)
    assert np.abs(nef_train_decoders(pop, reg=1e12)).max() < 1e-8


def test_symmetric_pair_decodes_zero_at_zero():
    base = nef_build(1, 1, seed=5)
    pair = NefPopulation(np.array([[1.0], [-1.0]]), np.repeat(base.gains, 2), np.repeat(base.biases, 2))
    grid = default_grid(1)
    phi = nef_train_decoders(pair, grid, reg=100.0)
    # hand-rolled 2x2 normal equations
    a = pair.rates(grid)
    g = a.T @ a + 100.0 * grid.shape[0] * np.eye(2)
    ref = np.linalg.solve(g, a.T @ grid)
    assert np.allclose(phi, ref, rtol=1e-10)
    assert nef_decode(pair.rates(np.zeros(1)), phi)[0] == pytest.approx(0.0, abs=1e-12)


def test_train_matches_lstsq_reference():
    pop = nef_build(2, 40, seed=1)
    grid = default_grid(2, 300)
    reg = 25.0
    phi = nef_train_decoders(pop, grid, reg)
    a = pop.rates(grid)
    aug = np.vstack([a, np.sqrt(reg * grid.shape[0]) * np.eye(40)])
    ref = linalg.lstsq(aug, np.vstack([grid, np.zeros((40, 2))]))[0]
    assert np.allclose(phi, ref, rtol=1e-7, atol=1e-10)


def test_train_singular_raises():
    pop = nef_build(1, 3, seed=0)
    grid = np.full((10, 1), -1.0)
    silent = pop.rates(grid).sum(axis=0) == 0
    if not silent.any():
        pytest.skip("all neurons active at -1 for this seed")
    with pytest.raises(SingularSystem):
        nef_train_decoders(pop, grid, reg=0.0)


def test_decode_examples():
    assert nef_decode(np.zeros(2), [[0.1], [-0.2]]).tolist() == [0.0]
    assert nef_decode([2.0, 3.0], [[0.1], [-0.2]])[0] == pytest.approx(-0.4)
    with pytest.raises(DimensionMismatch):
        nef_decode([1.0], [[0.1], [0.2]])
