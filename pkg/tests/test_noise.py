import math

import numpy as np
import pytest

from multiqf import circuits as qc
from multiqf.errors import ParameterError
from multiqf.noise import NoiseModel, noisy_block, realize_batch, realize_circuit

IDEAL_50_50 = np.array([[2**-0.5, 2**-0.5], [-(2**-0.5), 2**-0.5]])


def test_noiseless_block_is_ideal():
    rng = np.random.default_rng(0)
    blk = noisy_block(0.5, NoiseModel(), rng)
    assert np.abs(blk - IDEAL_50_50).max() < 1e-12


def test_noiseless_block_general_t():
    rng = np.random.default_rng(0)
    blk = noisy_block(0.3, NoiseModel(), rng)
    expect = np.array(
        [[math.sqrt(0.3), math.sqrt(0.7)], [-math.sqrt(0.7), math.sqrt(0.3)]]
    )
    assert np.abs(blk - expect).max() < 1e-12


def test_loss_only_block_scale():
    # the whole block carries the single amplitude constant 10^(dB/20)
    rng = np.random.default_rng(0)
    blk = noisy_block(0.5, NoiseModel(bs_loss_db=-0.2), rng)
    scale = 10.0 ** (-0.2 / 20.0)
    assert scale == pytest.approx(0.97724, abs=1e-5)
    assert np.abs(blk - scale * IDEAL_50_50).max() < 1e-12


def test_block_rejects_bad_t():
    with pytest.raises(ParameterError):
        noisy_block(1.5, NoiseModel(), np.random.default_rng(0))


def test_model_validation():
    with pytest.raises(ParameterError):
        NoiseModel(sigma_t=-0.1)
    with pytest.raises(ParameterError):
        NoiseModel(bs_loss_db=0.4)


@pytest.mark.parametrize("k", [2, 5, 9, 16])
@pytest.mark.parametrize("design", [qc.DESIGN_OPTIMAL, qc.DESIGN_EXTENDABLE])
def test_noiseless_limit_matches_ideal_composition(k, design):
    layout = qc.build_design(k, design)[1]
    real = realize_circuit(layout, NoiseModel(), index=0)
    assert np.abs(real - qc.compose_layout(layout)).max() < 1e-12


def test_noiseless_limit_with_phase_shifters():
    for decompose in (qc.clements_decompose, qc.reck_decompose):
        layout = decompose(qc.dft_multiport(5))
        real = realize_circuit(layout, NoiseModel(), index=3)
        assert np.abs(real - qc.dft_multiport(5)).max() < 1e-12


def test_determinism_same_seed_and_index():
    layout = qc.optimal_tree_layout(6)
    model = NoiseModel(sigma_t=0.01, sigma_p=0.01, bs_loss_db=-0.2, seed=99)
    a = realize_circuit(layout, model, index=4)
    b = realize_circuit(layout, model, index=4)
    assert np.array_equal(a, b)
    c = realize_circuit(layout, model, index=5)
    assert not np.array_equal(a, c)


def test_batch_matches_per_index_calls():
    layout = qc.optimal_tree_layout(4)
    model = NoiseModel(sigma_t=0.02, sigma_p=0.01, bs_loss_db=-0.2, seed=7)
    batch = realize_batch(layout, model, 5)
    assert batch.n_realizations == 5
    for i in range(5):
        assert np.array_equal(batch.matrices[i], realize_circuit(layout, model, index=i))


def test_singular_values_bounded_and_loss_floor():
    layout = qc.optimal_tree_layout(8)
    model = NoiseModel(sigma_t=0.01, sigma_p=0.01, bs_loss_db=-0.2, seed=1)
    depth = layout.optical_depth
    floor = (10.0 ** (-0.2 / 20.0)) ** depth
    for i in range(20):
        s = np.linalg.svd(realize_circuit(layout, model, index=i), compute_uv=False)
        assert s.max() <= 1.0 + 1e-9
        # every input->output path crosses at most `depth` lossy blocks
        assert s.min() >= floor - 1e-9


def test_loss_only_shrinks_any_input():
    layout = qc.optimal_tree_layout(5)
    t = realize_circuit(layout, NoiseModel(bs_loss_db=-0.5), index=0)
    rng = np.random.default_rng(2)
    for _ in range(10):
        a = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        assert np.linalg.norm(t @ a) <= np.linalg.norm(a) + 1e-12


def test_extreme_noise_stays_physical():
    # tau clipping keeps the block well defined even for wild draws
    layout = qc.optimal_tree_layout(4)
    model = NoiseModel(sigma_t=0.8, sigma_p=1.0, seed=3)
    for i in range(50):
        m = realize_circuit(layout, model, index=i)
        assert np.isfinite(m).all()
        assert np.linalg.svd(m, compute_uv=False).max() <= 1.0 + 1e-9


def test_batch_json_export():
    layout = qc.optimal_tree_layout(3)
    batch = realize_batch(layout, NoiseModel(sigma_t=0.01, seed=5), 3)
    import json

    data = json.loads(batch.to_json())
    assert data["n_realizations"] == 3 and data["dim"] == 3
    back = np.asarray(data["re"]) + 1j * np.asarray(data["im"])
    assert np.abs(back - batch.matrices).max() < 1e-15
