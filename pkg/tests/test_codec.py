"""Encoder/decoder pipeline tests: layer decomposition, power scaling,
dithered-quantization statistics."""

import numpy as np
import pytest

from airsum.codec import (
    EncoderConfig,
    EncodingRangeError,
    aggregate_and_finalize,
    decode_layer,
    decompose_layers,
    denormalize,
    encode_device,
    encode_devices,
    min_layers_required,
    normalize,
)
from airsum.lattice import (
    HEX_SECOND_MOMENT,
    LatticeSpec,
    NestedLatticeChain,
    nearest_points,
    sample_dither,
)


def make_cfg(delta=1.0, rho=3, num_layers=2, power=1.0):
    chain = NestedLatticeChain(
        base=LatticeSpec.hexagonal(delta), rho=rho, num_layers=num_layers
    )
    return EncoderConfig(chain=chain, power=power)


class TestNormalizeMap:
    def test_identity_values(self):
        cfg = make_cfg()
        np.testing.assert_array_equal(normalize(np.array([0.3, -0.7]), cfg), [0.3, -0.7])
        np.testing.assert_array_equal(normalize(np.array([1.0, 1.0]), cfg), [1.0, 1.0])

    def test_round_trip(self):
        cfg = make_cfg()
        pts = np.random.default_rng(3).uniform(-1, 1, size=(10**3, 2))
        np.testing.assert_array_equal(denormalize(normalize(pts, cfg), cfg), pts)

    def test_rejects_unknown_map(self):
        with pytest.raises(ValueError):
            EncoderConfig(chain=make_cfg().chain, map_kind="tanh")


class TestMinLayers:
    def test_fine_lattice_needs_eight(self):
        # 3^7 * 0.0005 = 1.09 fails, 3^8 * 0.0005 = 3.28 covers sqrt(2).
        assert min_layers_required(LatticeSpec.hexagonal(0.001), 3, np.sqrt(2.0)) == 8

    def test_already_inside_clamps_to_one(self):
        assert min_layers_required(LatticeSpec.hexagonal(1.0), 2, 0.4) == 1

    def test_mid_resolution(self):
        # 3^5 * 0.005 = 1.215 fails, 3^6 * 0.005 = 3.645 covers sqrt(2).
        assert min_layers_required(LatticeSpec.hexagonal(0.01), 3, np.sqrt(2.0)) == 6

    def test_rejects_bad_bound(self):
        with pytest.raises(ValueError):
            min_layers_required(LatticeSpec.hexagonal(1.0), 3, -1.0)


class TestEncoderConfig:
    def test_alpha_formula(self):
        cfg = make_cfg(delta=1.0, rho=3, power=1.0)
        assert cfg.r2 == pytest.approx(np.sqrt(3.0))
        assert cfg.alpha == pytest.approx(np.sqrt(2.0) / np.sqrt(3.0))

    def test_layer_gain(self):
        cfg = make_cfg(rho=3, num_layers=3)
        assert cfg.layer_gain(2) == pytest.approx(cfg.alpha / 3.0)
        assert cfg.layer_gain(3) == pytest.approx(cfg.alpha / 9.0)

    def test_rejects_bad_power(self):
        with pytest.raises(ValueError):
            EncoderConfig(chain=make_cfg().chain, power=0.0)


class TestDecomposition:
    def test_known_two_layer_split(self):
        # x = (4, 0) at delta=1, rho=3 splits into (1, 0) + (3, 0): the coarse
        # quantization of (4, 0) to 3*Lambda_1 is (3, 0) by enumeration.
        cfg = make_cfg(delta=1.0, rho=3, num_layers=2)
        comps = decompose_layers(cfg.chain, np.array([[4.0, 0.0]]))
        np.testing.assert_allclose(comps[0, 0], [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(comps[1, 0], [3.0, 0.0], atol=1e-12)

    def test_components_sum_back(self):
        cfg = make_cfg(delta=0.5, rho=3, num_layers=4)
        rng = np.random.default_rng(11)
        x = nearest_points(cfg.chain.base, rng.uniform(-2, 2, size=(500, 2)))
        comps = decompose_layers(cfg.chain, x)
        np.testing.assert_allclose(comps.sum(axis=0), x, atol=1e-12)

    def test_components_live_in_layer_constellation(self):
        cfg = make_cfg(delta=1.0, rho=3, num_layers=3)
        rng = np.random.default_rng(12)
        x = nearest_points(cfg.chain.base, rng.uniform(-5, 5, size=(200, 2)))
        comps = decompose_layers(cfg.chain, x)
        for layer in range(1, 4):
            pts = comps[layer - 1]
            # Member of Lambda_layer...
            g = cfg.chain.layer_lattice(layer).generator
            z = np.linalg.solve(g, pts.T).T
            assert np.all(np.abs(z - np.rint(z)) < 1e-9)
            # ...and quantizes to zero against Lambda_{layer+1} (tie-broken cell).
            q = nearest_points(cfg.chain.layer_lattice(layer + 1), pts)
            np.testing.assert_allclose(q, 0.0, atol=1e-9)

    def test_out_of_range_raises(self):
        cfg = make_cfg(delta=1.0, rho=2, num_layers=1)
        with pytest.raises(EncodingRangeError):
            decompose_layers(cfg.chain, np.array([[40.0, 0.0]]))


class TestEncodeDevice:
    def test_zero_input_zero_dither(self):
        cfg = make_cfg()
        cw = encode_device(
            np.zeros(2), cfg, np.random.default_rng(0), dither=np.zeros(2)
        )
        np.testing.assert_array_equal(cw.x_quantized, [0.0, 0.0])
        np.testing.assert_array_equal(cw.layer_components, 0.0)
        np.testing.assert_array_equal(cw.tx_symbols, 0.0)

    def test_forced_decomposition_and_unit_alpha_scaling(self):
        # power = r2^2 / 2 makes alpha = 1, so tx = comps / rho^(l-1).
        cfg = make_cfg(delta=1.0, rho=3, num_layers=2, power=1.5)
        assert cfg.alpha == pytest.approx(1.0)
        comps = decompose_layers(cfg.chain, np.array([[4.0, 0.0]]))
        gains = np.array([cfg.layer_gain(1), cfg.layer_gain(2)])
        tx = gains[:, None, None] * comps
        np.testing.assert_allclose(tx[0, 0], [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(tx[1, 0], [1.0, 0.0], atol=1e-12)

    def test_quantizer_identity(self):
        cfg = make_cfg(delta=0.25, rho=3, num_layers=3)
        rng = np.random.default_rng(4)
        u = rng.uniform(-1, 1, size=2)
        d = sample_dither(cfg.chain.base, rng)
        cw = encode_device(u, cfg, rng, dither=d, device_id=3)
        expected = nearest_points(cfg.chain.base, (u + d).reshape(1, 2))[0]
        np.testing.assert_array_equal(cw.x_quantized, expected)
        assert cw.device_id == 3

    def test_out_of_range_names_device(self):
        cfg = make_cfg(delta=1.0, rho=2, num_layers=1)
        with pytest.raises(EncodingRangeError, match="device 7"):
            encode_device(
                np.array([40.0, 0.0]), cfg, np.random.default_rng(0),
                dither=np.zeros(2), device_id=7,
            )

    def test_power_bound(self):
        cfg = make_cfg(delta=0.01, rho=3, num_layers=6, power=1.0)
        rng = np.random.default_rng(9)
        _, _, tx, _ = encode_devices(rng.uniform(-1, 1, size=(300, 2)), cfg, rng)
        assert np.all(np.sum(tx**2, axis=-1) <= 2.0 * cfg.power + 1e-12)

    def test_common_constellation_shape(self):
        # Each layer's possible tx set is the layer-1 set: comps / rho^(l-1)
        # all live in the same alpha-scaled base constellation.
        from airsum.lattice import coset_constellation

        cfg = make_cfg(delta=1.0, rho=3, num_layers=3, power=1.0)
        rng = np.random.default_rng(10)
        _, _, tx, _ = encode_devices(rng.uniform(-5, 5, size=(400, 2)), cfg, rng)
        base_pts = {
            tuple(np.round(cfg.alpha * p, 9))
            for p in coset_constellation(cfg.chain, 1).points
        }
        for layer in range(1, 4):
            seen = {tuple(np.round(p, 9)) for p in tx[layer - 1]}
            assert seen <= base_pts
            assert max(np.linalg.norm(p) for p in tx[layer - 1]) <= cfg.alpha * cfg.r2 + 1e-9


class TestDecodeLayer:
    def test_noiseless_sum_exact(self):
        cfg = make_cfg(delta=0.5, rho=3, num_layers=3)
        rng = np.random.default_rng(21)
        _, comps, tx, _ = encode_devices(rng.uniform(-1, 1, size=(5, 2)), cfg, rng)
        for layer in range(1, 4):
            y = tx[layer - 1].sum(axis=0)
            s = decode_layer(y, cfg, layer)
            np.testing.assert_allclose(s, comps[layer - 1].sum(axis=0), atol=1e-9)

    def test_sub_inradius_noise_is_absorbed(self):
        cfg = make_cfg(delta=1.0, rho=3, num_layers=2, power=1.0)
        rng = np.random.default_rng(22)
        _, comps, tx, _ = encode_devices(rng.uniform(-1, 1, size=(3, 2)), cfg, rng)
        y = tx[0].sum(axis=0)
        r_in = cfg.alpha * 0.5  # inradius of the alpha-scaled unit hexagonal
        noise = 0.9 * r_in * np.array([np.cos(0.3), np.sin(0.3)])
        s = decode_layer(y + noise, cfg, 1)
        np.testing.assert_allclose(s, comps[0].sum(axis=0), atol=1e-9)

    def test_unit_alpha_quantization(self):
        cfg = make_cfg(delta=1.0, rho=3, num_layers=2, power=1.5)  # alpha = 1
        s = decode_layer(np.array([0.6, 0.0]), cfg, 1)
        np.testing.assert_allclose(s, [1.0, 0.0], atol=1e-12)

    def test_layer_output_in_layer_lattice(self):
        cfg = make_cfg(delta=0.5, rho=3, num_layers=3)
        s = decode_layer(np.array([[0.3, 0.1], [0.9, -0.2]]), cfg, 3)
        g = cfg.chain.layer_lattice(3).generator
        z = np.linalg.solve(g, s.T).T
        assert np.all(np.abs(z - np.rint(z)) < 1e-9)


class TestAggregate:
    def test_zero_everything(self):
        cfg = make_cfg(num_layers=2)
        out = aggregate_and_finalize(np.zeros((2, 2)), np.zeros((4, 2)), cfg)
        np.testing.assert_array_equal(out, [0.0, 0.0])

    def test_layer_count_mismatch(self):
        cfg = make_cfg(num_layers=2)
        with pytest.raises(ValueError):
            aggregate_and_finalize(np.zeros((3, 2)), np.zeros((4, 2)), cfg)

    def test_single_device_noiseless_error_is_voronoi_bounded(self):
        cfg = make_cfg(delta=0.25, rho=3, num_layers=3)
        rng = np.random.default_rng(31)
        u = rng.uniform(-1, 1, size=(1, 2))
        x, comps, _, dithers = encode_devices(u, cfg, rng)
        per_layer = comps[:, 0, :]
        out = aggregate_and_finalize(per_layer, dithers, cfg)
        err = out - u[0]
        # e = Q(v + d) - d - v is the fold of -(v + d) into the Voronoi cell.
        cov = 0.25 / np.sqrt(3.0)
        assert np.linalg.norm(err) <= cov + 1e-9

    def test_noiseless_k20_mse_matches_quantization_floor(self):
        # Noiseless sum of K dithered quantization errors: per-dim MSE should
        # land on K * sigma^2(Lambda_1) = 20 * 5 * delta^2 / 72.
        delta, k, trials = 0.001, 20, 10**4
        cfg = make_cfg(delta=delta, rho=3, num_layers=8)
        rng = np.random.default_rng(42)
        v = rng.uniform(-1, 1, size=(trials * k, 2))
        d = sample_dither(cfg.chain.base, rng, size=trials * k)
        x = nearest_points(cfg.chain.base, v + d)
        err = (x - d - v).reshape(trials, k, 2).sum(axis=1)
        mse = np.mean(np.sum(err**2, axis=1)) / 2.0
        assert mse == pytest.approx(k * HEX_SECOND_MOMENT * delta**2, rel=0.05)

    def test_dithered_error_variance(self):
        # Per-device noiseless error has per-dim variance sigma^2(Lambda_1).
        cfg = make_cfg(delta=1.0, rho=3, num_layers=4)
        rng = np.random.default_rng(43)
        v = rng.uniform(-1, 1, size=(10**5, 2))
        d = sample_dither(cfg.chain.base, rng, size=10**5)
        err = nearest_points(cfg.chain.base, v + d) - d - v
        per_dim = np.mean(np.sum(err**2, axis=1)) / 2.0
        assert per_dim == pytest.approx(HEX_SECOND_MOMENT, rel=0.03)
