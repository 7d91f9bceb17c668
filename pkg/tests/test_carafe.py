import numpy as np
import pytest

from cswin_seg.carafe import (
    KernelPredictorParams,
    ReassemblyKernelField,
    UpsampleConfig,
    carafe_upsample,
    predict_kernels,
    reassemble,
    source_index,
)
from cswin_seg.errors import ConfigError, DimensionError
from cswin_seg.gradcheck import check_gradients
from cswin_seg.tensor import Tensor, tsum

from oracles import reassemble_naive


class TestSourceIndex:
    def test_floor_division(self):
        assert source_index((3, 5), 2) == (1, 2)

    def test_identity_ratio(self):
        for pos in [(0, 0), (3, 4), (7, 7)]:
            assert source_index(pos, 1) == pos

    def test_exhaustive_against_floor(self):
        for sigma in (1, 2, 4):
            for ip in range(8 * sigma):
                for jp in range(8 * sigma):
                    got = source_index((ip, jp), sigma, extents=(8, 8))
                    assert got == (int(np.floor(ip / sigma)), int(np.floor(jp / sigma)))

    def test_out_of_range(self):
        with pytest.raises(DimensionError):
            source_index((16, 0), 2, extents=(8, 8))


class TestConfig:
    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigError):
            UpsampleConfig(sigma=2, k_up=4)

    def test_zero_ratio_rejected(self):
        with pytest.raises(ConfigError):
            UpsampleConfig(sigma=0)


class TestPredictKernels:
    def test_kernels_are_probability_vectors(self):
        rng = np.random.default_rng(0)
        cfg = UpsampleConfig(sigma=2, k_up=5, c_mid=8)
        params = KernelPredictorParams.create(rng, 8, cfg, dtype="f64")
        x = Tensor(rng.uniform(-1, 1, (4, 4, 8)), dtype="f64")
        field = predict_kernels(x, params, cfg)
        assert field.weights.shape == (8, 8, 25)
        np.testing.assert_allclose(field.weights.data.sum(axis=-1), 1.0, atol=1e-6)
        assert (field.weights.data >= 0).all()

    def test_zero_encoder_gives_uniform_kernels(self):
        rng = np.random.default_rng(1)
        cfg = UpsampleConfig(sigma=2, k_up=3, c_mid=4)
        params = KernelPredictorParams.create(rng, 6, cfg, dtype="f64")
        params.enc_w.data[:] = 0.0
        params.enc_b.data[:] = 0.0
        x = Tensor(rng.uniform(-1, 1, (3, 3, 6)), dtype="f64")
        field = predict_kernels(x, params, cfg)
        np.testing.assert_allclose(field.weights.data, 1.0 / 9.0, atol=1e-12)

    def test_single_kernel_traced_by_hand(self):
        # recompute the kernel of output pixel (5, 3) through the conv chain
        rng = np.random.default_rng(2)
        cfg = UpsampleConfig(sigma=2, k_up=5, c_mid=8)
        params = KernelPredictorParams.create(rng, 8, cfg, dtype="f64")
        x = rng.uniform(-1, 1, (4, 4, 8))
        field = predict_kernels(Tensor(x, dtype="f64"), params, cfg)

        ip, jp = 5, 3
        i, j, di, dj = ip // 2, jp // 2, ip % 2, jp % 2
        comp = np.zeros((4, 4, 8))
        for a in range(4):
            for b in range(4):
                comp[a, b] = x[a, b] @ params.comp_w.data[0, 0] + params.comp_b.data
        logit = np.zeros(25)
        for ki in range(3):
            for kj in range(3):
                si, sj = i + ki - 1, j + kj - 1
                if 0 <= si < 4 and 0 <= sj < 4:
                    sl = (di * 2 + dj) * 25
                    logit += comp[si, sj] @ params.enc_w.data[ki, kj, :, sl : sl + 25]
        logit += params.enc_b.data[(di * 2 + dj) * 25 : (di * 2 + dj) * 25 + 25]
        want = np.exp(logit - logit.max())
        want /= want.sum()
        np.testing.assert_allclose(field.weights.data[ip, jp], want, atol=1e-6)


class TestReassemble:
    def _delta_field(self, h, w, sigma, k):
        f = np.zeros((sigma * h, sigma * w, k * k))
        f[:, :, (k // 2) * k + k // 2] = 1.0
        return ReassemblyKernelField(Tensor(f, dtype="f64"))

    def test_delta_kernels_give_nearest_neighbor(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(-1, 1, (5, 4, 3))
        cfg = UpsampleConfig(sigma=2, k_up=3)
        out = reassemble(Tensor(x, dtype="f64"), self._delta_field(5, 4, 2, 3), cfg)
        want = np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)
        np.testing.assert_array_equal(out.data, want)

    def test_uniform_kernels_on_constant_input(self):
        cfg = UpsampleConfig(sigma=2, k_up=3)
        x = Tensor(np.full((4, 4, 2), 3.0), dtype="f64")
        f = ReassemblyKernelField(Tensor(np.full((8, 8, 9), 1.0 / 9.0), dtype="f64"))
        out = reassemble(x, f, cfg)
        np.testing.assert_allclose(out.data[2:-2, 2:-2, :], 3.0, atol=1e-12)

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(4)
        cfg = UpsampleConfig(sigma=2, k_up=3)
        x = rng.uniform(-1, 1, (5, 5, 3))
        raw = rng.uniform(0, 1, (10, 10, 9))
        f = raw / raw.sum(axis=-1, keepdims=True)
        got = reassemble(Tensor(x, dtype="f64"), ReassemblyKernelField(Tensor(f, dtype="f64")), cfg)
        np.testing.assert_allclose(got.data, reassemble_naive(x, f, 2, 3), atol=1e-6)

    def test_convex_hull_bound_interior(self):
        rng = np.random.default_rng(5)
        cfg = UpsampleConfig(sigma=2, k_up=3)
        params = KernelPredictorParams.create(rng, 4, cfg, dtype="f64")
        x = rng.uniform(-1, 1, (6, 6, 4))
        out = carafe_upsample(Tensor(x, dtype="f64"), params, cfg).data
        r = 1
        for ip in range(2 * r, 12 - 2 * r):
            for jp in range(2 * r, 12 - 2 * r):
                i, j = ip // 2, jp // 2
                hood = x[i - r : i + r + 1, j - r : j + r + 1, :]
                assert (out[ip, jp] <= hood.max(axis=(0, 1)) + 1e-9).all()
                assert (out[ip, jp] >= hood.min(axis=(0, 1)) - 1e-9).all()

    def test_shape_law(self):
        rng = np.random.default_rng(6)
        for sigma in (1, 2, 4):
            cfg = UpsampleConfig(sigma=sigma, k_up=3, c_mid=4)
            params = KernelPredictorParams.create(rng, 5, cfg, dtype="f64")
            x = Tensor(rng.uniform(-1, 1, (3, 4, 5)), dtype="f64")
            assert carafe_upsample(x, params, cfg).shape == (3 * sigma, 4 * sigma, 5)

    def test_field_shape_mismatch(self):
        cfg = UpsampleConfig(sigma=2, k_up=3)
        with pytest.raises(DimensionError):
            reassemble(Tensor(np.zeros((4, 4, 2))), ReassemblyKernelField(Tensor(np.zeros((4, 4, 9)))), cfg)


class TestGradients:
    def test_end_to_end_gradcheck(self):
        rng = np.random.default_rng(7)
        cfg = UpsampleConfig(sigma=2, k_up=3, c_mid=3)
        params = KernelPredictorParams.create(rng, 4, cfg, dtype="f64")
        x = Tensor(rng.uniform(-1, 1, (3, 3, 4)), dtype="f64", requires_grad=True)
        # O(0.1)-scale probe loss keeps central-difference round-off below
        # the 1e-8 relative-error floor
        weights = Tensor(rng.uniform(-1, 1, (6, 6, 4)) / 144.0, dtype="f64")
        named = [("x", x)] + list(params.named("up"))
        check_gradients(lambda: tsum(carafe_upsample(x, params, cfg) * weights), named, tol=1e-4)
