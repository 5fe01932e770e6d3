import numpy as np
import pytest

from hbfkit import autodiff as ad
from hbfkit.autodiff import grad_check
from hbfkit.linalg import AnalogPrecoder, Codebook
from hbfkit.network import (HeadOutputs, Network, NetworkSpec, load_checkpoint,
                            predict_fdp, predict_hybrid, save_checkpoint)
from hbfkit.rand import rng_stream

from conftest import random_complex

TINY = NetworkSpec(variant="afp_net", n_t=4, n_rf=2, n_u=2, k_ss=3,
                   codebook_size=4, trunk_widths=(8, 8))


def tiny_codebook(rng, n_t=4, n_rf=2, size=4):
    seen, out = set(), []
    while len(out) < size:
        ap = AnalogPrecoder(rng.integers(0, 4, size=(n_t, n_rf), dtype=np.uint8))
        if ap.key() not in seen:
            seen.add(ap.key())
            out.append(ap)
    return Codebook(tuple(out))


class TestSpec:
    def test_widths(self):
        assert TINY.input_width == 6
        assert TINY.regression_width == 2 * 2 * 4
        hbf = NetworkSpec(variant="hbf_net", n_t=4, n_rf=2, n_u=2, k_ss=3,
                          codebook_size=4)
        assert hbf.regression_width == 2 * 2 * 2

    def test_bad_variant(self):
        with pytest.raises(ValueError):
            NetworkSpec(variant="mlp", n_t=4, n_rf=2, n_u=2, k_ss=3, codebook_size=4)

    def test_spec_hash_stable(self):
        assert TINY.spec_hash() == TINY.spec_hash()


class TestForward:
    def test_softmax_head_and_shapes(self, rng):
        net = Network(TINY, rng_stream(0, "net"))
        out = net.forward(rng.random((5, 6)))
        assert out.p.data.shape == (5, 4)
        assert np.allclose(out.p.data.sum(axis=1), 1.0, atol=1e-6)
        assert np.all(out.p.data > 0)
        assert out.regression.data.shape == (5, 16)

    def test_eval_deterministic(self, rng):
        net = Network(TINY, rng_stream(0, "net"))
        x = rng.random((4, 6))
        a = net.forward(x).p.data
        b = net.forward(x).p.data
        assert np.array_equal(a, b)

    def test_width_mismatch(self, rng):
        net = Network(TINY, rng_stream(0, "net"))
        with pytest.raises(ValueError, match="width"):
            net.forward(rng.random((4, 5)))

    def test_train_mode_needs_rng_for_dropout(self, rng):
        spec = NetworkSpec(variant="afp_net", n_t=4, n_rf=2, n_u=2, k_ss=3,
                           codebook_size=4, trunk_widths=(8,), dropout_keep=0.9)
        net = Network(spec, rng_stream(0, "net"))
        with pytest.raises(ValueError, match="rng"):
            net.forward(rng.random((4, 6)), train=True)

    def test_conv_front_shapes(self, rng):
        spec = NetworkSpec(variant="afp_net", n_t=4, n_rf=2, n_u=2, k_ss=5,
                           codebook_size=4, trunk_widths=(8,), conv_channels=3)
        net = Network(spec, rng_stream(1, "conv"))
        out = net.forward(rng.random((2, 10)))
        assert out.p.data.shape == (2, 4)

    def test_batchnorm_running_stats_move_in_train(self, rng):
        net = Network(TINY, rng_stream(0, "net"))
        before = net.running["bn0/mean"].copy()
        net.forward(rng.random((16, 6)) + 3.0, train=True,
                    rng=rng_stream(0, "drop"))
        assert not np.allclose(net.running["bn0/mean"], before)


class TestLayerGradients:
    """Every layer type passes finite-difference checks through a scalar head."""

    def _check(self, spec, rng, train=False):
        net = Network(spec, rng_stream(7, "gc"))
        x = rng.random((4, spec.input_width))

        def build():
            out = net.forward(x, train=train,
                              rng=rng_stream(3, "gc-drop") if train else None)
            return ad.tsum(out.p * out.p) + ad.tmean(out.regression * out.regression)

        leaves = list(net.params.values())
        return grad_check(build, leaves, max_coords=6, rng=np.random.default_rng(0))

    def test_dense_bn_lrelu_softmax_eval(self, rng):
        assert self._check(TINY, rng) < 1e-4

    def test_train_mode_batch_stats_and_dropout(self, rng):
        spec = NetworkSpec(variant="afp_net", n_t=4, n_rf=2, n_u=2, k_ss=3,
                           codebook_size=4, trunk_widths=(8, 8), dropout_keep=0.9)
        assert self._check(spec, rng, train=True) < 1e-4

    def test_conv_layer(self, rng):
        spec = NetworkSpec(variant="afp_net", n_t=4, n_rf=2, n_u=2, k_ss=4,
                           codebook_size=4, trunk_widths=(8,), conv_channels=2)
        assert self._check(spec, rng) < 1e-4


class TestPredict:
    def test_argmax_tie_breaks_low_index(self):
        p = np.array([[0.25, 0.25, 0.25, 0.25]])
        assert np.argmax(p, axis=1)[0] == 0

    def test_afp_prediction_normalized(self, rng):
        net = Network(TINY, rng_stream(2, "net"))
        cb = tiny_codebook(rng)
        picks, precoders = predict_hybrid(net, rng.random((3, 6)), cb)
        assert picks.shape == (3,)
        for l, w in zip(picks, precoders):
            eff = cb[int(l)].matrix @ w
            norms = np.linalg.norm(eff, axis=0)
            served = np.linalg.norm(w, axis=0) > 0
            assert np.allclose(norms[served], 1.0, atol=1e-9)

    def test_hbf_prediction_uses_head_directly(self, rng):
        spec = NetworkSpec(variant="hbf_net", n_t=4, n_rf=2, n_u=2, k_ss=3,
                           codebook_size=4, trunk_widths=(8, 8))
        net = Network(spec, rng_stream(2, "net"))
        cb = tiny_codebook(rng)
        x = rng.random((2, 6))
        picks, precoders = predict_hybrid(net, x, cb)
        out = net.forward(x)
        re, im = net.regression_to_complex(out.regression)
        raw = re.data + 1j * im.data
        from hbfkit.linalg import normalize_hybrid
        for i, (l, w) in enumerate(zip(picks, precoders)):
            expected = normalize_hybrid(cb[int(l)], raw[i], skip_zero=True)
            assert np.allclose(w, expected)

    def test_afp_pinv_identity_recovers_representable_w(self, rng):
        # if U = A_l W exactly (columns unit norm), prediction under codeword l
        # reproduces W up to column scaling
        cb = tiny_codebook(rng)
        w_true = random_complex(rng, 2, 2)
        u = cb[1].matrix @ w_true
        u = u / np.linalg.norm(u, axis=0)
        pinvs = cb.pinvs()
        w_hat = pinvs[1] @ u
        recon = cb[1].matrix @ w_hat
        assert np.allclose(recon, u, atol=1e-10)

    def test_predict_fdp_unit_columns(self, rng):
        net = Network(TINY, rng_stream(4, "net"))
        u_all = predict_fdp(net, rng.random((3, 6)))
        assert u_all.shape == (3, 4, 2)
        assert np.allclose(np.linalg.norm(u_all, axis=1), 1.0, atol=1e-9)


class TestCheckpoint:
    def test_round_trip(self, tmp_path, rng):
        net = Network(TINY, rng_stream(5, "net"))
        x = rng.random((3, 6))
        baseline = net.forward(x).p.data
        path = tmp_path / "model.npz"
        save_checkpoint(path, net, extra={"dataset_hash": "abc"},
                        optimizer={"adam_m:trunk0/w": np.zeros((6, 8))})
        loaded, meta, opt = load_checkpoint(path)
        assert meta["extra"]["dataset_hash"] == "abc"
        assert meta["spec_hash"] == TINY.spec_hash()
        assert "adam_m:trunk0/w" in opt
        assert np.array_equal(loaded.forward(x).p.data, baseline)
