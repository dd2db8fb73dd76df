import numpy as np
import pytest

from rpg_lab.nn import (
    ArchSpec,
    BackwardWithoutForwardError,
    ParamVector,
    PolicyNet,
    ValueNet,
    Var,
    backward,
    gather_grads,
    gru_cell,
    load_checkpoint,
    orthogonal,
    sample_categorical,
    save_checkpoint,
)
from rpg_lab.nn import autodiff as ad


class TestLayerGradients:
    """Each layer type in isolation, many random seeds, 1e-4 relative tolerance."""

    def test_linear(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            x = rng.standard_normal((3, 4))
            W = Var(rng.standard_normal((4, 2)))
            b = Var(rng.standard_normal(2))
            out = ad.vsum(ad.square(Var(x) @ W + b))
            backward(out)

            def loss_at(Wd, bd):
                return float(np.sum((x @ Wd + bd) ** 2))

            h = 1e-6
            for idx in np.ndindex(4, 2):
                Wp, Wm = W.data.copy(), W.data.copy()
                Wp[idx] += h
                Wm[idx] -= h
                num = (loss_at(Wp, b.data) - loss_at(Wm, b.data)) / (2 * h)
                assert W.grad[idx] == pytest.approx(num, rel=1e-4, abs=1e-7)
            for j in range(2):
                bp, bm = b.data.copy(), b.data.copy()
                bp[j] += h
                bm[j] -= h
                num = (loss_at(W.data, bp) - loss_at(W.data, bm)) / (2 * h)
                assert b.grad[j] == pytest.approx(num, rel=1e-4, abs=1e-7)

    @pytest.mark.parametrize("op", [ad.tanh, ad.relu, ad.sigmoid, ad.exp, ad.square])
    def test_elementwise(self, op):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            x = Var(rng.standard_normal((2, 3)) * 0.8 + 0.1)
            loss = ad.vsum(ad.square(op(x)))
            backward(loss)
            h = 1e-6
            for idx in np.ndindex(2, 3):
                xp, xm = x.data.copy(), x.data.copy()
                xp[idx] += h
                xm[idx] -= h
                num = (
                    float(np.sum(op(Var(xp)).data ** 2)) - float(np.sum(op(Var(xm)).data ** 2))
                ) / (2 * h)
                assert x.grad[idx] == pytest.approx(num, rel=1e-4, abs=1e-7)

    def test_log_softmax_with_action_pick(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            logits = Var(rng.standard_normal((4, 3)) * 2)
            idx = rng.integers(0, 3, size=4)
            loss = ad.vmean(ad.take_rows(ad.log_softmax(logits), idx))
            backward(loss)
            h = 1e-6
            for pos in np.ndindex(4, 3):
                def val(arr):
                    shifted = arr - arr.max(axis=1, keepdims=True)
                    lp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
                    return float(lp[np.arange(4), idx].mean())
                ap, am = logits.data.copy(), logits.data.copy()
                ap[pos] += h
                am[pos] -= h
                num = (val(ap) - val(am)) / (2 * h)
                assert logits.grad[pos] == pytest.approx(num, rel=1e-4, abs=1e-8)

    def test_gru_cell(self):
        dim = 3
        for seed in range(100):
            rng = np.random.default_rng(seed)
            names = ["gru.Wz", "gru.Uz", "gru.bz", "gru.Wr", "gru.Ur", "gru.br",
                     "gru.Wn", "gru.Un", "gru.bn", "gru.bnh"]
            arrays = {}
            for n in names:
                arrays[n] = rng.standard_normal((dim, dim)) if ".W" in n or ".U" in n else rng.standard_normal(dim)
            params = ParamVector(arrays)
            x = rng.standard_normal((2, dim))
            h0 = rng.standard_normal((2, dim))

            def loss_of(flat):
                pv = params.copy()
                pv.flat[:] = flat
                leaves = {n: Var(pv.view(n)) for n in pv.names}
                out = gru_cell(leaves, "", Var(x), Var(h0))
                return ad.vsum(ad.square(out)), leaves

            loss, leaves = loss_of(params.flat)
            backward(loss)
            grad = gather_grads(params, leaves)
            h = 1e-6
            for i in range(0, params.size, 7):  # probe a spread of coordinates
                fp, fm = params.flat.copy(), params.flat.copy()
                fp[i] += h
                fm[i] -= h
                num = (float(loss_of(fp)[0].data) - float(loss_of(fm)[0].data)) / (2 * h)
                assert grad[i] == pytest.approx(num, rel=1e-4, abs=1e-7)

    def test_value_head(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            net = ValueNet(joint_obs_dim=4, n_heads=3)
            params = net.init_params(seed)
            obs = rng.standard_normal((5, 4))
            heads = rng.integers(0, 3, size=5)
            target = rng.standard_normal(5)

            def loss_of(flat):
                pv = params.copy()
                pv.flat[:] = flat
                leaves = net.leaves(pv)
                v, _ = net.head_values(leaves, obs, heads)
                return ad.vmean(ad.square(v - Var(target))), (pv, leaves)

            loss, (pv, leaves) = loss_of(params.flat)
            backward(loss)
            grad = gather_grads(pv, leaves)
            h = 1e-6
            for i in range(0, params.size, 97):
                fp, fm = params.flat.copy(), params.flat.copy()
                fp[i] += h
                fm[i] -= h
                num = (float(loss_of(fp)[0].data) - float(loss_of(fm)[0].data)) / (2 * h)
                assert grad[i] == pytest.approx(num, rel=1e-4, abs=1e-7)


class TestPolicyNet:
    def test_zero_weights_give_uniform_distribution(self):
        net = PolicyNet(obs_dim=6, n_actions=4)
        params = net.init_params(seed=0)
        params.flat[:] = 0.0
        probs, _ = net.distribution(params, np.random.default_rng(0).standard_normal((3, 6)))
        assert np.allclose(probs, 0.25)

    def test_forward_deterministic(self):
        net = PolicyNet(obs_dim=5, n_actions=3, recurrent=True)
        params = net.init_params(seed=1)
        obs = np.random.default_rng(2).standard_normal((4, 5))
        state = net.init_state(4)
        p1, s1 = net.distribution(params, obs, state)
        p2, s2 = net.distribution(params, obs, state)
        assert np.array_equal(p1, p2)
        assert np.array_equal(s1, s2)

    def test_distribution_normalized_and_finite(self):
        net = PolicyNet(obs_dim=5, n_actions=3)
        params = net.init_params(seed=3)
        probs, _ = net.distribution(params, np.random.default_rng(1).standard_normal((7, 5)) * 10)
        assert np.all(np.isfinite(probs))
        assert np.allclose(probs.sum(axis=1), 1.0)

    def test_log_prob_gradient_matches_finite_difference(self):
        net = PolicyNet(obs_dim=3, n_actions=2)
        params = net.init_params(seed=4)
        rng = np.random.default_rng(5)
        obs = rng.standard_normal((6, 3))
        actions = rng.integers(0, 2, size=6)

        def loss_of(flat):
            pv = params.copy()
            pv.flat[:] = flat
            leaves = net.leaves(pv)
            lp, _ = net.log_probs(leaves, obs)
            return ad.vmean(ad.take_rows(lp, actions)), (pv, leaves)

        loss, (pv, leaves) = loss_of(params.flat)
        backward(loss)
        grad = gather_grads(pv, leaves)
        h = 1e-6
        checked = 0
        for i in range(0, params.size, 131):
            fp, fm = params.flat.copy(), params.flat.copy()
            fp[i] += h
            fm[i] -= h
            num = (float(loss_of(fp)[0].data) - float(loss_of(fm)[0].data)) / (2 * h)
            if abs(num) > 1e-5:  # below this, central-difference noise dominates
                assert grad[i] == pytest.approx(num, rel=1e-4)
                checked += 1
            else:
                assert grad[i] == pytest.approx(num, abs=1e-5)
        assert checked > 3

    def test_shape_mismatch_rejected(self):
        net = PolicyNet(obs_dim=4, n_actions=2)
        params = net.init_params(seed=0)
        with pytest.raises(ValueError, match="obs dim"):
            net.distribution(params, np.zeros((2, 5)))


class TestValueNet:
    def test_zero_weights_give_zero(self):
        net = ValueNet(joint_obs_dim=8, n_heads=2)
        params = net.init_params(seed=0)
        params.flat[:] = 0.0
        v, _ = net.predict(params, np.ones((3, 8)), head=1)
        assert np.allclose(v, 0.0)

    def test_heads_are_independent(self):
        net = ValueNet(joint_obs_dim=4, n_heads=3)
        params = net.init_params(seed=1)
        obs = np.random.default_rng(0).standard_normal((5, 4))
        before = [net.predict(params, obs, head=k)[0].copy() for k in range(3)]
        out_w = params.view("vf.out.W")
        out_w[:, 1] += 0.5  # perturb only head 1
        params.view("vf.out.b")[1] -= 0.2
        after = [net.predict(params, obs, head=k)[0] for k in range(3)]
        assert not np.allclose(before[1], after[1])
        assert np.array_equal(before[0], after[0])
        assert np.array_equal(before[2], after[2])

    def test_invalid_head_rejected(self):
        net = ValueNet(joint_obs_dim=4, n_heads=2)
        params = net.init_params(seed=0)
        with pytest.raises(IndexError):
            net.predict(params, np.zeros((1, 4)), head=2)


class TestBackward:
    def test_sum_of_params_gives_ones(self):
        p = Var(np.random.default_rng(0).standard_normal(7))
        loss = ad.vsum(p)
        backward(loss)
        assert np.array_equal(p.grad, np.ones(7))

    def test_quadratic_gives_identity(self):
        p = Var(np.random.default_rng(1).standard_normal(5))
        loss = ad.mul(ad.vsum(ad.square(p)), 0.5)
        backward(loss)
        assert np.allclose(p.grad, p.data, rtol=1e-12)

    def test_backward_without_forward_raises(self):
        with pytest.raises(BackwardWithoutForwardError):
            backward(Var(np.asarray(1.0)))

    def test_non_scalar_loss_rejected(self):
        x = Var(np.zeros(3))
        with pytest.raises(ValueError, match="scalar"):
            backward(ad.square(x))

    def test_reused_subexpression_accumulates(self):
        x = Var(np.asarray(2.0))
        y = ad.mul(x, x)  # x^2: dy/dx = 4
        loss = ad.vsum(ad.add(y, y))  # 2x^2: d/dx = 8
        backward(loss)
        assert x.grad == pytest.approx(8.0)


class TestChunkedRecurrence:
    def test_chunked_unroll_matches_monolithic_with_recomputed_states(self):
        net = PolicyNet(obs_dim=4, n_actions=3, recurrent=True)
        params = net.init_params(seed=0)
        rng = np.random.default_rng(1)
        T, B, M = 20, 5, 5
        obs = rng.standard_normal((T, B, 4))
        leaves = net.leaves(params)

        outputs, states = net.forward_sequence(leaves, obs, net.init_state(B))
        mono_logits = np.stack([o.data for o in outputs])
        mono_states = [net.init_state(B)] + [s.data for s in states]

        for start in range(0, T, M):
            h0 = mono_states[start]  # chunk-start hidden state from the monolithic pass
            chunk_out, _ = net.forward_sequence(leaves, obs[start : start + M], h0)
            chunk_logits = np.stack([o.data for o in chunk_out])
            assert np.allclose(chunk_logits, mono_logits[start : start + M], atol=1e-12)


class TestParamVector:
    def test_pack_unpack_round_trip(self):
        rng = np.random.default_rng(0)
        arrays = {"a.W": rng.standard_normal((3, 4)), "a.b": rng.standard_normal(4)}
        p = ParamVector(arrays)
        q = ParamVector.pack(p.unpack())
        assert p == q

    def test_views_alias_flat_storage(self):
        p = ParamVector({"x": np.zeros((2, 2))})
        p.view("x")[0, 0] = 5.0
        assert p.flat[0] == 5.0

    def test_hash_tracks_content(self):
        p = ParamVector({"x": np.arange(4.0)})
        h1 = p.sha256()
        p.flat[0] += 1
        assert p.sha256() != h1

    def test_unknown_name(self):
        p = ParamVector({"x": np.zeros(2)})
        with pytest.raises(KeyError):
            p.view("y")


class TestOrthogonal:
    def test_orthonormal_columns(self):
        rng = np.random.default_rng(0)
        w = orthogonal(rng, (8, 4), gain=1.0)
        assert np.allclose(w.T @ w, np.eye(4), atol=1e-10)

    def test_gain_scales(self):
        rng = np.random.default_rng(0)
        w = orthogonal(rng, (6, 6), gain=0.01)
        assert np.allclose(w.T @ w, 1e-4 * np.eye(6), atol=1e-12)


class TestSampling:
    def test_sample_matches_probabilities(self):
        rng = np.random.default_rng(0)
        probs = np.tile([0.1, 0.2, 0.7], (20000, 1))
        acts = sample_categorical(probs, rng)
        freq = np.bincount(acts, minlength=3) / len(acts)
        assert np.allclose(freq, [0.1, 0.2, 0.7], atol=0.02)

    def test_deterministic_under_seed(self):
        probs = np.random.default_rng(1).dirichlet(np.ones(4), size=100)
        a = sample_categorical(probs, np.random.default_rng(7))
        b = sample_categorical(probs, np.random.default_rng(7))
        assert np.array_equal(a, b)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        net = PolicyNet(obs_dim=3, n_actions=2)
        params = net.init_params(seed=0)
        rng = np.random.default_rng(5)
        opt = {"t": 12, "m": rng.standard_normal(params.size), "v": np.abs(rng.standard_normal(params.size))}
        arch = ArchSpec(obs_dim=3, joint_obs_dim=6, n_actions=2).to_dict()
        path = tmp_path / "ckpt.npz"
        save_checkpoint(
            path,
            arch=arch,
            params={"policy0": params},
            optimizer={"policy0": opt},
            rng_state=np.random.default_rng(9).bit_generator.state,
            extra={"update": 3},
        )
        loaded = load_checkpoint(path)
        assert loaded["arch"] == arch
        assert loaded["params"]["policy0"] == params
        assert loaded["optimizer"]["policy0"]["t"] == 12
        assert np.array_equal(loaded["optimizer"]["policy0"]["m"], opt["m"])
        assert loaded["extra"]["update"] == 3
        gen = np.random.Generator(np.random.PCG64())
        gen.bit_generator.state = loaded["rng_state"]
        assert gen.random() == np.random.default_rng(9).random()

    def test_unknown_version_rejected(self, tmp_path):
        import json

        path = tmp_path / "bad.npz"
        meta = {"version": "other"}
        np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8))
        with pytest.raises(ValueError, match="version"):
            load_checkpoint(path)
