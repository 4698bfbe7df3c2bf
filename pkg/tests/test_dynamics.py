import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from annealoffsets.dynamics import (ExactRunConfig, IntegratorError, SamplerProtocol, SuccessEstimate, SVMCConfig,
                                    estimate_success, exact_sampler, run_exact, run_svmc, svmc_batch, svmc_sampler,
                                    wilson_interval)
from annealoffsets.dynamics.exact import TransverseIsingOperator, expm_krylov
from annealoffsets.model import GroundStateSet, chain_edges, enumerate_ground_states
from annealoffsets.schedule import AnnealSchedule, OffsetVector, default_bounds, synth_default_schedule
from oracles import (bernoulli_sampler, brute_ground_states, dense_homogeneous_evolution,
                     dense_linear_offset_evolution, index_of, landau_zener_p_ground)
from strategies import make_instance

LIN = synth_default_schedule(1.0, 1.0)


def _random_instance(n, seed, p=0.5):
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return make_instance(n, rng.uniform(-1, 1, n), edges, rng.uniform(-1, 1, len(edges)))


def _dense_p0(inst, psi):
    _, states = brute_ground_states(inst.n, inst.h.tolist(), inst.edges.tolist(), inst.J.tolist())
    return float(sum(abs(psi[index_of(x)]) ** 2 for x in states))


class TestExactBasics:
    def test_larmor_period(self):
        # H = b h Z with A = 0: |+> turns into |-> after half a period 1/(4 b h) ns
        sched = AnnealSchedule([0.0, 1.0], [0.0, 0.0], [2.0, 2.0])
        inst = make_instance(1, [0.5], [], [])
        for t, p_plus in [(0.25, 0.0), (0.5, 1.0), (0.125, 0.5)]:
            psi = run_exact(inst, sched, None, ExactRunConfig(t_ann=t, tol=1e-12)).psi
            plus = abs(psi[0] + psi[1]) ** 2 / 2
            assert plus == pytest.approx(p_plus, abs=1e-10)

    def test_adiabatic_single_spin(self):
        res = run_exact(make_instance(1, [-1.0], [], []), LIN, None, ExactRunConfig(t_ann=50.0, tol=1e-10))
        assert res.p0 > 0.999
        # bit 0 clear is spin +1
        assert res.probabilities[0] == pytest.approx(res.p0)

    @pytest.mark.parametrize("seed", [0, 1])
    def test_sudden_limit(self, seed):
        inst = _random_instance(5, seed)
        d0 = enumerate_ground_states(inst).degeneracy
        res = run_exact(inst, LIN, None, ExactRunConfig(t_ann=1e-5))
        assert res.p0 == pytest.approx(d0 / 32, abs=1e-6)

    def test_degenerate_ground_states_summed(self):
        inst = make_instance(2, [0, 0], [(0, 1)], [-1.0])
        res = run_exact(inst, LIN, None, ExactRunConfig(t_ann=1e-5))
        assert res.p0 == pytest.approx(0.5, abs=1e-6)

    def test_size_cap(self):
        with pytest.raises(ValueError):
            run_exact(_random_instance(5, 0), LIN, None, ExactRunConfig(max_n=4))

    def test_step_budget(self):
        with pytest.raises(IntegratorError):
            run_exact(_random_instance(4, 0), LIN, None, ExactRunConfig(t_ann=20.0, tol=1e-14, max_steps=64))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ExactRunConfig(t_ann=0.0)
        with pytest.raises(ValueError):
            ExactRunConfig(driver_sign=0)

    def test_krylov_matches_dense_expm(self):
        from scipy.linalg import expm
        inst = _random_instance(4, 3)
        op = TransverseIsingOperator(inst)
        A = np.linspace(0.3, 0.9, 4)
        diag = op.diagonal(np.full(4, 0.7))
        H = op.dense(diag, A)
        v = np.random.default_rng(0).normal(size=16) + 0j
        v /= np.linalg.norm(v)
        got = expm_krylov(op.matvec(diag, A), v, 0.37, 1e-13)
        assert np.allclose(got, expm(-1j * 0.37 * H) @ v, atol=1e-12)


class TestLandauZener:
    @pytest.mark.parametrize("t_ann", [0.05, 0.3, 1.0, 2.5])
    def test_closed_form(self, t_ann):
        A0, B0, h = 1.0, 2.0, -0.4
        sched = synth_default_schedule(A0, B0)
        p_ref, norm = landau_zener_p_ground(A0, B0, h, t_ann)
        assert norm == pytest.approx(1.0, abs=1e-12)
        res = run_exact(make_instance(1, [h], [], []), sched, None, ExactRunConfig(t_ann=t_ann, tol=1e-11))
        assert res.p0 == pytest.approx(p_ref, abs=1e-8)

    def test_oracle_against_ode(self):
        p_ref, _ = landau_zener_p_ground(1.0, 1.0, 0.7, 0.8)
        psi = dense_homogeneous_evolution(1, [0.7], [], [], lambda s: 1 - s, lambda s: s, 0.8)
        assert abs(psi[1]) ** 2 == pytest.approx(p_ref, abs=1e-10)


class TestAgainstDense:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_homogeneous(self, seed):
        inst = _random_instance(5, seed)
        res = run_exact(inst, LIN, None, ExactRunConfig(t_ann=2.0, tol=1e-11))
        psi = dense_homogeneous_evolution(5, inst.h, inst.edges.tolist(), inst.J, lambda s: 1 - s, lambda s: s, 2.0)
        assert abs(res.p0 - _dense_p0(inst, psi)) < 1e-9
        assert res.norm_drift < 1e-8

    @pytest.mark.parametrize("seed", [0, 1])
    def test_with_offsets(self, seed):
        inst = _random_instance(4, seed + 10, p=0.8)
        rng = np.random.default_rng(seed)
        delta = rng.uniform(-0.15, 0.15, 4)
        off = OffsetVector(delta, default_bounds(4))
        res = run_exact(inst, LIN, off, ExactRunConfig(t_ann=2.0, tol=1e-10))
        psi = dense_linear_offset_evolution(4, inst.h, inst.edges.tolist(), inst.J, 1.0, 1.0, delta, 2.0)
        assert abs(res.p0 - _dense_p0(inst, psi)) < 1e-8
        assert np.abs(np.vdot(psi, res.psi)) == pytest.approx(1.0, abs=1e-8)

    def test_driver_sign(self):
        inst = _random_instance(4, 5)
        a = run_exact(inst, LIN, None, ExactRunConfig(t_ann=1.5, tol=1e-11, driver_sign=-1)).p0
        b = run_exact(inst, LIN, None, ExactRunConfig(t_ann=1.5, tol=1e-11, driver_sign=1)).p0
        assert a == pytest.approx(b, abs=1e-10)
        psi = dense_homogeneous_evolution(4, inst.h, inst.edges.tolist(), inst.J, lambda s: 1 - s, lambda s: s, 1.5,
                                          driver_sign=1)
        assert _dense_p0(inst, psi) == pytest.approx(b, abs=1e-9)

    @settings(max_examples=4, deadline=None)
    @given(st.integers(0, 1000), st.lists(st.sampled_from([-1, 1]), min_size=4, max_size=4))
    def test_gauge_equivalence(self, seed, mask):
        inst = _random_instance(4, seed)
        off = OffsetVector(np.random.default_rng(seed).uniform(-0.1, 0.1, 4), default_bounds(4))
        cfg = ExactRunConfig(t_ann=1.0, tol=1e-10)
        a = run_exact(inst, LIN, off, cfg).p0
        b = run_exact(inst.gauged(np.array(mask)), LIN, off, cfg).p0
        assert a == pytest.approx(b, abs=1e-10)


class TestSVMC:
    def test_ferro_chain_aligns(self):
        inst = make_instance(8, [0] * 8, chain_edges(8), [-1.0] * 7)
        aligned = 0
        for seed in range(40):
            x = run_svmc(inst, LIN, None, sweeps=1000, temperature=0.02, seed=seed)
            aligned += abs(int(x.sum())) == 8
        assert aligned > 36

    def test_single_spin_follows_field(self):
        inst = make_instance(1, [-1.0], [], [])
        x = svmc_batch(inst, LIN, None, 200, np.random.default_rng(0), SVMCConfig(500, 0.01))
        assert np.all(x == 1)

    def test_deterministic(self):
        inst = _random_instance(10, 4)
        a = run_svmc(inst, LIN, None, sweeps=200, seed=9)
        b = run_svmc(inst, LIN, None, sweeps=200, seed=9)
        assert np.array_equal(a, b) and set(np.unique(a)) <= {-1, 1}

    def test_offsets_change_dynamics_only_through_coefficients(self):
        inst = _random_instance(6, 2)
        zero = OffsetVector.zeros(6)
        a = svmc_batch(inst, LIN, zero, 20, np.random.default_rng(1))
        b = svmc_batch(inst, LIN, None, 20, np.random.default_rng(1))
        assert np.array_equal(a, b)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SVMCConfig(sweeps=0)


class TestEstimateSuccess:
    inst = make_instance(3, [-1.0, 0.5, -0.25], [], [])
    ref = enumerate_ground_states(inst)

    def test_always_succeeds(self):
        est = estimate_success(bernoulli_sampler(1.0), self.inst, self.ref)
        assert est.runs == 10_000 and est.p_hat == 1.0 and est.solved
        est = estimate_success(bernoulli_sampler(1.0), self.inst, self.ref,
                               SamplerProtocol(stop_within_batch=True))
        assert est.runs == 5 and est.successes == 5

    def test_never_succeeds(self):
        proto = SamplerProtocol(batch_size=1000, max_batches=20)
        est = estimate_success(bernoulli_sampler(0.0), self.inst, self.ref, proto)
        assert est.runs == 20_000 and not est.solved
        assert est.p_hat == 0.0 and est.p_upper == 1 / 20_000

    def test_stops_after_batch_reaching_target(self):
        proto = SamplerProtocol(batch_size=100, gauge_period=10)
        est = estimate_success(bernoulli_sampler(0.02), self.inst, self.ref, proto, seed=3)
        assert est.successes >= 5 and est.runs % 100 == 0
        assert est.p_hat == est.successes / est.runs

    def test_records_stream(self):
        buf = io.StringIO()
        proto = SamplerProtocol(batch_size=50, max_batches=1, gauge_period=20)
        estimate_success(bernoulli_sampler(0.5), self.inst, self.ref, proto, seed=1, records=buf)
        rows = buf.getvalue().splitlines()
        assert rows[0] == "run_index,gauge_id,energy,success" and len(rows) == 51
        gids = [int(r.split(",")[1]) for r in rows[1:]]
        assert gids == [i // 20 for i in range(50)]

    def test_deterministic(self):
        proto = SamplerProtocol(batch_size=500)
        a = estimate_success(bernoulli_sampler(0.003), self.inst, self.ref, proto, seed=7)
        b = estimate_success(bernoulli_sampler(0.003), self.inst, self.ref, proto, seed=7)
        assert a == b

    def test_gauges_undone(self):
        # a sampler that always returns the gauged ground state only succeeds if outputs are un-gauged
        inst = make_instance(4, [0.5, -0.25, 0, 0], chain_edges(4), [1.0, -1.0, 0.5])
        ref = enumerate_ground_states(inst)

        def oracle(instance, k, rng):
            return np.repeat(enumerate_ground_states(instance).states[:1], k, axis=0)

        est = estimate_success(oracle, inst, ref, SamplerProtocol(batch_size=100, gauge_period=10))
        assert est.p_hat == 1.0

    def test_exact_sampler_matches_p0(self):
        inst = make_instance(3, [-0.3, 0.2, 0.1], chain_edges(3), [-1.0, 0.7])
        cfg = ExactRunConfig(t_ann=1.0)
        p0 = run_exact(inst, LIN, None, cfg).p0
        est = estimate_success(exact_sampler(LIN, None, cfg), inst, enumerate_ground_states(inst),
                               SamplerProtocol(batch_size=20_000, max_batches=1, gauge_period=5_000), seed=0)
        assert est.ci_low <= p0 <= est.ci_high

    def test_svmc_sampler_runs(self):
        inst = make_instance(4, [0] * 4, chain_edges(4), [-1.0] * 3)
        est = estimate_success(svmc_sampler(LIN, None, SVMCConfig(200)), inst, enumerate_ground_states(inst),
                               SamplerProtocol(batch_size=50, max_batches=2, gauge_period=25))
        assert est.solved

    def test_empty_reference(self):
        with pytest.raises(ValueError):
            estimate_success(bernoulli_sampler(1.0), self.inst, GroundStateSet(0.0, np.empty((0, 3), np.int8), True))


class TestWilson:
    @pytest.mark.parametrize("k,n", [(5, 100), (0, 50), (1, 1), (37, 40)])
    def test_score_equation_roots(self, k, n):
        # the bounds solve (k/n - p)^2 = z^2 p (1 - p) / n
        z2 = 1.959963984540054 ** 2
        ph = k / n
        roots = np.sort(np.roots([1 + z2 / n, -(2 * ph + z2 / n), ph * ph]).real)
        lo, hi = wilson_interval(k, n)
        assert lo == pytest.approx(max(0.0, roots[0]), abs=1e-12)
        assert hi == pytest.approx(min(1.0, roots[1]), abs=1e-12)

    @given(st.integers(1, 10_000), st.data())
    def test_contains_estimate(self, runs, data):
        k = data.draw(st.integers(0, runs))
        est = SuccessEstimate.from_counts(k, runs)
        assert 0 <= est.ci_low <= est.p_hat <= est.ci_high <= 1

    def test_roundtrip(self):
        est = SuccessEstimate.from_counts(3, 700)
        assert SuccessEstimate.from_dict(est.to_dict()) == est

    def test_protocol_defaults(self):
        p = SamplerProtocol()
        assert (p.batch_size, p.max_batches, p.stop_successes, p.gauge_period) == (10_000, 1_000, 5, 1_000)
        assert p.max_runs == 10_000_000
