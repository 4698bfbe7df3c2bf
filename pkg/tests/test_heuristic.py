from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from annealoffsets.dynamics import ExactRunConfig, run_exact
from annealoffsets.generators import ASCParams, gen_asc, gen_wsc, WSCParams
from annealoffsets.heuristic import (NeighborWeights, assign_offsets, effective_field_stats,
                                     frequency_weights_from_samples, heuristic_offsets, neighbor_subset,
                                     search_offsets, snap_ratio)
from annealoffsets.model import build_chimera, chain_edges
from annealoffsets.schedule import OffsetVector, default_bounds, synth_default_schedule
from oracles import brute_avg_abs_field
from strategies import make_instance, small_instances


def _nontrivial(inst):
    return bool(np.any(inst.h) or np.any(inst.J))


class TestEffectiveField:
    def test_isolated_spin(self):
        rep = effective_field_stats(make_instance(1, [0.7], [], []))
        assert rep.avg_abs_field.tolist() == [0.7] and rep.ratios.tolist() == [1.0]

    def test_two_couplings(self):
        inst = make_instance(3, [0, 0, 0], [(0, 1), (1, 2)], [-1.0, -0.5])
        assert effective_field_stats(inst).avg_abs_field[1] == 1.0

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_asc_ratios(self, n):
        b = 2
        inst = gen_asc(ASCParams(n=n, b=b))
        r = effective_field_stats(inst).ratios
        # spin k sits between couplings k-1 and k; light sectors are the odd ones
        sector = np.repeat(np.arange(2 * b + 1), n)
        expect = np.ones(inst.n)
        for k in range(1, inst.n - 1):
            if sector[k - 1] % 2 == 1 and sector[k] % 2 == 1:
                expect[k] = 0.5
        assert r.tolist() == expect.tolist()
        off = assign_offsets(r, 0.1)
        assert set(off.delta.tolist()) == {-0.1, 0.0}

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            effective_field_stats(make_instance(2, [0, 0], [], []))

    def test_degree_cap(self):
        inst = gen_wsc(WSCParams(), 0)
        with pytest.raises(ValueError, match="subset_size"):
            effective_field_stats(inst, max_degree=4)
        effective_field_stats(inst, subset_size=2, max_degree=4)

    @settings(max_examples=60, deadline=None)
    @given(small_instances(max_n=7))
    def test_matches_fraction_oracle(self, inst):
        assume(_nontrivial(inst))
        rep = effective_field_stats(inst)
        exact = [brute_avg_abs_field(inst.h[i], [w for _, w in inst.neighbors[i]]) for i in range(inst.n)]
        assert rep.avg_abs_field.tolist() == [float(f) for f in exact]
        top = max(exact)
        assert rep.ratios.tolist() == [snap_ratio(f / top) for f in exact]
        assert rep.ratios.max() == 1.0

    @settings(max_examples=40, deadline=None)
    @given(small_instances(max_n=7), st.sampled_from([0.1, 0.5, 3.0, 17.0]))
    def test_scaling_covariance(self, inst, alpha):
        assume(_nontrivial(inst))
        a = effective_field_stats(inst)
        b = effective_field_stats(inst.replace(h=alpha * inst.h, J=alpha * inst.J))
        assert b.ratios.tolist() == a.ratios.tolist()
        assert np.allclose(b.avg_abs_field, alpha * a.avg_abs_field, rtol=1e-12)
        assert assign_offsets(b, 0.1).delta.tolist() == assign_offsets(a, 0.1).delta.tolist()

    @settings(max_examples=40, deadline=None)
    @given(small_instances(max_n=7), st.data())
    def test_gauge_invariance(self, inst, data):
        m = np.array(data.draw(st.lists(st.sampled_from([-1, 1]), min_size=inst.n, max_size=inst.n)))
        assume(_nontrivial(inst))
        a = effective_field_stats(inst)
        b = effective_field_stats(inst.gauged(m))
        assert b.avg_abs_field.tolist() == a.avg_abs_field.tolist()

    @settings(max_examples=30, deadline=None)
    @given(small_instances(max_n=7))
    def test_explicit_uniform_weights_identical(self, inst):
        assume(_nontrivial(inst))
        a = effective_field_stats(inst)
        b = effective_field_stats(inst, weights=NeighborWeights.uniform(inst))
        assert b.variant == "weighted"
        assert b.avg_abs_field.tolist() == a.avg_abs_field.tolist()
        assert b.ratios.tolist() == a.ratios.tolist()

    def test_full_subset_reproduces_exact(self):
        g = build_chimera(2, 2)
        inst = make_instance(g.n, np.zeros(g.n), g.edges, np.random.default_rng(0).uniform(-1, 1, len(g.edges)))
        a = effective_field_stats(inst)
        b = effective_field_stats(inst, subset_size=6)
        assert b.avg_abs_field.tolist() == a.avg_abs_field.tolist() and b.variant == "subset(6)"

    def test_subset_selection(self):
        inst = make_instance(4, [0] * 4, [(0, 1), (0, 2), (0, 3)], [0.5, -2.0, 2.0])
        assert [j for j, _ in neighbor_subset(inst, 0, 2)] == [2, 3]
        # ties broken by lower index
        inst = make_instance(4, [0] * 4, [(0, 1), (0, 2), (0, 3)], [1.0, 1.0, 1.0])
        assert [j for j, _ in neighbor_subset(inst, 0, 2)] == [1, 2]

    def test_report_csv(self, tmp_path):
        inst = make_instance(3, [0, 0, 0], chain_edges(3), [-1.0, -0.5])
        rep = effective_field_stats(inst)
        rep.write_csv(tmp_path / "r.csv", assign_offsets(rep, 0.1).delta)
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0].split(",") == ["qubit", "avg_abs_field", "ratio", "delta"]
        assert len(lines) == 4


class TestAssign:
    def test_midpoint(self):
        assert assign_offsets(np.array([0.5]), 0.1).delta.tolist() == [0.0]

    def test_most_coupled_delayed(self):
        assert assign_offsets(np.array([1.0]), 0.05).delta.tolist() == [-0.05]

    def test_clamp(self):
        off = assign_offsets(np.array([0.9]), 0.1, bounds=[[-0.05, 0.05]])
        assert off.delta.tolist() == [-0.05]

    def test_zero_magnitude(self):
        d = assign_offsets(np.array([0.0, 0.3, 1.0]), 0.0).delta
        assert d.tolist() == [0.0, 0.0, 0.0] and not np.any(np.signbit(d))

    @given(st.lists(st.floats(0, 1), min_size=2, max_size=20), st.floats(0.001, 0.3))
    def test_monotone_and_within_bounds(self, r, dmax):
        r = np.array(r)
        d = assign_offsets(r, dmax).delta
        order = np.argsort(r, kind="stable")
        assert np.all(np.diff(d[order]) <= 0)
        assert np.all(np.abs(d) <= 0.15)

    def test_negative_magnitude(self):
        with pytest.raises(ValueError):
            assign_offsets(np.array([0.5]), -0.1)


class TestFrequencyWeights:
    inst = make_instance(3, [0, 0, 0], chain_edges(3), [1.0, 1.0])

    def test_identical_samples(self):
        w = frequency_weights_from_samples(self.inst, np.array([[1, -1, 1]] * 5))
        assert w.weights[1].tolist() == [1.0, 0.0, 0.0, 0.0]
        assert w.weights[0].tolist() == [0.0, 1.0]

    def test_two_configs(self):
        w = frequency_weights_from_samples(self.inst, np.array([[1, 1, 1], [-1, 1, 1]]))
        assert w.weights[1].tolist() == [0.5, 0.5, 0.0, 0.0]

    def test_uniform_samples_concentrate(self):
        x = np.random.default_rng(0).choice([-1, 1], size=(40_000, 3))
        w = frequency_weights_from_samples(self.inst, x)
        assert np.allclose(w.weights[1], 0.25, atol=0.01)

    def test_empty(self):
        with pytest.raises(ValueError):
            frequency_weights_from_samples(self.inst, np.empty((0, 3)))

    def test_ground_state_weights(self):
        # weighting by a single configuration gives |h + sum J s| at that configuration
        inst = make_instance(3, [0.25, 0, 0], chain_edges(3), [1.0, -0.5])
        x = np.array([[1, -1, -1]])
        rep = effective_field_stats(inst, weights=frequency_weights_from_samples(inst, x))
        expect = [abs(Fraction(0.25) - 1), abs(Fraction(1) + Fraction(0.5)), abs(Fraction(0.5))]
        assert rep.avg_abs_field.tolist() == [float(e) for e in expect]


class TestSearch:
    sched = synth_default_schedule(1.0, 1.0)
    cfg = ExactRunConfig(t_ann=1.0, tol=1e-9)

    def test_budget_one_is_baseline(self):
        inst = make_instance(2, [0.3, 0], [(0, 1)], [-1.0])
        res = search_offsets(inst, self.sched, 1, config=self.cfg)
        assert res.offsets.delta.tolist() == [0.0, 0.0]
        assert res.p0 == res.baseline_p0 == run_exact(inst, self.sched, None, self.cfg).p0

    def test_line_search_reevaluates_bit_exact(self):
        inst = make_instance(2, [0, 0], [(0, 1)], [-1.0])
        res = search_offsets(inst, self.sched, 7, config=self.cfg, direction=[1.0, -1.0])
        assert res.evaluations == 7
        for d, _ in res.history:
            assert d[0] == -d[1]
        again = run_exact(inst, self.sched, res.offsets, self.cfg).p0
        assert again == res.p0
        assert res.p0 >= res.baseline_p0

    @pytest.mark.parametrize("strategy", ["grid", "coordinate", "random"])
    def test_never_worse_than_baseline(self, strategy):
        inst = make_instance(3, [-1.0, -0.3, 0.0], chain_edges(3), [-1.0, 0.5])
        res = search_offsets(inst, self.sched, 9, strategy=strategy, config=self.cfg)
        assert res.p0 >= res.baseline_p0 and res.p0 == max(p for _, p in res.history)
        assert res.evaluations <= 9

    def test_unknown_strategy(self):
        inst = make_instance(2, [0.3, 0], [(0, 1)], [-1.0])
        with pytest.raises(ValueError):
            search_offsets(inst, self.sched, 3, strategy="anneal", config=self.cfg)

    def test_heuristic_wrapper(self):
        inst = gen_asc(ASCParams(n=2, b=1))
        off = heuristic_offsets(inst, 0.1, bounds=default_bounds(inst.n))
        assert isinstance(off, OffsetVector) and off.n == inst.n
