import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings

from conftest import N_PROP, gammas, pmfs
from focal_entropy.errors import DomainError
from focal_entropy.focal_scalar import phi, phi_peak
from focal_entropy.minimizer import solve_minimizer
from focal_entropy.pmf import Pmf
from focal_entropy.regime_analysis import (
    D_TOL,
    SCAN_HEADER,
    Tag,
    analyze,
    binary_bounds,
    count_sign_changes,
    entropy_consequences,
    focal_entropy_root,
    gamma_zero,
    limit_diagnostic,
    limit_target,
    phi_roots,
    power_law_q,
    simplex_scan,
    sufficient_conditions,
)

C3_P = np.array([1, 20, 10, 20]) / 51
FIG3_P = [0.182059, 0.462129, 0.355812]
LIMIT_P = [0.4, 0.58, 0.02]


def bisect_gamma0(n_support):
    """Root of log(1 + g) / g = log(N / (N - 1)); the left side falls from 1 to 0."""
    target = math.log(n_support / (n_support - 1))
    lo, hi = 1e-9, 1e6
    for _ in range(300):
        m = 0.5 * (lo + hi)
        if math.log1p(m) / m > target:
            lo = m
        else:
            hi = m
    return 0.5 * (lo + hi)


class TestPhiRoots:
    def test_small_alpha_has_no_lower_root(self):
        r = phi_roots(1.0, 0.8)
        assert r.p_a == 0.0
        assert phi(1.0, r.p_b) == pytest.approx(0.8, rel=1e-10)

    def test_tangency(self):
        pk = phi_peak(2.0)
        r = phi_roots(2.0, pk.phi_max)
        assert r.p_a == pytest.approx(pk.p_plus, abs=1e-9)
        assert r.p_b == pytest.approx(pk.p_plus, abs=1e-9)

    def test_two_roots(self):
        r = phi_roots(2.0, 1.1)
        assert 0 < r.p_a < r.p_plus < r.p_b < 1
        assert phi(2.0, r.p_a) == pytest.approx(1.1, rel=1e-10)
        assert phi(2.0, r.p_b) == pytest.approx(1.1, rel=1e-10)

    def test_rejects(self):
        with pytest.raises(DomainError):
            phi_roots(0.0, 1.0)
        with pytest.raises(DomainError):
            phi_roots(1.0, 5.0)

    def test_counterexample_lower_root(self):
        a = solve_minimizer(0.2, C3_P).alpha_star
        assert phi_roots(0.2, a).p_a > 1 / 51


class TestAnalyze:
    def test_counterexample(self):
        r = analyze(0.2, C3_P)
        ref = [35 / 25449, 35 / 25449, -47 / 16320, 1 / 7854]
        np.testing.assert_allclose(r.d, ref, atol=2e-3)
        assert [np.sign(v) for v in r.d] == [1, 1, -1, 1]
        assert r.over_suppression
        assert r.tags[-1] is Tag.OVER_SUPPRESSED
        assert r.sign_changes == 2

    @pytest.mark.parametrize("n", [2, 3, 8, 20])
    def test_uniform(self, n):
        r = analyze(1.5, Pmf.uniform(n))
        np.testing.assert_allclose(r.d, 0.0, atol=1e-12)
        assert r.sign_changes == 0
        assert not r.over_suppression

    def test_report_json(self):
        d = json.loads(analyze(1.0, FIG3_P).to_json())
        for key in ("d", "p_gamma_a", "p_gamma_b", "alpha_star", "tags", "over_suppression", "sign_changes"):
            assert key in d
        assert set(d["tags"]) <= {t.value for t in Tag}

    def test_rejects(self):
        with pytest.raises(DomainError):
            analyze(0.0, FIG3_P)
        with pytest.raises(DomainError):
            analyze(1.0, [1.0, 0.0])

    def test_sign_change_counter(self):
        assert count_sign_changes([0.1, 0.0, -0.2, 1e-12, 0.3]) == 2
        assert count_sign_changes([1e-11, -1e-11]) == 0

    @settings(max_examples=N_PROP)
    @given(gammas, pmfs(2, 8))
    def test_tags_match_signs(self, g, p):
        r = analyze(g, p)
        assert abs(math.fsum(r.d)) <= 1e-10
        assert 0.0 <= r.p_gamma_a <= r.p_plus <= r.p_gamma_b < 1.0
        for d, tag in zip(r.d, r.tags):
            if tag is Tag.AMPLIFIED:
                assert d < D_TOL
            else:
                assert d > -D_TOL
        uniform = np.ptp(p) == 0.0
        assert r.over_suppression == (not uniform and Tag.OVER_SUPPRESSED in r.tags)

    @settings(max_examples=N_PROP)
    @given(gammas, pmfs(2, 8))
    def test_at_most_two_sign_changes(self, g, p):
        assume(np.ptp(p) > 1e-3)
        assert analyze(g, p).sign_changes in (1, 2)

    def test_binary_sweep(self):
        for p in np.arange(1, 50) / 100:
            for g in np.linspace(0.1, 10, 25):
                r = analyze(g, [1 - p, p])
                assert r.d[0] >= 0 and r.d[1] < 0
                assert not r.over_suppression

    def test_ternary_sweep(self):
        rng = np.random.default_rng(3)
        for p in rng.dirichlet(np.ones(3), size=300):
            p = np.maximum(p, 1e-3)
            for g in (0.2, 1.0, 5.0):
                assert analyze(g, p / p.sum()).d[0] >= -D_TOL


class TestSufficientConditions:
    @pytest.mark.parametrize("n", [2, 3, 4, 10])
    def test_gamma0_matches_bisection(self, n):
        assert gamma_zero(n) == pytest.approx(bisect_gamma0(n), rel=1e-9)

    def test_gamma0_values(self):
        assert gamma_zero(2) == pytest.approx(1.0, rel=1e-12)
        assert gamma_zero(1) == math.inf

    def test_counterexample_consistency(self):
        s = sufficient_conditions(0.2, C3_P)
        assert not s.prop14 and not s.prop15

    def test_uniform_large_gamma(self):
        s = sufficient_conditions(20.0, Pmf.uniform(4))
        assert s.prop14 and s.prop15

    @settings(max_examples=N_PROP)
    @given(gammas, pmfs(2, 8))
    def test_implications(self, g, p):
        s = sufficient_conditions(g, p)
        r = analyze(g, p)
        if s.prop14 or s.prop15:
            assert not r.over_suppression
        if s.prop16:
            assert r.d[0] >= -D_TOL
        if p.min() > r.p_gamma_a:
            assert r.majorizes_flag

    @settings(max_examples=500)
    @given(gammas, pmfs(2, 8))
    def test_entropy_consequences(self, g, p):
        e = entropy_consequences(g, p)
        if e.precondition:
            assert e.entropy_increase and e.kl_decrease

    def test_entropy_consequences_examples(self):
        e = entropy_consequences(1.0, FIG3_P)
        assert e.precondition and e.entropy_increase and e.kl_decrease
        e = entropy_consequences(1.0, Pmf.uniform(3))
        assert e.entropy_increase and e.kl_decrease


class TestBinaryBounds:
    def test_fig9_point(self):
        b = binary_bounds(1.13158, 0.05)
        assert b.q_gamma == pytest.approx(0.06901, abs=1e-4)
        assert b.p_star_1 == pytest.approx(0.17531, abs=1e-4)
        assert b.q_gamma_plus1 == pytest.approx(0.20079, abs=1e-4)

    @pytest.mark.parametrize("g, ref", [(1.13158, 0.175308), (2.42105, 0.277449), (5.0, 0.370787)])
    def test_fig9_optimizer_series(self, g, ref):
        assert binary_bounds(g, 0.05).p_star_1 == pytest.approx(ref, abs=1e-3)

    def test_symmetric(self):
        b = binary_bounds(3.0, 0.5)
        assert b.q_gamma == b.q_gamma_plus1 == 0.5
        assert b.p_star_1 == pytest.approx(0.5, abs=1e-15)

    def test_large_gamma(self):
        # alpha_star ~ 2^-gamma, so gamma much past 1000 leaves the double range
        b = binary_bounds(1000.0, 0.05)
        for v in (b.q_gamma, b.p_star_1, b.q_gamma_plus1):
            assert v == pytest.approx(0.5, abs=1e-3)

    def test_power_law_closed_form(self):
        p, g = 0.2, 1.7
        ref = p ** (1 / g) / (p ** (1 / g) + (1 - p) ** (1 / g))
        assert power_law_q(g, p) == pytest.approx(ref, rel=1e-14)

    def test_rejects(self):
        for p in (0.0, 0.6):
            with pytest.raises(DomainError):
                binary_bounds(1.0, p)

    def test_sweep(self):
        for p in np.arange(1, 51) / 100:
            for g in np.linspace(0.1, 10, 25):
                b = binary_bounds(g, p)
                assert b.q_gamma <= b.p_star_1 + 1e-12
                assert b.p_star_1 <= b.q_gamma_plus1 + 1e-12
                assert b.q_gamma_plus1 - b.q_gamma <= b.gap_bound + 1e-12


class TestLimit:
    @pytest.mark.parametrize("q, ref", [([0.2, 0.02, 0.78], 0.98806), ([0.2, 0.78, 0.02], 0.955345)])
    def test_fig10(self, q, ref):
        assert focal_entropy_root(100.0, LIMIT_P, q) == pytest.approx(ref, abs=1e-4)
        assert limit_target(LIMIT_P, q) == pytest.approx(0.98, abs=1e-15)

    def test_uniform_closed_form(self):
        for g in (0.5, 3.0, 40.0):
            assert focal_entropy_root(g, [0.5, 0.5], [0.5, 0.5]) == pytest.approx(0.5 * math.log(2) ** (1 / g), rel=1e-13)

    @pytest.mark.parametrize("q", [[0.2, 0.02, 0.78], [0.2, 0.78, 0.02]])
    def test_monotone_approach(self, q):
        vals = [v for _, v in limit_diagnostic(LIMIT_P, q, np.logspace(-1, 2, 50))]
        gaps = np.abs(np.asarray(vals) - limit_target(LIMIT_P, q))
        steps = np.diff(vals)
        assert np.all(steps > 0) or np.all(steps < 0)
        assert np.all(np.diff(gaps) < 0)

    def test_rejects_gamma_zero(self):
        with pytest.raises(DomainError):
            focal_entropy_root(0.0, LIMIT_P, LIMIT_P)


class TestScan:
    def test_golden_minimum(self):
        s = simplex_scan(1.0, 60)
        assert not s.failures
        assert len(s.rows) == 59 * 58 // 2
        # minimum sits at the cell with two coordinates on the lattice floor
        assert s.min_gap == pytest.approx(1 / 60, abs=1e-12)
        assert sorted(s.argmin) == pytest.approx([1 / 60, 1 / 60, 58 / 60])
        assert s.min_d1 >= -D_TOL

    def test_uniform_cell(self):
        s = simplex_scan(1.0, 30)
        row = next(r for r in s.rows if r[:3] == (10 / 30, 10 / 30, 10 / 30))
        assert row[5] > 0

    def test_parallel_matches_serial(self):
        a, b = simplex_scan(0.5, 20), simplex_scan(0.5, 20, jobs=2)
        assert a.to_csv() == b.to_csv()

    def test_csv_header(self):
        assert simplex_scan(2.0, 10).to_csv().splitlines()[0] == ",".join(SCAN_HEADER)

    def test_rejects(self):
        with pytest.raises(DomainError):
            simplex_scan(1.0, 9)
        with pytest.raises(DomainError):
            simplex_scan(0.0, 20)
