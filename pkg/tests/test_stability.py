import math

import numpy as np
import pytest

import ordered_capacity as oc
from ordered_capacity import Allocation, GammaArrivals, OverflowChain
from ordered_capacity.errors import NoRootError


class TestMaxFirstRate:
    def test_poisson_closed_form(self):
        # x = mu - lam L0(x) solves to (mu-lam+sqrt((mu-lam)(mu+3lam)))/2
        m1 = oc.max_first_rate(GammaArrivals(0.2, 1.0), 1.0)
        closed = 0.5 * (0.8 + math.sqrt(0.8 * 1.6))
        assert m1 == pytest.approx(closed, rel=1e-10)

    def test_residual_below_tolerance(self):
        model = GammaArrivals(0.37, 1.8)
        m1 = oc.max_first_rate(model, 1.0)
        assert abs(m1 - 1.0 + model.lam * float(model.lst(m1))) < 1e-10

    def test_vanishing_arrivals_gives_full_capacity(self):
        m1 = oc.max_first_rate(GammaArrivals(1e-9, 1.0), 1.0)
        assert m1 == pytest.approx(1.0, abs=1e-6)

    def test_overloaded_system_has_no_root(self):
        with pytest.raises(NoRootError):
            oc.max_first_rate(GammaArrivals(1.2, 1.0), 1.0)


class TestIsFeasible:
    def test_boundary_first_rate(self):
        model = GammaArrivals(0.2, 1.0)
        m1 = oc.max_first_rate(model, 1.0)
        bad = OverflowChain(model, Allocation([m1 + 1e-6], total=1.0))
        report = oc.is_feasible(bad, 1)
        assert report.verdict == "infeasible" and report.violation_level == 1
        good = OverflowChain(model, Allocation([m1 - 1e-6], total=1.0))
        assert oc.is_feasible(good, 1).verdict == "feasible"

    def test_geometric_half_share_feasible(self):
        model = GammaArrivals(0.2, 1.0)
        alloc = oc.geometric_allocation(0.5, 1.0, 10)
        report = oc.is_feasible(OverflowChain(model, alloc), 10)
        assert report.verdict == "feasible"
        assert report.feasible_up_to == 10
        assert all(m < 0 for m in report.margins)

    def test_all_capacity_on_first_server(self):
        model = GammaArrivals(0.2, 1.0)
        chain = OverflowChain(model, Allocation([1.0], total=1.0))
        report = oc.is_feasible(chain, 1)
        assert report.verdict == "infeasible" and report.violation_level == 1

    def test_violations_persist_at_deeper_levels(self):
        # once the effective arrival rate outruns remaining capacity it stays ahead
        model = GammaArrivals(0.4, 1.0)
        m1 = oc.max_first_rate(model, 1.0)
        alloc = Allocation([m1 * 1.02] + [0.001] * 7, total=1.0, monotone=False)
        report = oc.is_feasible(OverflowChain(model, alloc), 8)
        assert report.verdict == "infeasible"
        first = report.violation_level
        assert all(m >= 0 for m in report.margins[first - 1:])


class TestFeasibleConstruction:
    def test_output_is_feasible_and_non_increasing(self):
        model = GammaArrivals(0.3, 2.0)
        alloc = oc.feasible_construction(model, 1.0, 0.6, 8)
        assert alloc.is_non_increasing()
        report = oc.is_feasible(OverflowChain(model, alloc), 8)
        assert report.verdict == "feasible"

    def test_first_level_is_alpha_m1(self):
        model = GammaArrivals(0.2, 1.0)
        alloc = oc.feasible_construction(model, 1.0, 0.5, 1)
        assert alloc.rates[0] == pytest.approx(0.482843, abs=1e-6)

    def test_alpha_domain(self):
        with pytest.raises(ValueError):
            oc.feasible_construction(GammaArrivals(0.2, 1.0), 1.0, 1.2, 3)

    def test_strict_margins(self):
        model = GammaArrivals(0.5, 0.5)
        alloc = oc.feasible_construction(model, 1.0, 0.7, 6)
        report = oc.is_feasible(OverflowChain(model, alloc), 6)
        assert all(m < -1e-12 for m in report.margins)


class TestFiniteDelayDiagnostics:
    def test_slow_tail_plausible(self):
        model = GammaArrivals(0.2, 1.0)
        alloc = oc.geometric_allocation(0.5, 1.0, 10)  # ratio 0.5 vs ell ~ 0.25
        fd = oc.finite_delay_diagnostics(OverflowChain(model, alloc), 10)
        assert fd.verdict == "fd-plausible"
        assert fd.tail_decay_ratio == pytest.approx(0.5)
        assert len(fd.summand_partial_sums) > 0

    def test_fast_tail_implausible(self):
        model = GammaArrivals(0.5, 1.0)
        alloc = oc.geometric_allocation(0.9, 1.0, 10)  # ratio 0.1, ell near 1
        fd = oc.finite_delay_diagnostics(OverflowChain(model, alloc), 10)
        assert fd.verdict == "fd-implausible"

    def test_tap_solution_plausible(self):
        model = GammaArrivals(0.2, 1.0)
        alloc = oc.tap_solution(0.25, 1.0, 12)
        fd = oc.finite_delay_diagnostics(OverflowChain(model, alloc), 12)
        assert fd.verdict == "fd-plausible"
