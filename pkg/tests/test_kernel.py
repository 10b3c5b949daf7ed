import numpy as np
import pytest

import harvestmc as hm


@pytest.fixture(scope="module")
def controls():
    return hm.ControlSet.from_range(-2, 3, 0.5)


@pytest.fixture(scope="module")
def baseline_kernel(verhulst2, gen_sym, controls):
    return hm.build_baseline(verhulst2, gen_sym, hm.Grid1D(h=0.1, B=4.0),
                             controls)


class TestGridsAndControls:
    def test_grid_states(self):
        g = hm.Grid1D(h=0.5, B=2.0)
        np.testing.assert_array_equal(g.states, [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_grid_requires_integral_bound(self):
        with pytest.raises(hm.InvalidParams):
            hm.Grid1D(h=0.3, B=4.0)

    def test_periodic_axis_excludes_period_end(self):
        g = hm.Grid2D(h1=0.25, h2=0.5, bound1=1.0, bound2=2.0, periodic1=True)
        np.testing.assert_array_equal(g.axis1, [0.0, 0.25, 0.5, 0.75])

    def test_controls_default_range(self):
        cs = hm.ControlSet.from_range(-2, 3, 1 / 500)
        assert cs.n == 2501
        assert cs.values[0] == -2.0 and cs.values[-1] == 3.0
        assert 0.0 in cs.values

    def test_controls_must_contain_zero(self):
        with pytest.raises(hm.InvalidParams):
            hm.ControlSet(np.array([0.5, 1.0]))
        with pytest.raises(hm.InvalidParams):
            hm.ControlSet.from_range(1.0, 3.0, 0.5)


class TestBaselineKernel:
    def test_row_example(self, baseline_kernel, controls):
        # x = 1, u = 0, h = 0.1: the denominator is
        # sigma^2 + h|b - u| - h^2 q_kk + h = 1 + 0.1 + 0.001 + 0.1 = 1.201
        j = int(np.flatnonzero(controls.values == 0.0)[0])
        r = 10 * 2 + 0
        k = baseline_kernel
        assert k.probs[r, j, 0] == pytest.approx(0.6 / 1.201, abs=1e-15)
        assert k.probs[r, j, 1] == pytest.approx(0.5 / 1.201, abs=1e-15)
        assert k.probs[r, j, 2] == pytest.approx(0.1 / 1.201, abs=1e-15)
        assert k.probs[r, j, 4] == pytest.approx(0.001 / 1.201, abs=1e-15)
        assert k.dt[r, j] == pytest.approx(0.01 / 1.201, abs=1e-15)

    def test_row_sums(self, baseline_kernel):
        sums = baseline_kernel.row_sums()[baseline_kernel.admissible]
        assert np.max(np.abs(sums - 1.0)) <= 1e-12

    def test_origin_admissibility(self, baseline_kernel, controls):
        adm = baseline_kernel.admissible[:2]
        assert np.array_equal(adm[0], controls.values <= 0.0)
        assert np.array_equal(adm[1], controls.values <= 0.0)

    def test_drift_matched_control_has_no_spatial_moves(self, gen_sym):
        # sigma = 0 and u = b: all mass sits on the self and switch slots
        m = hm.catalog("custom", drift=lambda t, x, a: np.ones_like(np.asarray(x, dtype=float)),
                       diffusion=lambda t, x, a: np.zeros_like(np.asarray(x, dtype=float)),
                       regimes=2)
        cs = hm.ControlSet(np.array([0.0, 1.0]))
        k = hm.build_baseline(m, gen_sym, hm.Grid1D(h=0.1, B=1.0), cs)
        r, j = 5 * 2, 1            # interior x, u = 1 = b
        assert k.probs[r, j, 0] == 0.0 and k.probs[r, j, 1] == 0.0
        assert k.probs[r, j, 2] + k.probs[r, j, 3:].sum() == pytest.approx(1.0)

    def test_empty_admissible_set(self, gen_sym):
        # diffusion positive at the origin leaves no admissible control there
        m = hm.catalog("custom", drift=lambda t, x, a: 0.0 * np.asarray(x),
                       diffusion=lambda t, x, a: np.ones_like(np.asarray(x, dtype=float)),
                       regimes=2)
        with pytest.raises(hm.EmptyAdmissibleSet):
            hm.build_baseline(m, gen_sym, hm.Grid1D(h=0.1, B=1.0),
                              hm.ControlSet.from_range(-1, 1, 0.5))

    def test_reflection_at_top(self, baseline_kernel):
        r = 40 * 2
        up_targets = baseline_kernel.targets[r, :, 0]
        assert np.all(up_targets == r)

    def test_interpolation_interval_bounded_by_mesh(self, verhulst2, gen_sym,
                                                    controls):
        # Q_h >= h, so dt = h^2/Q_h <= h and sup dt vanishes with the mesh
        for h in (0.1, 0.05):
            k = hm.build_baseline(verhulst2, gen_sym, hm.Grid1D(h=h, B=4.0),
                                  controls)
            assert k.dt.max() <= h + 1e-15


@pytest.fixture(scope="module")
def kernels(verhulst2, gen_sym, controls):
    grid = hm.Grid1D(h=0.1, B=4.0)
    return (hm.build_baseline(verhulst2, gen_sym, grid, controls),
            hm.build_variable_effort(verhulst2, gen_sym, grid, controls))


class TestVariableEffortKernel:
    def test_origin_rows_control_independent(self, kernels):
        _, kv = kernels
        for r in (0, 1):
            assert np.all(kv.admissible[r])
            np.testing.assert_array_equal(
                kv.probs[r], np.broadcast_to(kv.probs[r][0],
                                             kv.probs[r].shape))

    def test_matches_baseline_at_unit_population(self, kernels):
        kb, kv = kernels
        r = 10 * 2
        np.testing.assert_allclose(kv.probs[r], kb.probs[r], atol=1e-15)
        np.testing.assert_allclose(kv.dt[r], kb.dt[r], atol=1e-18)

    def test_effort_scaling_identity(self, kernels, controls):
        # u x with x = 2, u = 0.5 equals the baseline row with u = 1
        kb, kv = kernels
        j_half = int(np.flatnonzero(controls.values == 0.5)[0])
        j_one = int(np.flatnonzero(controls.values == 1.0)[0])
        r = 20 * 2
        np.testing.assert_allclose(kv.probs[r, j_half], kb.probs[r, j_one],
                                   atol=1e-15)


@pytest.fixture(scope="module")
def sp_kernel(verhulst2, gen_sym, controls):
    pd = hm.catalog_price_dynamics("logistic", cap=0.4, noise=0.5)
    grid = hm.Grid2D(h1=0.1, h2=0.1, bound1=0.4, bound2=4.0)
    return hm.build_stochastic_price(verhulst2, gen_sym, pd, grid,
                                     controls), pd


class TestStochasticPriceKernel:
    def test_price_move_example(self, sp_kernel, controls):
        # phi = 0.2: b0 = 0.04, sigma0 = 0.02; x = 1, u = 0
        k, _ = sp_kernel
        j = int(np.flatnonzero(controls.values == 0.0)[0])
        r = (2 * 41 + 10) * 2
        qh = 1.0 + 0.1 * 1.0 + 0.0004 + 0.1 * 0.04 + 0.001 + 0.1
        assert k.probs[r, j, 3] == pytest.approx((0.0002 + 0.004) / qh,
                                                 rel=1e-12)

    def test_row_sums_and_admissibility(self, sp_kernel):
        k, _ = sp_kernel
        sums = k.row_sums()[k.admissible]
        assert np.max(np.abs(sums - 1.0)) <= 1e-12

    def test_no_price_moves_at_phi_boundaries(self, sp_kernel, controls):
        k, _ = sp_kernel
        j = int(np.flatnonzero(controls.values == 0.0)[0])
        r0 = (0 * 41 + 10) * 2          # phi = 0
        assert k.probs[r0, j, 3] == 0.0 and k.probs[r0, j, 4] == 0.0
        rt = (4 * 41 + 10) * 2          # phi = 0.4
        assert k.probs[rt, j, 3] == 0.0 and k.probs[rt, j, 4] == 0.0

    def test_frozen_price_reduces_to_baseline(self, verhulst2, gen_sym,
                                              controls):
        zero = lambda p, a: 0.0 * np.asarray(p)
        pd0 = hm.catalog_price_dynamics("custom", drift0=zero, diffusion0=zero,
                                        phi_max=0.4)
        grid = hm.Grid2D(h1=0.1, h2=0.1, bound1=0.4, bound2=4.0)
        ks = hm.build_stochastic_price(verhulst2, gen_sym, pd0, grid, controls)
        kb = hm.build_baseline(verhulst2, gen_sym, hm.Grid1D(h=0.1, B=4.0),
                               controls)
        r2, r1 = (2 * 41 + 10) * 2, 10 * 2
        np.testing.assert_allclose(ks.probs[r2, :, :3], kb.probs[r1, :, :3],
                                   atol=1e-15)
        np.testing.assert_allclose(ks.dt[r2], kb.dt[r1], atol=1e-18)

    def test_requires_common_mesh(self, verhulst2, gen_sym, controls):
        pd = hm.catalog_price_dynamics("logistic")
        with pytest.raises(hm.InvalidParams):
            hm.build_stochastic_price(
                verhulst2, gen_sym, pd,
                hm.Grid2D(h1=0.2, h2=0.1, bound1=0.4, bound2=4.0), controls)


@pytest.fixture(scope="module")
def seasonal():
    return hm.catalog("seasonal_verhulst", mu=(3, 2), kappa=2, sigma=1,
                      period=1.0)


class TestPeriodicKernel:
    def test_up_probability_example(self, seasonal, gen_sym):
        grid = hm.Grid2D(h1=1 / 4000, h2=0.02, bound1=1.0, bound2=1.2,
                         periodic1=True)
        cs = hm.ControlSet.from_range(-1, 2, 0.05)
        k = hm.build_periodic(seasonal, gen_sym, grid, cs)
        pup, _, _, _ = k.slice_probs(0)
        j = int(np.flatnonzero(cs.values == 0.0)[0])
        assert pup[50, 0, j] == pytest.approx(0.325, abs=1e-15)

    def test_row_sums_are_one_by_construction(self, seasonal, gen_sym):
        grid = hm.Grid2D(h1=1 / 1000, h2=0.05, bound1=1.0, bound2=1.2,
                         periodic1=True)
        cs = hm.ControlSet.from_range(-1, 2, 0.25)
        k = hm.build_periodic(seasonal, gen_sym, grid, cs)
        for s in (0, 250, 999):
            pup, pdn, psw, pself = k.slice_probs(s)
            total = pup + pdn + psw.sum(axis=2) + pself
            assert np.max(np.abs(total - 1.0)) <= 1e-12
            assert pself.min() >= -1e-12

    def test_cfl_violation_details(self, seasonal, gen_sym):
        grid = hm.Grid2D(h1=10 / 4000, h2=0.02, bound1=1.0, bound2=1.2,
                         periodic1=True)
        cs = hm.ControlSet.from_range(-1, 2, 0.05)
        with pytest.raises(hm.CflViolation) as exc:
            hm.build_periodic(seasonal, gen_sym, grid, cs)
        e = exc.value
        assert e.h1_max is not None and e.h1_max < 10 / 4000
        assert e.x is not None and e.gamma is not None
        assert e.regime in (1, 2) and e.control is not None

    def test_needs_periodic_model_and_grid(self, verhulst2, gen_sym, seasonal):
        cs = hm.ControlSet.from_range(-1, 1, 0.5)
        with pytest.raises(hm.InvalidParams):
            hm.build_periodic(verhulst2, gen_sym,
                              hm.Grid2D(1 / 100, 0.1, 1.0, 1.0, True), cs)
        with pytest.raises(hm.InvalidParams):
            hm.build_periodic(seasonal, gen_sym,
                              hm.Grid2D(1 / 100, 0.1, 1.0, 1.0, False), cs)


class TestConsistency:
    def test_baseline_consistency(self, baseline_kernel, verhulst2, gen_sym):
        rep = hm.consistency_check(baseline_kernel, verhulst2, gen_sym)
        assert rep.passed
        assert rep.max_row_sum_error <= 1e-12
        assert rep.max_first_moment_error <= 1e-12
        assert rep.max_switch_error <= 1e-12
        assert rep.max_variance_bound_ratio <= 1.0

    def test_variance_rate_halves(self, verhulst2, gen_sym, controls):
        rates = []
        for h in (0.1, 0.05):
            k = hm.build_baseline(verhulst2, gen_sym, hm.Grid1D(h=h, B=4.0),
                                  controls)
            rates.append(hm.consistency_check(k, verhulst2, gen_sym)
                         .max_variance_rate)
        ratio = rates[1] / rates[0]
        assert 0.4 <= ratio <= 0.6

    def test_periodic_consistency(self, gen_sym):
        m = hm.catalog("seasonal_verhulst", mu=(3, 2), kappa=2, sigma=1,
                       period=1.0)
        grid = hm.Grid2D(h1=1 / 2000, h2=0.05, bound1=1.0, bound2=1.2,
                         periodic1=True)
        k = hm.build_periodic(m, gen_sym, grid,
                              hm.ControlSet.from_range(-1, 2, 0.25))
        rep = hm.consistency_check(k, m, gen_sym)
        assert rep.passed
        assert rep.max_first_moment_error <= 1e-12


def test_kernel_dump_format(tmp_path, verhulst2, gen_sym):
    k = hm.build_baseline(verhulst2, gen_sym, hm.Grid1D(h=1.0, B=2.0),
                          hm.ControlSet(np.array([-1.0, 0.0, 1.0])))
    out = tmp_path / "dump.txt"
    hm.dump_rows(k, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "formulation,coords,regime,control,dt,transitions"
    row = lines[1].split(",")
    assert row[0] == "baseline"
    entries = row[5].split(";")
    probs = [float(e.split(":")[-1]) for e in entries]
    assert sum(probs) == pytest.approx(1.0, abs=1e-12)
