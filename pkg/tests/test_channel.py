import io
import math

import numpy as np
import pytest

from thzreach.channel import (
    DB_PER_NEPER,
    SPEED_OF_LIGHT,
    AbsorptionTable,
    OutageError,
    PathGain,
    SpectralWindow,
    absorption_loss_db,
    aggregate_gain_db,
    default_absorption_table,
    free_space_spectrum,
    load_absorption_table,
    path_gain,
    path_loss_spectrum,
    spectral_windows,
    spreading_loss_db,
    total_window_bandwidth_hz,
)
from thzreach.geometry import Material, Scene, Surface
from thzreach.raytracer import PathKind, PropagationPath, trace_los, trace_reflections


class TestAbsorptionTable:
    def test_interpolation_is_linear(self):
        t = AbsorptionTable(np.array([1e11, 2e11]), np.array([1e-4, 3e-4]))
        assert t.k_at(1e11) == pytest.approx(1e-4)
        assert t.k_at(2e11) == pytest.approx(3e-4)
        assert t.k_at(1.5e11) == pytest.approx(2e-4)

    def test_out_of_range_names_bounds(self):
        t = AbsorptionTable(np.array([1e11, 2e11]), np.array([1e-4, 3e-4]))
        with pytest.raises(ValueError, match="1e\\+11|100000000000"):
            t.k_at(5e10)
        with pytest.raises(ValueError):
            t.k_at(3e11)

    def test_non_increasing_grid_rejected(self):
        with pytest.raises(ValueError):
            AbsorptionTable(np.array([2e11, 1e11]), np.array([1e-4, 1e-4]))
        with pytest.raises(ValueError):
            AbsorptionTable(np.array([1e11, 1e11]), np.array([1e-4, 1e-4]))

    def test_negative_coefficient_rejected(self):
        with pytest.raises(ValueError):
            AbsorptionTable(np.array([1e11, 2e11]), np.array([1e-4, -1e-4]))

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            AbsorptionTable(np.array([1e11]), np.array([1e-4]))

    def test_default_table_properties(self, table):
        assert table.f_min <= 0.06e12
        assert table.f_max >= 1.0e12
        # absorption grows toward the high band in the synthetic profile
        assert table.k_at(1.0e12) > table.k_at(0.06e12)


class TestTableLoader:
    def test_csv_round_trip(self, tmp_path):
        p = tmp_path / "gas.csv"
        p.write_text("# frequency_hz, k_per_m\n1e11, 1e-4\n2e11, 2e-4\n3e11, 5e-4\n")
        t = load_absorption_table(p)
        assert t.k_at(2e11) == pytest.approx(2e-4)

    def test_stream_input(self):
        t = load_absorption_table(io.StringIO("1e11 1e-4\n2e11 2e-4\n"))
        assert t.k_at(1.5e11) == pytest.approx(1.5e-4)

    def test_bad_line_reports_number(self, tmp_path):
        p = tmp_path / "gas.csv"
        p.write_text("1e11, 1e-4\nnonsense\n")
        with pytest.raises(ValueError, match="line 2"):
            load_absorption_table(p)

    def test_wrong_column_count(self, tmp_path):
        p = tmp_path / "gas.csv"
        p.write_text("1e11, 1e-4, 7\n2e11, 2e-4, 7\n")
        with pytest.raises(ValueError):
            load_absorption_table(p)


class TestSpreading:
    def test_canonical_value(self):
        # 0.3 THz at 10 m sits just above 100 dB
        assert spreading_loss_db(0.3e12, 10.0) == pytest.approx(102.0, abs=0.1)

    def test_formula_identity(self, rng):
        for _ in range(100):
            f = float(rng.uniform(1e10, 1e13))
            d = float(rng.uniform(0.1, 500.0))
            expect = 20.0 * math.log10(4.0 * math.pi * d * f / SPEED_OF_LIGHT)
            assert spreading_loss_db(f, d) == expect

    def test_decade_steps(self):
        # +20 dB per decade in both distance and frequency
        base = spreading_loss_db(1e11, 1.0)
        assert spreading_loss_db(1e11, 10.0) - base == pytest.approx(20.0, abs=1e-9)
        assert spreading_loss_db(1e12, 1.0) - base == pytest.approx(20.0, abs=1e-9)

    def test_validation(self):
        with pytest.raises(ValueError):
            spreading_loss_db(0.0, 1.0)
        with pytest.raises(ValueError):
            spreading_loss_db(1e11, 0.0)


class TestAbsorption:
    def test_neper_to_db_constant(self):
        t = AbsorptionTable(np.array([1e11, 2e11]), np.array([0.01, 0.01]))
        assert absorption_loss_db(1e11, 100.0, t) == pytest.approx(4.342944819032518)

    def test_matches_exponential_form(self, rng):
        for _ in range(100):
            k = float(rng.uniform(1e-5, 0.2))
            d = float(rng.uniform(0.1, 200.0))
            t = AbsorptionTable(np.array([1e11, 2e11]), np.array([k, k]))
            direct = absorption_loss_db(1.5e11, d, t)
            via_exp = 10.0 * math.log10(math.exp(k * d))
            assert direct == pytest.approx(via_exp, rel=1e-12)

    def test_distance_additivity(self, rng):
        t = default_absorption_table()
        for _ in range(100):
            f = float(rng.uniform(t.f_min, t.f_max))
            d1 = float(rng.uniform(0.1, 50.0))
            d2 = float(rng.uniform(0.1, 50.0))
            whole = absorption_loss_db(f, d1 + d2, t)
            split = absorption_loss_db(f, d1, t) + absorption_loss_db(f, d2, t)
            assert whole == pytest.approx(split, rel=1e-9)

    def test_zero_distance_zero_loss(self, table):
        assert absorption_loss_db(0.3e12, 0.0, table) == 0.0


class TestPathGain:
    def test_los_no_reflection_loss(self, scene, endpoints, table):
        p = trace_los(scene, endpoints.tx, endpoints.rx[0].position)
        g = path_gain(p, 0.3e12, scene, table)
        assert g.reflection_loss_db == 0.0
        assert g.total_gain_db == -(g.spreading_loss_db + g.absorption_loss_db)

    def test_bounce_charges_reflectance(self, scene, endpoints, table):
        p = trace_reflections(scene, endpoints.tx, endpoints.rx[0].position, 1)[0]
        g = path_gain(p, 0.3e12, scene, table)
        r = scene.material_for(p.bounce_surfaces[0]).reflectance
        assert g.reflection_loss_db == pytest.approx(-10.0 * math.log10(r))

    def test_wall_reflectance_loss_value(self, scene, endpoints, table):
        # concrete wall reflectance 0.75 costs 1.2494 dB per bounce
        for p in trace_reflections(scene, endpoints.tx, endpoints.rx[0].position, 2):
            if all(scene.material_for(s).reflectance == 0.75 for s in p.bounce_surfaces):
                g = path_gain(p, 0.3e12, scene, table)
                expect = p.order * 1.2493873660829993
                assert g.reflection_loss_db == pytest.approx(expect, rel=1e-12)
                break
        else:
            pytest.fail("no wall-only bounce path found")

    def test_zero_reflectance_kills_path(self, table):
        surfs = [Surface(1, (0, 0, 0), (4, 0, 0), (0, 4, 0), 1)]
        sc = Scene(surfs, [Material(1, "absorber", 0.0)], 4.0)
        paths = trace_reflections(sc, (1, 1, 1), (3, 3, 1), 1)
        g = path_gain(paths[0], 0.3e12, sc, table)
        assert g.reflection_loss_db == math.inf
        assert g.total_gain_db == -math.inf

    def test_surface_assisted_rejected(self, scene, table):
        p = PropagationPath.build(
            PathKind.SURFACE_ASSISTED, [(0, 0, 1), (1, 1, 1), (2, 0, 1)], (1,)
        )
        with pytest.raises(ValueError):
            path_gain(p, 0.3e12, scene, table)


class TestAggregate:
    def _pg(self, gain_db):
        p = PropagationPath.build(PathKind.LOS, [(0, 0, 0), (1, 0, 0)], ())
        return PathGain(p, 1e11, -gain_db, 0.0, 0.0)

    def test_single_path_identity(self):
        assert aggregate_gain_db([self._pg(-87.3)]) == pytest.approx(-87.3)

    def test_two_equal_paths(self):
        agg = aggregate_gain_db([self._pg(-100.0), self._pg(-100.0)])
        assert agg == pytest.approx(-96.98970004336019, rel=1e-12)

    def test_bounds_random(self, rng):
        # max gain <= aggregate <= max gain + 10*log10(n)
        for _ in range(200):
            n = int(rng.integers(1, 12))
            gains = [self._pg(float(g)) for g in rng.uniform(-140, -60, n)]
            agg = aggregate_gain_db(gains)
            best = max(g.total_gain_db for g in gains)
            assert best <= agg + 1e-12
            assert agg <= best + 10.0 * math.log10(n) + 1e-12

    def test_empty_is_outage(self):
        with pytest.raises(OutageError):
            aggregate_gain_db([])

    def test_all_dead_paths(self):
        p = PropagationPath.build(PathKind.LOS, [(0, 0, 0), (1, 0, 0)], ())
        dead = PathGain(p, 1e11, math.inf, 0.0, 0.0)
        assert aggregate_gain_db([dead]) == -math.inf


class TestSpectrum:
    def test_matches_manual_aggregate(self, scene, endpoints, table):
        rx = endpoints.rx[0].position
        grid = np.linspace(0.2e12, 0.4e12, 5)
        spectrum = path_loss_spectrum(scene, endpoints.tx, rx, grid, table)
        assert len(spectrum) == 5
        paths = [trace_los(scene, endpoints.tx, rx)]
        paths += trace_reflections(scene, endpoints.tx, rx, 2)
        for f, loss in spectrum:
            agg = aggregate_gain_db([path_gain(p, f, scene, table) for p in paths])
            assert loss == pytest.approx(-agg, rel=1e-12)

    def test_outage_gives_empty(self, table):
        # a lone separating wall leaves no path at all: LOS is blocked and a
        # bounce off the wall needs both endpoints on the same side
        blocker = Surface(1, (2, 0, 0), (0, 4, 0), (0, 0, 4), 1)
        sc = Scene([blocker], [Material(1, "wall", 0.5)], 4.0)
        spectrum = path_loss_spectrum(sc, (1, 1, 1), (3, 1, 1), np.array([1e11, 2e11]), table)
        assert spectrum == []


class TestWindows:
    def test_flat_spectrum_single_window(self):
        spectrum = [(1e9 * i, 50.0) for i in range(1, 101)]
        ws = spectral_windows(spectrum, 3.0)
        assert len(ws) == 1
        assert ws[0].f_lo_hz == 1e9
        assert ws[0].f_hi_hz == 100e9

    def test_one_spike_splits_in_two(self):
        spectrum = [(1e9 * i, 50.0 + (20.0 if i == 50 else 0.0)) for i in range(1, 101)]
        ws = spectral_windows(spectrum, 3.0)
        assert len(ws) == 2
        assert ws[0].f_hi_hz < 50e9 < ws[1].f_lo_hz

    def test_small_bump_ignored(self):
        # prominence below the threshold does not split the band
        spectrum = [(1e9 * i, 50.0 + (2.0 if i == 50 else 0.0)) for i in range(1, 101)]
        ws = spectral_windows(spectrum, 3.0)
        assert len(ws) == 1

    def test_window_edges_on_grid(self, table):
        grid = np.linspace(0.1e12, 1.1e12, 501)
        spectrum = free_space_spectrum(10.0, grid, table)
        gset = set(float(f) for f in grid)
        for w in spectral_windows(spectrum, 3.0):
            assert w.f_lo_hz in gset and w.f_hi_hz in gset
            assert w.bandwidth_hz > 0

    def test_loss_within_threshold_of_window_min(self, table):
        grid = np.linspace(0.1e12, 1.1e12, 501)
        spectrum = free_space_spectrum(10.0, grid, table)
        by_f = dict(spectrum)
        for w in spectral_windows(spectrum, 3.0):
            inside = [l for f, l in spectrum if w.f_lo_hz <= f <= w.f_hi_hz]
            assert max(inside) - min(inside) <= 3.0 + 1e-9
            assert by_f[w.center_hz] if w.center_hz in by_f else True

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            spectral_windows([(1e9, 50.0), (2e9, 50.0)], 0.0)

    def test_window_dataclass_validation(self):
        with pytest.raises(ValueError):
            SpectralWindow(2e9, 1e9)
        w = SpectralWindow(1e9, 3e9)
        assert w.center_hz == pytest.approx(2e9)
        assert w.bandwidth_hz == pytest.approx(2e9)

    def test_total_bandwidth(self):
        ws = [SpectralWindow(1e9, 3e9), SpectralWindow(5e9, 6e9)]
        assert total_window_bandwidth_hz(ws) == pytest.approx(3e9)


class TestDistanceCoupling:
    def test_windows_shrink_with_distance(self, table):
        grid = np.linspace(0.45e12, 1.05e12, 1201)
        bws = []
        for d in (1.0, 10.0, 100.0):
            ws = spectral_windows(free_space_spectrum(d, grid, table), 3.0)
            bws.append(total_window_bandwidth_hz(ws))
        assert bws[0] > bws[1] > bws[2]
