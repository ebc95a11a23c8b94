import math

import numpy as np
import pytest

from thzreach.geometry import Material, Scene, Surface, is_occluded
from thzreach.raytracer import PathKind
from thzreach.channel import absorption_loss_db, spreading_loss_db
from thzreach.tiles import (
    Tile,
    TileKind,
    TileSet,
    assisted_gains,
    configure,
    redirection_loss_db,
    solve_tile_normal,
    uniform_tile_grid,
    validate_tileset,
)


def _tileset(kind, tiles=(), **kw):
    return TileSet(kind, tuple(tiles), **kw)


class TestTileSet:
    def test_validation(self):
        with pytest.raises(ValueError):
            _tileset(TileKind.HYPERSURFACE, efficiency_db=-1.0)
        with pytest.raises(ValueError):
            _tileset(TileKind.REFLECTARRAY, cutoff_frequency_hz=0.0)
        with pytest.raises(ValueError):
            _tileset(TileKind.REFLECTARRAY, rolloff_db_per_octave=-6.0)


class TestUniformGrid:
    def test_default_scene_host_wall(self, scene):
        # 100 m x 3 m wall at 0.5 m pitch
        tiles = uniform_tile_grid(scene, (1,), 0.5)
        assert len(tiles) == 200 * 6
        assert all(t.host_surface_id == 1 for t in tiles)

    def test_centers_on_host(self, scene):
        tiles = uniform_tile_grid(scene, (1,), 0.5)
        ts = _tileset(TileKind.HYPERSURFACE, tiles)
        validate_tileset(ts, scene)  # raises on any off-surface center

    def test_partial_cells_dropped(self):
        s = Surface(1, (0, 0, 0), (1.3, 0, 0), (0, 0, 1.3), 1)
        sc = Scene([s], [Material(1, "wall", 0.5)], 2.0)
        tiles = uniform_tile_grid(sc, (1,), 0.5)
        assert len(tiles) == 4  # 2 x 2 whole cells out of 2.6 x 2.6

    def test_pitch_validation(self, scene):
        with pytest.raises(ValueError):
            uniform_tile_grid(scene, (1,), 0.0)

    def test_wall_smaller_than_tile(self):
        s = Surface(1, (0, 0, 0), (0.3, 0, 0), (0, 0, 0.3), 1)
        sc = Scene([s], [Material(1, "wall", 0.5)], 1.0)
        with pytest.raises(ValueError):
            uniform_tile_grid(sc, (1,), 0.5)

    def test_validate_rejects_foreign_tile(self, scene):
        bad = Tile((50.0, 0.0, 10.0), 0.5, 1)  # above the wall
        with pytest.raises(ValueError):
            validate_tileset(_tileset(TileKind.HYPERSURFACE, (bad,)), scene)


class TestNormalSolver:
    def test_reflection_property(self, rng):
        # reflecting the incoming direction across the solved normal points at rx
        for _ in range(300):
            tile = rng.uniform(-5, 5, 3)
            tx = tile + rng.normal(size=3) * rng.uniform(1, 10)
            rx = tile + rng.normal(size=3) * rng.uniform(1, 10)
            if np.linalg.norm(np.cross(tx - tile, rx - tile)) < 1e-6:
                continue
            n = solve_tile_normal(tx, tile, rx)
            d_in = (tile - tx) / np.linalg.norm(tile - tx)
            reflected = d_in - 2.0 * np.dot(d_in, n) * n
            d_out = (rx - tile) / np.linalg.norm(rx - tile)
            assert np.linalg.norm(reflected - d_out) < 1e-9

    def test_unit_length(self, rng):
        for _ in range(100):
            n = solve_tile_normal(rng.uniform(-5, 5, 3), rng.uniform(-5, 5, 3), rng.uniform(-5, 5, 3))
            assert abs(np.linalg.norm(n) - 1.0) < 1e-12

    def test_retroreflection(self):
        n = solve_tile_normal((0, 0, 5), (0, 0, 0), (0, 0, 3))
        assert np.allclose(n, (0, 0, 1))

    def test_degenerate_opposite_rays(self):
        # tile exactly between the endpoints: stable perpendicular choice
        n1 = solve_tile_normal((-1, 0, 0), (0, 0, 0), (1, 0, 0))
        n2 = solve_tile_normal((-1, 0, 0), (0, 0, 0), (1, 0, 0))
        assert np.allclose(n1, n2)
        assert abs(float(np.dot(n1, (1, 0, 0)))) < 1e-12

    def test_degenerate_vertical_pair(self):
        n = solve_tile_normal((0, 0, 1), (0, 0, 0), (0, 0, -1))
        assert abs(float(np.dot(n, (0, 0, 1)))) < 1e-12
        assert abs(np.linalg.norm(n) - 1.0) < 1e-12


class TestConfigure:
    def test_empty_tileset(self, scene, endpoints):
        ts = _tileset(TileKind.HYPERSURFACE)
        assert configure(ts, scene, endpoints.tx, endpoints.rx[0].position) == ()

    def test_nlos_arm_rx_gets_active_tiles(self, scene, endpoints):
        tiles = uniform_tile_grid(scene, (1,), 0.5)
        ts = _tileset(TileKind.HYPERSURFACE, tiles)
        rx10 = next(r for r in endpoints.rx if r.rx_id == 10)
        assert is_occluded(endpoints.tx, rx10.position, scene)
        cfgs = configure(ts, scene, endpoints.tx, rx10.position)
        active = [c for c in cfgs if c.active]
        assert len(active) >= 1

    def test_inactive_keeps_host_normal(self, scene, endpoints):
        tiles = uniform_tile_grid(scene, (1,), 0.5)
        ts = _tileset(TileKind.HYPERSURFACE, tiles)
        rx15 = next(r for r in endpoints.rx if r.rx_id == 15)
        cfgs = configure(ts, scene, endpoints.tx, rx15.position)
        host_n = scene.surface(1).normal
        for c in cfgs:
            if not c.active:
                assert np.allclose(c.normal, host_n)

    def test_active_tiles_see_both_ends(self, scene, endpoints):
        tiles = uniform_tile_grid(scene, (1,), 0.5)
        ts = _tileset(TileKind.HYPERSURFACE, tiles)
        rx10 = next(r for r in endpoints.rx if r.rx_id == 10)
        cfgs = configure(ts, scene, endpoints.tx, rx10.position)
        for c in cfgs:
            t = ts.tiles[c.tile_index]
            clear = not is_occluded(endpoints.tx, t.center, scene) and not is_occluded(
                rx10.position, t.center, scene
            )
            assert c.active == clear

    def test_symmetric_endpoints_symmetric_normals(self):
        # one wall, endpoints mirrored across the wall's vertical midplane
        wall = Surface(1, (0, 0, 0), (10, 0, 0), (0, 0, 3), 1)
        sc = Scene([wall], [Material(1, "wall", 0.8)], 3.0)
        tiles = uniform_tile_grid(sc, (1,), 1.0)
        ts = _tileset(TileKind.HYPERSURFACE, tiles)
        tx = (3.0, 4.0, 1.5)
        rx = (7.0, 4.0, 1.5)
        cfgs = configure(ts, sc, tx, rx)
        by_center = {
            (round(t.center[0], 9), round(t.center[2], 9)): cfgs[i]
            for i, t in enumerate(ts.tiles)
        }
        for (x, z), c in by_center.items():
            m = by_center[(round(10.0 - x, 9), z)]
            assert c.active and m.active
            # mirrored tile: x component flips, y and z match
            assert m.normal[0] == pytest.approx(-c.normal[0], abs=1e-12)
            assert m.normal[1] == pytest.approx(c.normal[1], abs=1e-12)
            assert m.normal[2] == pytest.approx(c.normal[2], abs=1e-12)


class TestRedirectionLoss:
    def test_below_cutoff_is_efficiency_only(self):
        ra = _tileset(TileKind.REFLECTARRAY)
        hs = _tileset(TileKind.HYPERSURFACE)
        assert redirection_loss_db(ra, 60e9) == 3.0
        assert redirection_loss_db(hs, 60e9) == 3.0
        assert redirection_loss_db(ra, 120e9) == 3.0

    def test_reflectarray_rolloff_octaves(self):
        ra = _tileset(TileKind.REFLECTARRAY)
        assert redirection_loss_db(ra, 240e9) == pytest.approx(9.0, abs=1e-12)
        assert redirection_loss_db(ra, 480e9) == pytest.approx(15.0, abs=1e-12)

    def test_hypersurface_flat_above_cutoff(self):
        hs = _tileset(TileKind.HYPERSURFACE)
        assert redirection_loss_db(hs, 240e9) == 3.0
        assert redirection_loss_db(hs, 1e12) == 3.0

    def test_kind_delta_exact(self):
        ra = _tileset(TileKind.REFLECTARRAY)
        hs = _tileset(TileKind.HYPERSURFACE)
        delta = redirection_loss_db(ra, 240e9) - redirection_loss_db(hs, 240e9)
        assert delta == pytest.approx(6.0, abs=1e-9)


class TestAssistedGains:
    def test_unfolded_distance(self, scene, endpoints, table):
        tiles = uniform_tile_grid(scene, (1,), 0.5)
        ts = _tileset(TileKind.HYPERSURFACE, tiles)
        rx10 = next(r for r in endpoints.rx if r.rx_id == 10)
        cfgs = configure(ts, scene, endpoints.tx, rx10.position)
        gains = assisted_gains(cfgs, ts, endpoints.tx, rx10.position, 0.3e12, table)
        active = [c for c in cfgs if c.active]
        assert len(gains) == len(active)
        for g in gains:
            assert g.path.kind is PathKind.SURFACE_ASSISTED
            d = g.path.length
            tx = np.asarray(endpoints.tx, dtype=float)
            c = np.asarray(g.path.vertices[1], dtype=float)
            rxp = np.asarray(rx10.position, dtype=float)
            d_manual = np.linalg.norm(c - tx) + np.linalg.norm(rxp - c)
            assert d == pytest.approx(d_manual, rel=1e-12)
            assert g.spreading_loss_db == pytest.approx(spreading_loss_db(0.3e12, d), rel=1e-12)
            assert g.absorption_loss_db == pytest.approx(
                absorption_loss_db(0.3e12, d, table), rel=1e-12
            )
            assert g.reflection_loss_db == 3.0

    def test_inactive_contribute_nothing(self, scene, endpoints, table):
        tiles = uniform_tile_grid(scene, (1,), 0.5)
        ts = _tileset(TileKind.HYPERSURFACE, tiles)
        rx10 = next(r for r in endpoints.rx if r.rx_id == 10)
        cfgs = configure(ts, scene, endpoints.tx, rx10.position)
        gains = assisted_gains(cfgs, ts, endpoints.tx, rx10.position, 0.3e12, table)
        n_active = sum(1 for c in cfgs if c.active)
        assert len(gains) == n_active

    def test_kind_changes_loss_only(self, scene, endpoints, table):
        # same geometry, different kind: totals differ by the rolloff alone
        tiles = uniform_tile_grid(scene, (1,), 0.5)
        rx10 = next(r for r in endpoints.rx if r.rx_id == 10)
        hs = _tileset(TileKind.HYPERSURFACE, tiles)
        ra = _tileset(TileKind.REFLECTARRAY, tiles)
        cfgs = configure(hs, scene, endpoints.tx, rx10.position)
        g_hs = assisted_gains(cfgs, hs, endpoints.tx, rx10.position, 240e9, table)
        g_ra = assisted_gains(cfgs, ra, endpoints.tx, rx10.position, 240e9, table)
        for a, b in zip(g_hs, g_ra):
            assert b.total_gain_db - a.total_gain_db == pytest.approx(-6.0, abs=1e-9)
