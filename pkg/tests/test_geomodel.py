import numpy as np
import pytest

from plumeflow.geomodel import (GeoConfig, make_layered_model,
                                porosity_to_permeability, velocity_to_porosity)
from plumeflow.grids import Grid2D, area_average

GRID = Grid2D.from_extent(64, 64)


class TestVelocityToPorosity:
    def test_clamp_endpoints(self):
        assert velocity_to_porosity(1500.0) == pytest.approx(0.36)
        assert velocity_to_porosity(5500.0) == pytest.approx(0.02)

    def test_linear_law_value(self):
        # 0.36 - 1.1e-4 * 1000
        assert velocity_to_porosity(2500.0) == pytest.approx(0.25)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            velocity_to_porosity(1400.0)
        with pytest.raises(ValueError):
            velocity_to_porosity(5600.0)

    def test_monotone_non_increasing(self):
        v = np.linspace(1500.0, 5500.0, 400)
        phi = velocity_to_porosity(v)
        assert np.all(np.diff(phi) <= 0)


class TestPorosityToPermeability:
    def test_kozeny_carman_value(self):
        # direct evaluation: d^2 phi^3 / (180 (1-phi)^2)
        d = 1e-4
        expected = d ** 2 * 0.25 ** 3 / (180.0 * 0.75 ** 2)
        got = porosity_to_permeability(0.25, d)
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(1.543e-12, rel=1e-3)

    def test_vanishes_at_zero_porosity(self):
        assert porosity_to_permeability(1e-9) < 1e-36

    def test_strictly_increasing(self):
        assert porosity_to_permeability(0.3) > porosity_to_permeability(0.2)
        phi = np.linspace(0.01, 0.39, 200)
        assert np.all(np.diff(porosity_to_permeability(phi)) > 0)

    def test_rejects_bad_inputs(self):
        for phi in (0.0, -0.1, 1.0, 1.5):
            with pytest.raises(ValueError):
                porosity_to_permeability(phi)
        with pytest.raises(ValueError):
            porosity_to_permeability(0.25, d_grain=0.0)

    def test_composed_map_non_increasing(self):
        v = np.linspace(1500.0, 4500.0, 300)
        k = porosity_to_permeability(velocity_to_porosity(v))
        assert np.all(np.diff(k) <= 0)


class TestMakeLayeredModel:
    def test_deterministic(self):
        a = make_layered_model(7, GRID)
        b = make_layered_model(7, GRID)
        for f in ("velocity", "porosity", "permeability"):
            assert np.array_equal(getattr(a, f), getattr(b, f))
        assert a.seal_rows == b.seal_rows
        assert a.well_col == b.well_col and a.fracture_col == b.fracture_col

    def test_distinct_seeds_differ(self):
        a = make_layered_model(7, GRID)
        b = make_layered_model(8, GRID)
        assert (a.velocity != b.velocity).mean() >= 0.01

    def test_rejects_too_small_grid(self):
        with pytest.raises(ValueError):
            make_layered_model(0, Grid2D.from_extent(32, 16))

    def test_invariants_over_seeds(self):
        for seed in range(100):
            m = make_layered_model(seed, GRID)
            m.validate()
            res = m.permeability[m.seal_rows.stop:, :]
            seal = m.permeability[m.seal_rows.start:m.seal_rows.stop, :]
            assert seal.min() <= 0.01 * np.median(res)
            # the well sits in permeable rock under the seal
            perf = slice(m.seal_rows.stop + 2, m.seal_rows.stop + 6)
            assert m.permeability[perf, m.well_col].mean() >= 0.5 * np.median(res)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GeoConfig(n_layers=2)


class TestAreaAverage:
    def test_identity_and_mean_preservation(self):
        rng = np.random.default_rng(0)
        f = rng.random((64, 64))
        assert np.array_equal(area_average(f, (64, 64)), f)
        g = area_average(f, (32, 32))
        assert g.shape == (32, 32)
        assert g.mean() == pytest.approx(f.mean())

    def test_rejects_non_integer_factor(self):
        with pytest.raises(ValueError):
            area_average(np.zeros((64, 64)), (48, 48))
