import numpy as np
import pytest

from hbfkit.channel import (ArrayGeometry, InsufficientPositionsError,
                            OutOfAreaError, ScenarioArea, UserPosition,
                            array_response, channel_table, generate_channel,
                            make_area, mean_snr_db, path_components,
                            sample_user_set)
from hbfkit.config import ScenarioParams, SystemConfig
from hbfkit.rand import rng_stream

CFG = SystemConfig(n_t=16, n_rf=4, n_u=2, k_ss=8, noise_power_dbw=-120.0, seed=11)
GEOM = ArrayGeometry.for_system(CFG)


def small_area(**kw):
    params = dict(area="limited", grid_x=4, grid_y=4)
    params.update(kw)
    return make_area(ScenarioParams(**params))


class TestArrayResponse:
    def test_reference_element_and_nx1(self):
        geom = ArrayGeometry(1, 4, 4)
        a = array_response(geom, azimuth=0.0, elevation=np.pi / 2)
        assert a[0] == pytest.approx(1.0)
        # elevation pi/2 kills the z term and azimuth 0 the y term
        assert np.allclose(a, 1.0)

    def test_negated_azimuth_conjugates_y_array(self):
        geom = ArrayGeometry(1, 8, 1)
        a = array_response(geom, azimuth=0.7, elevation=1.1)
        b = array_response(geom, azimuth=-0.7, elevation=1.1)
        assert np.allclose(b, a.conj())

    def test_norm_is_n_t(self, rng):
        for _ in range(10):
            az, el = rng.uniform(-np.pi, np.pi), rng.uniform(0, np.pi)
            a = array_response(GEOM, az, el)
            assert np.linalg.norm(a) ** 2 == pytest.approx(GEOM.n_t)

    def test_non_finite_angle_rejected(self):
        with pytest.raises(ValueError):
            array_response(GEOM, np.nan, 1.0)


class TestGenerateChannel:
    def test_deterministic(self):
        area = small_area()
        positions = area.positions[:2]
        h1 = generate_channel(CFG, area, GEOM, positions).h
        h2 = generate_channel(CFG, area, GEOM, positions).h
        assert np.array_equal(h1, h2)

    def test_shape_and_finiteness(self):
        area = small_area()
        rng = rng_stream(3, "t")
        positions = sample_user_set(area, 2, rng)
        real = generate_channel(CFG, area, GEOM, positions)
        assert real.h.shape == (CFG.n_t, CFG.n_u)
        assert np.all(np.isfinite(real.h))

    def test_out_of_area_rejected(self):
        area = small_area()
        bad = UserPosition(grid_x=-5, grid_y=0, area_id=area.area_id)
        with pytest.raises(OutOfAreaError):
            generate_channel(CFG, area, GEOM, (area.positions[0], bad))

    def test_single_path_distance_ratio(self):
        # in LOS-only mode the column power follows d^-3 exactly
        area = ScenarioArea(name="limited", area_id=0,
                            rects=((10, 0, 31, 1),), bs_xyz=(0.0, 0.0, 1.5),
                            num_paths=1)
        near = UserPosition(10, 0, 0)   # 20 m
        far = UserPosition(20, 0, 0)    # 40 m
        h = generate_channel(SystemConfig(n_t=16, n_rf=4, n_u=2, k_ss=8,
                                          noise_power_dbw=-120.0, seed=5),
                             area, GEOM, (near, far)).h
        ratio = np.linalg.norm(h[:, 0]) ** 2 / np.linalg.norm(h[:, 1]) ** 2
        assert ratio == pytest.approx(2.0 ** 3.0, rel=1e-9)

    def test_tx_norm_rescales_uniformly(self):
        area1 = small_area()
        area2 = small_area(tx_norm=2.0)
        positions = area1.positions[:2]
        h1 = generate_channel(CFG, area1, GEOM, positions).h
        h2 = generate_channel(CFG, area2, GEOM,
                              [UserPosition(p.grid_x, p.grid_y, area2.area_id)
                               for p in positions]).h
        assert np.allclose(h2, 2.0 * h1)

    def test_path_budget(self):
        area = small_area(num_paths=7)
        comps = path_components(CFG, area, area.positions[0])
        assert len(comps) <= 7


class TestAreas:
    def test_archetype_ordering_and_magnitudes(self):
        snrs = {}
        for name in ("limited", "extended", "crossroad"):
            area = make_area(ScenarioParams(area=name))
            snrs[name] = mean_snr_db(CFG, area, GEOM)
        assert snrs["limited"] < snrs["crossroad"]
        assert snrs["limited"] < snrs["extended"]
        assert abs(snrs["crossroad"] - snrs["extended"]) < 1.5
        assert snrs["limited"] == pytest.approx(4.35, abs=1.0)
        assert snrs["extended"] == pytest.approx(10.8, abs=1.0)

    def test_limited_smaller_than_extended(self):
        lim = make_area(ScenarioParams(area="limited"))
        ext = make_area(ScenarioParams(area="extended"))
        assert lim.p_u < ext.p_u

    def test_crossroad_union_dedup(self):
        area = make_area(ScenarioParams(area="crossroad"))
        coords = {(p.grid_x, p.grid_y) for p in area.positions}
        assert len(coords) == area.p_u

    def test_unknown_area_rejected(self):
        with pytest.raises(ValueError, match="unknown area"):
            make_area(ScenarioParams(area="mars"))

    def test_no_duplicate_columns(self):
        area = small_area()
        table = channel_table(CFG, area, GEOM)
        assert np.unique(table.round(20), axis=0).shape[0] == area.p_u


class TestSampleUserSet:
    def test_exhaustion_is_permutation(self):
        area = small_area()
        picks = sample_user_set(area, area.p_u, rng_stream(1, "s"))
        assert sorted((p.grid_x, p.grid_y) for p in picks) == \
            sorted((p.grid_x, p.grid_y) for p in area.positions)

    def test_too_many_users(self):
        area = small_area()
        with pytest.raises(InsufficientPositionsError):
            sample_user_set(area, area.p_u + 1, rng_stream(1, "s"))

    def test_reproducible(self):
        area = small_area()
        a = sample_user_set(area, 3, rng_stream(9, "draw"))
        b = sample_user_set(area, 3, rng_stream(9, "draw"))
        assert a == b

    def test_uniform_chi_square(self):
        from scipy import stats

        area = make_area(ScenarioParams(area="limited"))  # 128 positions
        rng = rng_stream(2024, "uniformity")
        n = 100_000
        index = {p: i for i, p in enumerate(area.positions)}
        counts = np.zeros(area.p_u)
        for _ in range(n):
            (pos,) = sample_user_set(area, 1, rng)
            counts[index[pos]] += 1
        expected = n / area.p_u
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        assert chi2 < stats.chi2.ppf(0.999, area.p_u - 1)


def test_geometry_validation():
    with pytest.raises(ValueError):
        ArrayGeometry(0, 4, 4)
    with pytest.raises(ValueError):
        ArrayGeometry(1, 4, 4, spacing=0.0)
    with pytest.raises(ValueError):
        ArrayGeometry.for_system(CFG, nx=5)
