import numpy as np
import pytest

from mortarflow import (
    FluidModel,
    MediaDataError,
    MediaFormatError,
    load_media_text,
    load_spe10,
    save_media_text,
    spe10_model_layers,
    synth_media,
)


class TestFluidModel:
    def test_mobility_end_points(self):
        fluid = FluidModel(mu_w=1.0, mu_o=5.0)
        lw, lo, lt = fluid.mobility(0.0)
        assert lt == pytest.approx(0.2)
        assert lw == 0.0
        _, _, lt1 = fluid.mobility(1.0)
        assert lt1 == pytest.approx(1.0)

    def test_mobility_midpoint(self):
        fluid = FluidModel(mu_w=1.0, mu_o=5.0)
        lw, lo, lt = fluid.mobility(0.5)
        assert lw == pytest.approx(0.25)
        assert lo == pytest.approx(0.05)
        assert lt == pytest.approx(0.30)

    def test_fractional_flow_values(self):
        fluid = FluidModel(mu_w=1.0, mu_o=5.0)
        assert fluid.fractional_flow(0.0) == 0.0
        assert fluid.fractional_flow(1.0) == 1.0
        assert fluid.fractional_flow(0.5) == pytest.approx(5.0 / 6.0)

    def test_fractional_flow_monotone(self):
        fluid = FluidModel(mu_w=1.0, mu_o=5.0)
        s = np.linspace(0.0, 1.0, 1001)
        f = fluid.fractional_flow(s)
        assert np.all(np.diff(f) >= -1e-15)

    @pytest.mark.parametrize("mu_w,mu_o", [(1.0, 5.0), (0.5, 2.0), (3.0, 1.0)])
    def test_total_mobility_positive(self, mu_w, mu_o):
        fluid = FluidModel(mu_w=mu_w, mu_o=mu_o)
        s = np.linspace(0.0, 1.0, 1001)
        _, _, lt = fluid.mobility(s)
        assert lt.min() > 0

    def test_max_slope_finite_and_stable(self):
        fluid = FluidModel()
        m1 = fluid.max_fractional_flow_slope(4096)
        m2 = fluid.max_fractional_flow_slope(8192)
        assert 1.0 < m1 < 10.0
        assert m1 == pytest.approx(m2, rel=1e-3)

    def test_saturation_out_of_range_rejected(self):
        fluid = FluidModel()
        with pytest.raises(ValueError, match="saturation"):
            fluid.mobility(1.2)
        with pytest.raises(ValueError, match="saturation"):
            fluid.fractional_flow(-0.1)

    def test_nonpositive_viscosity_rejected(self):
        with pytest.raises(ValueError):
            FluidModel(mu_w=0.0)


class TestSyntheticMedia:
    def test_uniform(self):
        field = synth_media("uniform", (4, 5), value=2.5)
        assert np.all(field.perm[0] == 2.5)
        assert np.all(field.perm[1] == 2.5)
        assert field.porosity.shape == (4, 5)

    def test_layered_two_valued(self):
        field = synth_media("layered", (4, 16), value=1.0, contrast=1e3)
        vals = np.unique(field.perm[0])
        assert vals.size == 2
        assert vals.max() / vals.min() == pytest.approx(1e3)

    def test_lognormal_deterministic(self):
        a = synth_media("lognormal", (8, 8), seed=1)
        b = synth_media("lognormal", (8, 8), seed=1)
        assert np.array_equal(a.perm[0], b.perm[0])
        c = synth_media("lognormal", (8, 8), seed=2)
        assert not np.array_equal(a.perm[0], c.perm[0])

    def test_channel_positive_and_contrasted(self):
        field = synth_media("channel", (30, 60), seed=4, contrast=1e3)
        k = field.perm[0]
        assert k.min() > 0
        assert k.max() / k.min() > 50

    def test_3d_field(self):
        field = synth_media("lognormal", (6, 6, 4), seed=0)
        assert field.ndim == 3
        assert len(field.perm) == 3

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            synth_media("perlin", (4, 4))


def _write_spe10_like(path, dims, rng):
    n = int(np.prod(dims))
    vals = np.concatenate([rng.uniform(0.1, 10.0, n) for _ in range(3)])
    np.savetxt(path, vals.reshape(-1, 4))
    return vals


class TestSpe10Loader:
    def test_layer_selection_shapes(self, tmp_path):
        rng = np.random.default_rng(0)
        dims = (6, 10, 9)
        path = tmp_path / "perm.dat"
        _write_spe10_like(path, dims, rng)
        field = load_spe10(path, layers=(1, 3), dataset_dims=dims)
        assert field.dims == (6, 10, 3)
        field2d = load_spe10(path, layers=(9, 9), dataset_dims=dims)
        assert field2d.dims == (6, 10)
        assert len(field2d.perm) == 2

    def test_layout_round_trip(self, tmp_path):
        # x-fastest layout: value of cell (i,j,k) sits at i + nx*(j + ny*k)
        dims = (3, 2, 2)
        n = 12
        kx = np.arange(1, n + 1, dtype=float)
        vals = np.concatenate([kx, kx * 10, kx * 100])
        path = tmp_path / "perm.dat"
        path.write_text(" ".join(str(v) for v in vals))
        field = load_spe10(path, layers=(1, 2), dataset_dims=dims)
        assert field.perm[0][0, 0, 0] == 1.0
        assert field.perm[0][1, 0, 0] == 2.0
        assert field.perm[0][0, 1, 0] == 4.0
        assert field.perm[0][0, 0, 1] == 7.0
        assert field.perm[1][0, 0, 0] == 10.0

    def test_count_mismatch_rejected(self, tmp_path):
        path = tmp_path / "perm.dat"
        path.write_text(" ".join("1.0" for _ in range(3 * 12 - 1)))
        with pytest.raises(MediaFormatError, match="expected"):
            load_spe10(path, layers=(1, 1), dataset_dims=(3, 2, 2))

    def test_nonpositive_value_rejected(self, tmp_path):
        vals = ["1.0"] * 36
        vals[5] = "-2.0"
        path = tmp_path / "perm.dat"
        path.write_text(" ".join(vals))
        with pytest.raises(MediaDataError):
            load_spe10(path, layers=(1, 2), dataset_dims=(3, 2, 2))

    def test_porosity_file_and_floor(self, tmp_path):
        dims = (2, 2, 2)
        rng = np.random.default_rng(1)
        perm = tmp_path / "perm.dat"
        _write_spe10_like(perm, dims, rng)
        poro = tmp_path / "poro.dat"
        poro.write_text(" ".join(["0.3"] * 7 + ["0.0"]))
        field = load_spe10(perm, layers=(1, 2), dataset_dims=dims, porosity_path=poro)
        assert field.porosity.max() == pytest.approx(0.3)
        assert field.porosity.min() > 0  # zero porosity floored

    def test_model_layer_table(self):
        assert spe10_model_layers(1) == (85, 85)
        assert spe10_model_layers(2) == (1, 30)
        assert spe10_model_layers(3) == (36, 85)
        with pytest.raises(ValueError):
            spe10_model_layers(4)


class TestMediaTextRoundTrip:
    def test_round_trip(self, tmp_path):
        field = synth_media("channel", (12, 20), seed=3)
        path = tmp_path / "field.txt"
        save_media_text(field, path)
        back = load_media_text(path, (12, 20))
        for a, b in zip(field.perm, back.perm):
            assert np.allclose(a, b, rtol=1e-9)
        assert np.allclose(field.porosity, back.porosity, rtol=1e-9)

    def test_wrong_dims_rejected(self, tmp_path):
        field = synth_media("uniform", (4, 4))
        path = tmp_path / "field.txt"
        save_media_text(field, path)
        with pytest.raises(MediaFormatError):
            load_media_text(path, (5, 5))
