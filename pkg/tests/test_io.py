import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapereg import io as sio
from shapereg.errors import ValidationError
from shapereg.inference import ChainRecord
from shapereg.observation import ObservationSet
from shapereg.scenarios import template_circle


class TestCurveTables:
    def test_template_round_trip(self, tmp_path):
        path = tmp_path / "curve.csv"
        curve = template_circle(4)
        sio.write_curve_csv(path, curve.points)
        s, pts = sio.read_curve_csv(path)
        assert np.array_equal(pts, curve.points)
        expected = np.array([[1 + np.pi, np.pi], [np.pi, 1 + np.pi], [np.pi - 1, np.pi], [np.pi, np.pi - 1]])
        np.testing.assert_allclose(pts, expected, atol=1e-15)
        assert len(s) == 4

    def test_observations_round_trip(self, tmp_path, rng):
        path = tmp_path / "obs.csv"
        obs = ObservationSet(
            rng.uniform(0, 2 * np.pi, (17, 2)),
            sigma2=rng.uniform(1e-6, 1e-2, 17),
        )
        sio.write_observations_csv(path, obs)
        back = sio.read_observations_csv(path)
        assert np.array_equal(back.y, obs.y)
        assert np.array_equal(back.sigma2, obs.sigma2)
        assert np.array_equal(back.s_index, obs.s_index)

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("index,s,x\n0,0.0,1.0\n")
        with pytest.raises(ValidationError) as err:
            sio.read_observations_csv(path)
        assert "y" in str(err.value)

    def test_shapes_round_trip(self, tmp_path, rng):
        path = tmp_path / "shapes.csv"
        s = np.linspace(0, 2 * np.pi, 9, endpoint=False)
        curves = rng.standard_normal((3, 9, 2))
        sio.write_shapes_csv(path, s, curves)
        s2, curves2 = sio.read_shapes_csv(path)
        assert np.array_equal(curves2, curves)
        assert np.array_equal(s2, s)


class TestChainStream:
    @settings(max_examples=25, deadline=None)
    @given(
        seed=st.integers(0, 2**31),
        phi=st.floats(allow_nan=False, allow_infinity=False, width=64),
    )
    def test_record_round_trip(self, seed, phi):
        rng = np.random.default_rng(seed)
        rec = ChainRecord(7, True, phi, float(abs(phi) + 1e-12), rng.standard_normal(9), rng.standard_normal(5))
        back = sio.record_from_json(sio.record_to_json(rec))
        assert back.iteration == rec.iteration
        assert back.accept == rec.accept
        assert back.phi == rec.phi
        assert back.sigma2 == rec.sigma2
        assert np.array_equal(back.p0_coeffs, rec.p0_coeffs)
        assert np.array_equal(back.nu_coeffs, rec.nu_coeffs)

    def test_file_round_trip(self, tmp_path, rng):
        path = tmp_path / "chain.ndjson"
        records = [
            ChainRecord(i, bool(i % 2), float(i) * 0.1, 1e-4, rng.standard_normal(4), rng.standard_normal(4))
            for i in range(1, 20)
        ]
        sio.write_chain_ndjson(path, records)
        back = sio.read_chain_ndjson(path)
        assert len(back) == len(records)
        for a, b in zip(records, back):
            assert a.iteration == b.iteration and a.phi == b.phi
            assert np.array_equal(a.p0_coeffs, b.p0_coeffs)

    def test_missing_field_named(self, tmp_path):
        path = tmp_path / "chain.ndjson"
        path.write_text(json.dumps({"iteration": 1, "accept": True, "phi": 0.0, "sigma2": 1.0, "p0": [0.1]}) + "\n")
        with pytest.raises(ValidationError) as err:
            sio.read_chain_ndjson(path)
        assert "nu" in str(err.value)

    def test_streaming_writer_matches_batch(self, tmp_path, rng):
        records = [
            ChainRecord(i, True, 0.5, 1.0, rng.standard_normal(3), rng.standard_normal(3))
            for i in range(5)
        ]
        p1 = tmp_path / "a.ndjson"
        p2 = tmp_path / "b.ndjson"
        sio.write_chain_ndjson(p1, records)
        with sio.ChainWriter(p2) as writer:
            for r in records:
                writer(r)
        assert p1.read_bytes() == p2.read_bytes()


class TestFloats:
    @settings(max_examples=200, deadline=None)
    @given(st.floats(allow_nan=False, allow_infinity=False, width=64))
    def test_fmt_round_trips_exactly(self, x):
        assert float(sio.fmt(x)) == x


class TestManifest:
    def test_digest_changes_iff_params_change(self):
        base = dict(seed=1, scenario="consistency", params={"a": 1.0}, n_p_data=1000, n_p_model=100, n_g=64, steps=50)
        m1 = sio.RunManifest(**base).to_dict()
        m2 = sio.RunManifest(**base).to_dict()
        assert m1["config_digest"] == m2["config_digest"]
        changed = dict(base, params={"a": 1.0000001})
        m3 = sio.RunManifest(**changed).to_dict()
        assert m3["config_digest"] != m1["config_digest"]
        reseeded = dict(base, seed=2)
        assert sio.RunManifest(**reseeded).to_dict()["config_digest"] != m1["config_digest"]


class TestConfig:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "run.ini"
        sections = {
            "metric": {"alpha": 0.4, "gamma": 2},
            "sampler": {"beta": 0.15, "n_iters": 1000, "infer_sigma2": True},
            "prior.p0": {"delta": 30.0, "alpha": 0.55},
        }
        sio.write_config_ini(path, sections)
        back = sio.read_config_ini(path)
        assert back["metric"]["alpha"] == 0.4
        assert back["metric"]["gamma"] == 2
        assert back["sampler"]["infer_sigma2"] is True
        assert back["prior.p0"]["delta"] == 30.0

    def test_unknown_field_named(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[sampler]\nbeta = 0.1\nbogus = 3\n")
        with pytest.raises(ValidationError) as err:
            sio.read_config_ini(path)
        assert "sampler.bogus" in str(err.value)

    def test_unknown_section_named(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[nonsense]\na = 1\n")
        with pytest.raises(ValidationError) as err:
            sio.read_config_ini(path)
        assert "nonsense" in str(err.value)

    def test_unparseable_value_named(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[metric]\nalpha = banana\n")
        with pytest.raises(ValidationError) as err:
            sio.read_config_ini(path)
        assert "metric.alpha" in str(err.value)
