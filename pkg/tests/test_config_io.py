import numpy as np
import pytest

from hbfkit.config import (ConfigError, GaParams, RunConfig, SystemConfig,
                           load_config)
from hbfkit.fileio import (IntegrityError, codebook_to_csv, read_burst_csv,
                           read_codebook, read_matrix, sha256_file,
                           write_burst_csv, write_codebook, write_matrix)
from hbfkit.linalg import AnalogPrecoder, Codebook
from hbfkit.ss import SsBurst

from conftest import random_complex

GOOD_INI = """
[system]
n_t = 16
n_rf = 4
n_u = 2
k_ss = 8
noise_power_dbw = -120.0
seed = 7
n_b = 8

[scenario]
area = limited
grid_x = 4
grid_y = 4

[ga]
population = 64
elites = 4

[train]
trunk_widths = 64, 64
epochs = 3
"""


class TestConfig:
    def test_load_good_file(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text(GOOD_INI)
        cfg = load_config(path)
        assert cfg.system.n_t == 16 and cfg.system.n_b == 8
        assert cfg.scenario.grid_x == 4
        assert cfg.ga.population == 64
        assert cfg.train.trunk_widths == (64, 64)
        assert cfg.system.sigma2 == pytest.approx(1e-12)

    def test_missing_required_key_names_it(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text(GOOD_INI.replace("n_t = 16\n", ""))
        with pytest.raises(ConfigError, match="system.n_t"):
            load_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text(GOOD_INI + "\nbogus_key = 1\n")
        with pytest.raises(ConfigError, match="bogus_key"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.ini")

    def test_invariants(self):
        with pytest.raises(ConfigError):
            SystemConfig(n_t=4, n_rf=8, n_u=2, k_ss=4, noise_power_dbw=-120, seed=0)
        with pytest.raises(ConfigError):
            SystemConfig(n_t=8, n_rf=4, n_u=6, k_ss=4, noise_power_dbw=-120, seed=0)
        with pytest.raises(ConfigError):
            SystemConfig(n_t=8, n_rf=4, n_u=2, k_ss=0, noise_power_dbw=-120, seed=0)
        with pytest.raises(ConfigError):
            SystemConfig(n_t=8, n_rf=4, n_u=2, k_ss=4, noise_power_dbw=-120,
                         seed=0, n_b=0)

    def test_full_precision_accepted(self):
        cfg = SystemConfig(n_t=8, n_rf=4, n_u=2, k_ss=4, noise_power_dbw=-120,
                           seed=0, n_b="full")
        assert cfg.full_precision and cfg.rssi_bits == 64

    def test_ga_defaults_from_problem(self):
        cfg = SystemConfig(n_t=8, n_rf=2, n_u=2, k_ss=4, noise_power_dbw=-120, seed=0)
        run = RunConfig(system=cfg)
        assert run.ga_params().population == 1600

    def test_snapshot_round_trips_json(self, tmp_path):
        import json
        path = tmp_path / "run.ini"
        path.write_text(GOOD_INI)
        snap = load_config(path).snapshot()
        assert json.loads(json.dumps(snap)) == snap


class TestMatrixFile:
    def test_round_trip(self, tmp_path, rng):
        m = random_complex(rng, 5, 3)
        path = tmp_path / "m.cmx"
        write_matrix(path, m)
        assert np.array_equal(read_matrix(path), m)
        assert path.stat().st_size == 16 + 5 * 3 * 16

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.cmx"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 24)
        with pytest.raises(IntegrityError, match="magic"):
            read_matrix(path)

    def test_truncated(self, tmp_path, rng):
        path = tmp_path / "m.cmx"
        write_matrix(path, random_complex(rng, 4, 2))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(IntegrityError):
            read_matrix(path)

    def test_hash_stable(self, tmp_path, rng):
        m = random_complex(rng, 3, 3)
        p1, p2 = tmp_path / "a.cmx", tmp_path / "b.cmx"
        write_matrix(p1, m)
        write_matrix(p2, m)
        assert sha256_file(p1) == sha256_file(p2)


class TestBurstFile:
    def test_round_trip(self, tmp_path, rng):
        burst = SsBurst(codes=rng.integers(0, 4, size=(4, 8), dtype=np.uint8),
                        beta=2.5e-11)
        path = tmp_path / "burst.csv"
        write_burst_csv(path, burst, calibration_hash="abc123")
        loaded, cal = read_burst_csv(path)
        assert np.array_equal(loaded.codes, burst.codes)
        assert loaded.beta == pytest.approx(burst.beta)
        assert cal == "abc123"

    def test_header_required(self, tmp_path):
        path = tmp_path / "burst.csv"
        path.write_text("0,1,2,3\n")
        with pytest.raises(IntegrityError):
            read_burst_csv(path)


class TestCodebookFile:
    def _cb(self, rng, size=5):
        seen, out = set(), []
        while len(out) < size:
            ap = AnalogPrecoder(rng.integers(0, 4, size=(6, 3), dtype=np.uint8))
            if ap.key() not in seen:
                seen.add(ap.key())
                out.append(ap)
        return Codebook(tuple(out))

    def test_round_trip(self, tmp_path, rng):
        from hbfkit.config import CodebookBuildParams
        cb = self._cb(rng)
        path = tmp_path / "cb.apcb"
        write_codebook(path, cb, CodebookBuildParams(), core_hash="deadbeef")
        loaded, header = read_codebook(path)
        assert len(loaded) == len(cb)
        assert header["core_hash"] == "deadbeef"
        assert header["build_params"]["xi"] == 1.005
        for a, b in zip(loaded.codewords, cb.codewords):
            assert a == b

    def test_csv_export(self, tmp_path, rng):
        cb = self._cb(rng, size=2)
        path = tmp_path / "cb.csv"
        codebook_to_csv(path, cb)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "codeword,row,codes"
        assert len(lines) == 1 + 2 * 6
