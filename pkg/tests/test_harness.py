import hashlib
import json
import math
import os

import numpy as np
import pytest

from alloyspec.eig import eigh
from alloyspec.hamiltonian import free_hamiltonian
from alloyspec.harness.cli import build_parser, main
from alloyspec.harness.config import (
    EXPERIMENTS,
    ConfigError,
    config_hash,
    config_to_dict,
    default_config,
    load_config,
    read_raw_config,
    resolve_config,
)
from alloyspec.harness.io import (
    echo_config,
    format_value,
    sha256_file,
    write_csv,
    write_json,
    write_plot_data,
)
from alloyspec.harness.mc import run_trials, trial_mapper
from alloyspec.harness.pipelines import (
    ReferenceEnergyError,
    pick_reference_energy,
    run,
)
from alloyspec.lattice import PeriodicBox
from alloyspec.rng import trial_rng
from alloyspec.spectral_stats import estimate_ids


class TestDefaults:
    def test_every_experiment_has_a_default(self):
        for name in EXPERIMENTS:
            cfg = default_config(name)
            assert cfg.experiment == name
            assert cfg.seed == 20260817
            assert cfg.threads == 1
            assert cfg.backend == "lapack"

    def test_poisson_defaults(self):
        cfg = default_config("poisson")
        assert cfg.box_sizes == (500,)
        assert cfg.coupling == 4.0
        assert cfg.trials == 2000
        assert cfg.tolerance == 0.05
        assert cfg.intervals == ((0.0, 1.0), (-2.0, -1.0))
        assert cfg.counts_max == 2
        assert cfg.potential == {"kind": "delta"}

    def test_wegner_minami_defaults(self):
        cfg = default_config("wegner-minami")
        assert cfg.box_sizes == (100, 200, 400)
        assert cfg.interval_widths == (0.01, 0.05, 0.1, 0.3)
        assert cfg.reference_rule == "fixed:0.0"
        assert cfg.k_max == 2
        assert cfg.ratio_spread == 2.0
        assert cfg.minami_factor == 3.0
        assert cfg.trials == 2000

    def test_localization_defaults(self):
        cfg = default_config("localization")
        assert cfg.box_sizes == (200,)
        assert cfg.coupling == 10.0
        assert cfg.trials == 200
        assert cfg.eta_min == 0.5
        assert cfg.mass_radius == 20
        assert cfg.mass_level == 0.99
        assert cfg.mass_fraction == 0.95
        assert cfg.mass_radius in cfg.radii

    def test_wiener_defaults(self):
        cfg = default_config("wiener")
        assert cfg.profiles == (
            {"kind": "delta"},
            {"kind": "geometric", "ratio": 0.25},
        )
        assert cfg.torus == 512
        assert cfg.trials == 1

    def test_truncation_defaults(self):
        cfg = default_config("truncation")
        assert cfg.box_sizes == (100, 200, 300)
        assert cfg.coupling == 10.0
        assert cfg.trials == 200
        assert cfg.potential == {"kind": "polynomial", "exponent": 2.0, "radius": 50}
        assert cfg.decomposition == (0.01, 0.9, 0.7, 0.6)
        assert cfg.sandwich_level == 0.95

    def test_representation_defaults(self):
        cfg = default_config("representation")
        assert cfg.box_sizes == (100, 200, 300)
        assert cfg.coupling == 10.0
        assert cfg.trials == 200
        assert cfg.z_ok_level == 0.8
        assert cfg.interval_scale == 0.15
        assert cfg.decomposition == (0.01, 0.9, 0.7, 0.6)

    def test_lemmas_and_joint_defaults(self):
        lem = default_config("lemmas")
        assert lem.trials == 2000
        assert lem.instances == 200
        assert lem.independence_trials == 10000
        joint = default_config("joint")
        assert joint.trials == 200
        assert joint.tolerance == 0.01
        assert joint.box_sizes == (500,)


class TestValidation:
    def test_bad_experiment(self):
        with pytest.raises(ConfigError, match="experiment"):
            resolve_config({"experiment": "frobnicate"})

    def test_field_paths_in_messages(self):
        with pytest.raises(ConfigError, match="trials"):
            default_config("poisson", {"trials": 0})
        with pytest.raises(ConfigError, match=r"intervals\[1\]"):
            resolve_config(
                {"experiment": "poisson", "intervals": [[0, 1], [2, 1]]}
            )
        with pytest.raises(ConfigError, match="law.high"):
            resolve_config({"experiment": "poisson", "law": {"lo": 0, "high": 1}})
        with pytest.raises(ConfigError, match="dimension"):
            resolve_config({"experiment": "poisson", "dimension": 4})

    def test_unknown_keys_are_rejected(self):
        with pytest.raises(ConfigError, match="frobnicate"):
            resolve_config({"experiment": "poisson", "frobnicate": 1})
        # a key belonging to another experiment is unknown here
        with pytest.raises(ConfigError, match="intervals"):
            resolve_config({"experiment": "wegner-minami", "intervals": [[0, 1]]})
        with pytest.raises(ConfigError, match="box_sizes"):
            resolve_config({"experiment": "wiener", "box_sizes": [100]})

    def test_potential_validation(self):
        base = {"experiment": "poisson"}
        with pytest.raises(ConfigError, match="potential.kind"):
            resolve_config({**base, "potential": {"kind": "gaussian"}})
        with pytest.raises(ConfigError, match="potential.ratio"):
            resolve_config(
                {**base, "potential": {"kind": "geometric", "ratio": 1.5}}
            )
        with pytest.raises(ConfigError, match="potential.exponent"):
            resolve_config({**base, "potential": {"kind": "polynomial"}})
        with pytest.raises(ConfigError, match="potential.path"):
            resolve_config({**base, "potential": {"kind": "file"}})
        with pytest.raises(ConfigError, match="potential.exponent"):
            resolve_config(
                {**base, "potential": {"kind": "geometric", "exponent": 2}}
            )

    def test_reference_rule_validation(self):
        ok = resolve_config(
            {"experiment": "poisson", "reference_rule": "fixed:-1.5"}
        )
        assert ok.reference_rule == "fixed:-1.5"
        with pytest.raises(ConfigError, match="reference_rule"):
            resolve_config({"experiment": "poisson", "reference_rule": "midband"})
        with pytest.raises(ConfigError, match="reference_rule"):
            resolve_config({"experiment": "poisson", "reference_rule": "fixed:abc"})

    def test_booleans_are_not_integers(self):
        with pytest.raises(ConfigError, match="trials"):
            resolve_config({"experiment": "poisson", "trials": True})

    def test_seed_and_backend_bounds(self):
        with pytest.raises(ConfigError, match="seed"):
            resolve_config({"experiment": "poisson", "seed": 2**64})
        with pytest.raises(ConfigError, match="backend"):
            resolve_config({"experiment": "poisson", "backend": "cuda"})
        with pytest.raises(ConfigError, match="coupling"):
            resolve_config({"experiment": "poisson", "coupling": 0})

    def test_law_mapping_form(self):
        cfg = resolve_config(
            {"experiment": "poisson", "law": {"lo": -1.0, "hi": 1.0}}
        )
        assert cfg.law == (-1.0, 1.0)
        with pytest.raises(ConfigError, match="law"):
            resolve_config({"experiment": "poisson", "law": [1.0, -1.0]})

    def test_lemmas_trial_floor(self):
        with pytest.raises(ConfigError, match="trials"):
            resolve_config({"experiment": "lemmas", "trials": 500})

    def test_localization_radii_include_mass_radius(self):
        cfg = resolve_config(
            {"experiment": "localization", "radii": [5], "mass_radius": 20}
        )
        assert cfg.radii == (5, 20)

    def test_decomposition_mapping_form(self):
        cfg = resolve_config(
            {
                "experiment": "representation",
                "decomposition": {"rho_tilde": 0.02, "beta_prime": 0.65},
            }
        )
        assert cfg.decomposition == (0.02, 0.9, 0.7, 0.65)
        with pytest.raises(ConfigError, match="decomposition.gamma"):
            resolve_config(
                {"experiment": "representation", "decomposition": {"gamma": 1}}
            )

    def test_overrides(self):
        cfg = default_config("poisson", {"trials": 7, "out_dir": "elsewhere"})
        assert cfg.trials == 7
        assert cfg.out_dir == "elsewhere"
        # None overrides are "not given"
        cfg = default_config("poisson", {"seed": None})
        assert cfg.seed == 20260817


class TestSerialization:
    def test_config_to_dict_is_json_ready(self):
        cfg = default_config("poisson")
        payload = config_to_dict(cfg)
        text = json.dumps(payload)
        assert json.loads(text)["intervals"] == [[0.0, 1.0], [-2.0, -1.0]]
        assert json.loads(text)["experiment"] == "poisson"

    def test_hash_ignores_execution_fields(self):
        a = default_config("poisson")
        b = default_config("poisson", {"threads": 8, "out_dir": "elsewhere"})
        assert config_hash(a) == config_hash(b)

    def test_hash_tracks_physics_fields(self):
        a = default_config("poisson")
        assert config_hash(a) != config_hash(default_config("poisson", {"seed": 1}))
        assert config_hash(a) != config_hash(default_config("poisson", {"trials": 3}))
        assert config_hash(a) != config_hash(default_config("wegner-minami"))

    def test_file_roundtrip(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"experiment": "poisson", "trials": 11}))
        cfg = load_config(str(path), {"seed": 5})
        assert cfg.trials == 11
        assert cfg.seed == 5
        raw = read_raw_config(str(path))
        assert raw == {"experiment": "poisson", "trials": 11}

    def test_file_errors(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            read_raw_config(str(tmp_path / "absent.json"))
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            read_raw_config(str(bad))
        arr = tmp_path / "arr.json"
        arr.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="JSON object"):
            read_raw_config(str(arr))


class TestIo:
    def test_format_value(self):
        assert format_value(True) == "true"
        assert format_value(False) == "false"
        assert format_value(None) == ""
        assert format_value(5) == "5"
        assert format_value(1.0 / 3.0) == "0.3333333333333333"
        assert format_value("text") == "text"
        # numpy scalars render as their Python values
        assert format_value(np.float64(0.1)) == "0.1"
        assert format_value(np.int64(7)) == "7"
        assert format_value(np.bool_(True)) == "true"

    def test_float_cells_round_trip(self):
        for x in (0.1, 1e-300, -2.5e17, math.pi):
            assert float(format_value(x)) == x
            assert float(format_value(np.float64(x))) == x

    def test_write_csv(self, tmp_path):
        path = str(tmp_path / "t" / "table.csv")
        out = write_csv(path, ["a", "b"], [[1, 0.5], [np.float64(0.25), None]])
        assert out == path
        data = open(path, "rb").read()
        assert data == b"a,b\n1,0.5\n0.25,\n"

    def test_write_plot_data(self, tmp_path):
        path = str(tmp_path / "curve.dat")
        write_plot_data(path, [[1, 2], [0.5, np.float64(0.125)]])
        assert open(path).read() == "1 0.5\n2 0.125\n"
        with pytest.raises(ValueError):
            write_plot_data(path, [[1, 2], [1]])
        with pytest.raises(ValueError):
            write_plot_data(path, [])

    def test_write_json_stable_and_numpy_safe(self, tmp_path):
        path = str(tmp_path / "o.json")
        write_json(path, {"b": np.float64(0.5), "a": np.arange(3), "c": (1, 2)})
        text = open(path).read()
        assert text.endswith("\n")
        assert text.index('"a"') < text.index('"b"') < text.index('"c"')
        assert json.loads(text) == {"b": 0.5, "a": [0, 1, 2], "c": [1, 2]}

    def test_echo_config(self, tmp_path):
        out = echo_config(str(tmp_path), {"config": {"x": 1}})
        assert os.path.basename(out) == "config_echo.json"
        assert json.load(open(out)) == {"config": {"x": 1}}

    def test_sha256_file(self, tmp_path):
        p = tmp_path / "blob"
        p.write_bytes(b"abc\n")
        assert sha256_file(str(p)) == hashlib.sha256(b"abc\n").hexdigest()


class TestMonteCarlo:
    def test_order_preserved_across_threads(self):
        def worker(t):
            return float(trial_rng(3, t).uniform())

        serial = run_trials(64, worker, threads=1)
        threaded = run_trials(64, worker, threads=8)
        assert serial == threaded
        assert serial == [worker(t) for t in range(64)]

    def test_edge_cases(self):
        assert run_trials(0, lambda t: t) == []
        assert run_trials(1, lambda t: t, threads=8) == [0]
        with pytest.raises(ValueError):
            run_trials(-1, lambda t: t)
        with pytest.raises(ValueError):
            run_trials(2, lambda t: t, threads=0)

    def test_trial_mapper(self):
        mapper = trial_mapper(4)
        assert list(mapper(lambda i: i * i, range(10))) == [i * i for i in range(10)]
        assert list(trial_mapper(1)(lambda i: -i, [3, 1])) == [-3, -1]


@pytest.fixture(scope="module")
def free_ids():
    spec = eigh(free_hamiltonian(PeriodicBox(1, 200)), vectors=False, certify=False)
    return estimate_ids([spec], np.linspace(-2.5, 2.5, 1001))


class TestReferenceEnergy:
    def test_band_center_rule(self, free_ids):
        ref = pick_reference_energy(free_ids, "band-center")
        assert abs(ref.energy) <= 0.02
        assert ref.ids_level == pytest.approx(0.5, abs=0.01)
        assert ref.density == pytest.approx(1.0 / (2.0 * math.pi), rel=0.05)
        assert ref.rule == "band-center"
        assert ref.bandwidth >= 0.05
        assert ref.density_half_bandwidth > 0
        assert ref.density_double_bandwidth > 0

    def test_fixed_rule(self, free_ids):
        ref = pick_reference_energy(free_ids, "fixed:1.0")
        assert ref.energy == 1.0
        assert ref.density > 0.1

    def test_fixed_rule_outside_spectrum(self, free_ids):
        with pytest.raises(ReferenceEnergyError, match="outside"):
            pick_reference_energy(free_ids, "fixed:3.5")

    def test_flat_region_rejected(self):
        # two clusters with a hard gap at zero: the IDS is flat there
        half = np.linspace(-6.0, -4.0, 200)
        spec_vals = np.concatenate([half, -half[::-1]])
        from alloyspec.eig import Spectrum

        spec = Spectrum(
            eigenvalues=np.sort(spec_vals),
            eigenvectors=None,
            grid=None,
            backend="synthetic",
            residual=None,
            gram_error=None,
        )
        ids = estimate_ids([spec], np.linspace(-7, 7, 701))
        with pytest.raises(ReferenceEnergyError, match="below the usable threshold"):
            pick_reference_energy(ids, "fixed:0.0")

    def test_unknown_rule(self, free_ids):
        with pytest.raises(ValueError):
            pick_reference_energy(free_ids, "median")


def _small_wegner_raw(out_dir, threads=1, trials=12):
    return {
        "experiment": "wegner-minami",
        "box_sizes": [8],
        "interval_widths": [0.1, 0.3],
        "trials": trials,
        "pilot_trials": 20,
        "ids_grid_points": 201,
        "seed": 99,
        "threads": threads,
        "out_dir": out_dir,
    }


class TestRunArtifacts:
    def test_small_run_writes_summary_and_echo(self, tmp_path):
        out = str(tmp_path / "run1")
        summary = run(resolve_config(_small_wegner_raw(out)))
        assert summary.experiment == "wegner-minami"
        assert os.path.exists(os.path.join(out, "summary.json"))
        assert os.path.exists(os.path.join(out, "config_echo.json"))
        blob = json.load(open(os.path.join(out, "summary.json")))
        assert blob["experiment"] == "wegner-minami"
        assert blob["config_hash"] == summary.config_hash
        assert set(blob["verdicts"]) == set(summary.verdicts)
        assert "numpy" in blob["versions"]
        echo = json.load(open(os.path.join(out, "config_echo.json")))
        assert echo["config_hash"] == summary.config_hash
        assert echo["config"]["trials"] == 12
        for name in summary.artifacts:
            assert os.path.exists(os.path.join(out, name))

    def test_byte_identical_artifacts_across_thread_budgets(self, tmp_path):
        out1 = str(tmp_path / "t1")
        out8 = str(tmp_path / "t8")
        s1 = run(resolve_config(_small_wegner_raw(out1, threads=1)))
        s8 = run(resolve_config(_small_wegner_raw(out8, threads=8)))
        assert s1.config_hash == s8.config_hash
        assert s1.artifacts == s8.artifacts
        compared = 0
        for name in s1.artifacts:
            if name.endswith((".csv", ".dat")):
                a = sha256_file(os.path.join(out1, name))
                b = sha256_file(os.path.join(out8, name))
                assert a == b, name
                compared += 1
        assert compared > 0
        assert s1.verdicts == s8.verdicts

    def test_csv_cells_parse_back_as_numbers(self, tmp_path):
        out = str(tmp_path / "run2")
        summary = run(resolve_config(_small_wegner_raw(out)))
        checked = 0
        for name in summary.artifacts:
            if not name.endswith(".csv"):
                continue
            with open(os.path.join(out, name)) as fh:
                header = fh.readline()
                assert "np.float64" not in header
                for line in fh:
                    assert "np.float64" not in line
                    checked += 1
        assert checked > 0


class TestCli:
    def test_parser_covers_every_experiment(self):
        parser = build_parser()
        args = parser.parse_args(["poisson", "--trials", "3", "--seed", "0x10"])
        assert args.experiment == "poisson"
        assert args.trials == 3
        assert args.seed == 16

    def test_unknown_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(["anderson"])
        assert info.value.code == 2

    def test_config_error_returns_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"experiment": "poisson", "trials": 0}))
        code = main(["poisson", "--config", str(bad)])
        assert code == 2
        assert "trials" in capsys.readouterr().err

    def test_experiment_mismatch_returns_two(self, tmp_path, capsys):
        cfg = tmp_path / "w.json"
        cfg.write_text(json.dumps({"experiment": "poisson"}))
        code = main(["wiener", "--config", str(cfg)])
        assert code == 2
        assert "experiment" in capsys.readouterr().err

    def test_wiener_run_passes(self, tmp_path, capsys):
        out = str(tmp_path / "w")
        code = main(["wiener", "--out", out, "--check"])
        captured = capsys.readouterr().out
        assert code == 0
        assert "[PASS]" in captured
        assert "[FAIL]" not in captured
        assert os.path.exists(os.path.join(out, "summary.json"))

    def test_check_flag_turns_failure_into_exit_three(self, tmp_path, capsys):
        cfg = tmp_path / "p.json"
        cfg.write_text(
            json.dumps(
                {
                    "experiment": "poisson",
                    "box_sizes": [10],
                    "trials": 4,
                    "pilot_trials": 20,
                    "ids_grid_points": 201,
                    "tolerance": 1e-9,
                }
            )
        )
        args = ["poisson", "--config", str(cfg), "--out", str(tmp_path / "p1")]
        assert main(args) == 0  # failing verdicts alone do not change the exit code
        out = capsys.readouterr().out
        assert "[FAIL]" in out
        assert main(args + ["--check"]) == 3

    def test_trials_override_applies(self, tmp_path, capsys):
        out = str(tmp_path / "w2")
        code = main(["wiener", "--out", out, "--trials", "1"])
        assert code == 0
        echo = json.load(open(os.path.join(out, "config_echo.json")))
        assert echo["config"]["trials"] == 1
