import json

import numpy as np
import pytest

from gridsim.cli import main
from gridsim.statevec import read_amplitudes


@pytest.fixture()
def circuit_file(tmp_path):
    path = tmp_path / "circ.txt"
    assert main(["generate", "--rows", "3", "--cols", "3", "--depth", "10",
                 "--seed", "4", "-o", str(path)]) == 0
    return path


def run_ok(argv):
    assert main(argv) == 0


class TestGenerate:
    def test_stdout_roundtrip(self, capsys):
        run_ok(["generate", "--rows", "2", "--cols", "3", "--depth", "6"])
        text = capsys.readouterr().out
        assert text.splitlines()[0] == "6"
        assert all(line.split()[1] in {"h", "t", "x_1_2", "y_1_2", "cz"}
                   for line in text.splitlines()[1:])

    def test_directory_output_uses_canonical_name(self, tmp_path, capsys):
        run_ok(["generate", "--rows", "2", "--cols", "2", "--depth", "5",
                "--seed", "3", "-o", str(tmp_path)])
        assert (tmp_path / "inst_2x2_6_3.txt").exists()

    def test_rejects_bad_version(self, capsys):
        with pytest.raises(SystemExit):
            main(["generate", "--rows", "2", "--cols", "2", "--depth", "5",
                  "--version", "v9"])


class TestAudit:
    def test_json_report(self, circuit_file, capsys):
        run_ok(["audit", str(circuit_file), "--json"])
        report = json.loads(capsys.readouterr().out)
        assert report["n_qubits"] == 9
        assert report["n_cycles"] == 12
        assert report["czt_runs"] == 0
        assert report["has_final_h"] is True
        assert report["path_space"] == 1 << report["cross_gates"]

    def test_text_report(self, circuit_file, capsys):
        run_ok(["audit", str(circuit_file)])
        lines = dict(l.split(None, 1) for l in capsys.readouterr().out.splitlines())
        assert lines["n_qubits"] == "9"
        assert "cross_gates" in lines

    def test_missing_file_is_a_clean_error(self, capsys):
        assert main(["audit", "/nonexistent/file.txt"]) == 1
        assert capsys.readouterr().err.startswith("error:")


class TestSimulatePathsim:
    def test_exact_amplitudes_written(self, circuit_file, tmp_path):
        out = tmp_path / "state.amp"
        run_ok(["simulate", str(circuit_file), "-o", str(out), "--digits", "12"])
        batch, header = read_amplitudes(out)
        assert header["n_qubits"] == "9"
        assert batch.indices.size == 512
        assert float(np.sum(np.abs(batch.amps) ** 2)) == pytest.approx(1.0, abs=1e-4)

    def test_full_fidelity_pathsim_matches_simulate(self, circuit_file, tmp_path):
        exact = tmp_path / "exact.amp"
        hybrid = tmp_path / "hybrid.amp"
        run_ok(["simulate", str(circuit_file), "-o", str(exact), "--digits", "12"])
        run_ok(["pathsim", str(circuit_file), "--fidelity", "1.0", "-o", str(hybrid),
                "--digits", "12"])
        a, _ = read_amplitudes(exact)
        b, _ = read_amplitudes(hybrid)
        np.testing.assert_allclose(a.amps, b.amps, atol=1e-6)

    def test_index_file_restricts_output(self, circuit_file, tmp_path):
        idx_file = tmp_path / "idx.txt"
        idx_file.write_text("# three requests\n0\nff\n1a0\n")
        out = tmp_path / "some.amp"
        run_ok(["simulate", str(circuit_file), "--amps", str(idx_file), "-o", str(out)])
        batch, _ = read_amplitudes(out)
        np.testing.assert_array_equal(batch.indices, [0, 0xFF, 0x1A0])


class TestPlan:
    def test_reports_split(self, circuit_file, capsys):
        run_ok(["plan", str(circuit_file), "--fidelity", "0.25", "--xb", "0"])
        info = json.loads(capsys.readouterr().out)
        assert info["n_qubits"] == 9
        assert info["x_p"] == info["cross_gates"]
        assert info["path_space"] == info["prefix_space"] * info["branch_space"]
        assert info["jobs"] == max(1, round(0.25 * info["prefix_space"]))

    def test_forecast_block(self, circuit_file, tmp_path, capsys):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"C1": 2e-9, "C2": 1.1, "C3": 7e-9}))
        run_ok(["plan", str(circuit_file), "--params", str(params),
                "--n-a", "512", "--machine", "std-16"])
        info = json.loads(capsys.readouterr().out)
        fc = info["forecast"]
        assert fc["machine"] == "std-16"
        assert fc["t_clock_hours"] == pytest.approx(fc["t_bill_hours"])
        assert fc["cost"] == pytest.approx(fc["t_bill_hours"] * 0.72)


class TestSample:
    def test_bitstrings_and_summary(self, circuit_file, tmp_path, capsys):
        amp_file = tmp_path / "state.amp"
        run_ok(["simulate", str(circuit_file), "-o", str(amp_file), "--digits", "12"])
        out = tmp_path / "bits.txt"
        run_ok(["sample", "--amps", str(amp_file), "--count", "200",
                "--seed", "6", "-o", str(out)])
        summary = json.loads(capsys.readouterr().err)
        lines = out.read_text().splitlines()
        assert len(lines) == summary["accepted_count"]
        assert all(len(l) == 9 and set(l) <= {"0", "1"} for l in lines)
        assert summary["tail_mass"] >= 0.0
        assert 60 <= summary["accepted_count"] <= 500

    def test_partial_amplitude_file_rejected(self, circuit_file, tmp_path, capsys):
        idx_file = tmp_path / "idx.txt"
        idx_file.write_text("0\n1\n")
        amp_file = tmp_path / "partial.amp"
        run_ok(["simulate", str(circuit_file), "--amps", str(idx_file), "-o", str(amp_file)])
        assert main(["sample", "--amps", str(amp_file), "--count", "5"]) == 1
        assert "error:" in capsys.readouterr().err


class TestCampaign:
    def test_run_status_merge_cycle(self, circuit_file, tmp_path, capsys):
        shard_dir = tmp_path / "shards"
        plan_args = ["--fidelity", "0.5", "--xb", "0", "--seed", "2"]
        report = tmp_path / "report.json"
        run_ok(["campaign", "run", "--circuit", str(circuit_file), "--dir", str(shard_dir),
                "--workers", "2", "--report", str(report), *plan_args])
        capsys.readouterr()
        run_ok(["campaign", "status", "--circuit", str(circuit_file),
                "--dir", str(shard_dir), *plan_args])
        assert "complete=True" in capsys.readouterr().out
        merged = tmp_path / "merged.amp"
        run_ok(["merge", str(shard_dir), "--circuit", str(circuit_file),
                "-o", str(merged), *plan_args])
        direct = tmp_path / "direct.amp"
        run_ok(["pathsim", str(circuit_file), "--digits", "17", "-o", str(direct), *plan_args])
        a, _ = read_amplitudes(merged)
        b, _ = read_amplitudes(direct)
        np.testing.assert_allclose(a.amps, b.amps, atol=1e-7)
        assert json.loads(report.read_text())["jobs"] >= 1

    def test_resume_completes_after_loss(self, circuit_file, tmp_path, capsys):
        shard_dir = tmp_path / "shards"
        plan_args = ["--fidelity", "1.0", "--xb", "0"]
        run_ok(["campaign", "run", "--circuit", str(circuit_file),
                "--dir", str(shard_dir), *plan_args])
        victim = sorted(shard_dir.glob("*.amp"))[0]
        victim.unlink()
        run_ok(["campaign", "resume", "--circuit", str(circuit_file),
                "--dir", str(shard_dir), *plan_args])
        capsys.readouterr()
        run_ok(["campaign", "status", "--circuit", str(circuit_file),
                "--dir", str(shard_dir), *plan_args])
        assert "complete=True" in capsys.readouterr().out


class TestValidateProtocol:
    def test_full_round_over_files(self, tmp_path, capsys):
        circ = tmp_path / "circ.txt"
        run_ok(["generate", "--rows", "2", "--cols", "7", "--depth", "23",
                "--seed", "3", "-o", str(circ)])
        challenge = tmp_path / "challenge.json"
        run_ok(["validate", "verifier", str(circ), "--challenge", str(challenge),
                "--k", "2048", "--f1", "0.2", "--seed", "21"])
        private = json.loads((tmp_path / "challenge.json.private").read_text())
        assert 0 < private["f1"] < 1
        assert "f1" not in json.loads(challenge.read_text())
        response = tmp_path / "response.amp"
        run_ok(["validate", "claimant", str(circ), "--challenge", str(challenge),
                "--engine", "exact", "-o", str(response), "--digits", "12"])
        capsys.readouterr()
        assert main(["validate", "verifier", str(circ), "--challenge", str(challenge),
                     "--response", str(response), "--path-seed", "93"]) == 0
        assert capsys.readouterr().out.startswith("PASS")

        fake = tmp_path / "fake.amp"
        run_ok(["validate", "claimant", str(circ), "--challenge", str(challenge),
                "--engine", "random", "--seed", "8", "-o", str(fake)])
        capsys.readouterr()
        assert main(["validate", "verifier", str(circ), "--challenge", str(challenge),
                     "--response", str(fake), "--path-seed", "93"]) == 1
        assert capsys.readouterr().out.startswith("FAIL")
