import json
import re

import numpy as np
import pytest

from cqnls import cli, library
from cqnls.evolution import EvolutionConfig, WaveField, evolve
from cqnls.observables import diagnostics


class TestLibraryRecord:
    def test_profile_round_trip_bit_exact(self, q3, tmp_path):
        path = library.save_profile(q3, tmp_path / "q.txt")
        back = library.load_profile(path)
        np.testing.assert_array_equal(back.values, q3.values)
        assert (back.d, back.omega, back.grid.N, back.grid.s0) == (3, 0.1, 300, 1e3)
        np.testing.assert_array_equal(back.grid.s_nodes, q3.grid.s_nodes)

    def test_header_reproduces_diagnostics(self, q2, tmp_path):
        path = library.save_profile(q2, tmp_path / "q.txt")
        header = library.LibraryRecord.load(path).header
        diag = diagnostics(library.load_profile(path).grid, q2.values)
        for key in ("mass", "energy", "linf"):
            assert abs(header[key] - getattr(diag, key)) <= 1e-12 * max(1.0, abs(header[key]))

    def test_field_round_trip(self, q3, tmp_path):
        f = WaveField(q3.grid, q3.values * np.exp(0.4j), 2.5)
        back = library.load_field(library.save_field(f, tmp_path / "f.txt"))
        np.testing.assert_array_equal(back.values, f.values)
        assert back.time == 2.5

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        library.atomic_write(tmp_path / "sub" / "a.txt", "x\n")
        assert [p.name for p in (tmp_path / "sub").iterdir()] == ["a.txt"]

    def test_library_env(self, monkeypatch, tmp_path):
        monkeypatch.setenv(library.LIBRARY_ENV, str(tmp_path))
        assert library.library_dir() == tmp_path
        assert library.library_dir("elsewhere").name == "elsewhere"


class TestCSV:
    def test_branch_csv(self, branch2, tmp_path):
        path = library.write_branch_csv(branch2, tmp_path / "b.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "omega,mass,energy,linf"
        assert len(lines) == 41
        assert all(re.fullmatch(r"-?\d\.\d{16}e[+-]\d\d", f) for f in lines[1].split(","))
        back = library.read_branch_csv(path, 2)
        np.testing.assert_allclose(back.masses, branch2.masses, rtol=1e-15)
        assert np.all(np.diff(back.omegas) > 0)

    def test_trajectory_csv(self, q3, tmp_path):
        tr = evolve(WaveField(q3.grid, q3.values), EvolutionConfig(0.1, 10, record_stride=5))
        path = library.write_trajectory_csv(tr, tmp_path / "t.csv")
        assert path.read_text().splitlines()[0] == "t,linf,mass,energy,delta_E"
        data = library.read_trajectory_csv(path)
        np.testing.assert_allclose(data["t"], [0.0, 0.05, 0.1])
        np.testing.assert_allclose(data["mass"], tr.mass_series, rtol=1e-15)


class TestCommands:
    def test_omega_out_of_range(self, tmp_path, capsys):
        assert cli.main(["groundstate", "--d", "2", "--omega", "0.2", "--out", str(tmp_path / "q")]) == 2
        assert "3/16" in capsys.readouterr().err

    def test_no_convergence(self, tmp_path, capsys):
        args = ["groundstate", "--d", "2", "--omega", "0.1", "--N", "60", "--tol", "1e-30",
                "--out", str(tmp_path / "q")]
        assert cli.main(args) == 3
        assert "alpha" in capsys.readouterr().err

    def test_groundstate_prints_pohozaev(self, tmp_path, capsys):
        out = tmp_path / "q3.txt"
        assert cli.main(["groundstate", "--d", "3", "--omega", "0.1", "--out", str(out)]) == 0
        text = capsys.readouterr().out
        r1, r2 = (float(x) for x in text.split("pohozaev =")[1].split()[:2])
        assert max(r1, r2) <= 1e-6
        assert library.load_profile(out).grid.N == 400

    def test_grid_independence(self, tmp_path):
        masses = []
        for N in (300, 400):
            out = tmp_path / f"q{N}.txt"
            assert cli.main(["groundstate", "--d", "2", "--omega", "0.1", "--N", str(N),
                             "--out", str(out)]) == 0
            masses.append(library.LibraryRecord.load(out).header["mass"])
        assert abs(masses[0] / masses[1] - 1) <= 1e-7

    def test_branch_3d(self, tmp_path, capsys):
        args = ["branch", "--d", "3", "--omega-min", "0.005", "--omega-max", "0.16",
                "--points", "60", "--out-dir", str(tmp_path), "--N", "300"]
        assert cli.main(args) == 0
        out = capsys.readouterr().out
        omega_crit = float(out.split("omega_crit =")[1].split()[0])
        assert omega_crit == pytest.approx(0.026, abs=0.004)
        branch = library.read_branch_csv(tmp_path / "branch_d3.csv", 3)
        assert len(branch) == 60
        assert len(list((tmp_path / "profiles").iterdir())) == 60

    def test_branch_3d_energy_mass_cusp(self, branch3):
        """E against M has two arms meeting at the mass minimum."""
        i = int(np.argmin(branch3.masses))
        low, high = slice(0, i + 1), slice(i, None)
        # along each arm the mass moves in opposite directions...
        assert np.all(np.diff(branch3.masses[low]) < 0)
        assert np.all(np.diff(branch3.masses[high]) > 0)
        # ...and dE/dM = -omega, so the arms have different slopes at the cusp
        dEdM = np.diff(branch3.energies) / np.diff(branch3.masses)
        mid = 0.5 * (branch3.omegas[1:] + branch3.omegas[:-1])
        far = np.abs(mid - branch3.omegas[i]) > 0.005
        np.testing.assert_allclose(dEdM[far], -mid[far], rtol=0.05)

    def test_branch_2d_monotone(self, tmp_path, capsys):
        args = ["branch", "--d", "2", "--omega-min", "0.005", "--omega-max", "0.16",
                "--points", "12", "--out-dir", str(tmp_path), "--N", "300", "--no-profiles"]
        assert cli.main(args) == 0
        assert "monotone" in capsys.readouterr().out

    def test_evolve_soliton(self, q3, tmp_path, capsys):
        init = library.save_profile(q3, tmp_path / "q.txt")
        args = ["evolve", "--init", str(init), "--perturb", "mult:1.0", "--tf", "1",
                "--nt", "1000", "--record-stride", "100", "--snapshot", "0.5",
                "--out-dir", str(tmp_path / "run")]
        assert cli.main(args) == 0
        out = capsys.readouterr().out
        dev = float(out.split("max |u - exp(i omega t) Q|")[1].split("=")[1].split()[0])
        assert dev <= 1e-7
        assert (tmp_path / "run" / "final_field.txt").exists()
        assert (tmp_path / "run" / "snapshot_t0.5.txt").exists()
        lines = (tmp_path / "run" / "trajectory.csv").read_text().splitlines()
        assert lines[0] == "t,linf,mass,energy,delta_E" and len(lines) == 12

    def test_evolve_bad_perturbation(self, q3, tmp_path):
        init = library.save_profile(q3, tmp_path / "q.txt")
        args = ["evolve", "--init", str(init), "--perturb", "blob:1", "--tf", "1", "--nt", "10",
                "--out-dir", str(tmp_path)]
        assert cli.main(args) == 2

    def test_evolve_s0_override(self, q3, tmp_path):
        init = library.save_profile(q3, tmp_path / "q.txt")
        args = ["evolve", "--init", str(init), "--tf", "0.1", "--nt", "10", "--s0-override", "2000",
                "--out-dir", str(tmp_path / "run")]
        assert cli.main(args) == 0
        assert library.load_field(tmp_path / "run" / "final_field.txt").grid.s0 == 2000.0

    def test_experiment_explicit_and_expect(self, tmp_path, capsys):
        base = ["experiment", "--d", "2", "--omega", "0.1", "--perturb", "mult:0.99", "--tf", "1",
                "--nt", "100", "--N", "200", "--label", "quick", "--out-dir", str(tmp_path)]
        assert cli.main(base + ["--expect", "stable"]) == 0
        doc = json.loads((tmp_path / "quick.json").read_text())
        assert doc["verdict"] == "stable"
        assert doc["files"]["trajectory_csv"] == "quick.csv"
        assert (tmp_path / "quick.csv").exists()
        assert cli.main(base + ["--expect", "dispersive"]) == 5

    def test_unknown_scenario(self, tmp_path):
        assert cli.main(["experiment", "--scenario", "nope", "--out-dir", str(tmp_path)]) == 2
