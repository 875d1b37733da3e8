import csv
import json

import numpy as np
import pytest

from bridgetree import DiscreteMeasure, load_measure, save_measure
from bridgetree.cli import main
from conftest import GMM_SPEC, random_measures


def write_measures(tmp_path, measures, prefix="m"):
    paths = []
    for i, m in enumerate(measures, 1):
        p = tmp_path / f"{prefix}{i}.json"
        save_measure(m, p)
        paths.append(str(p))
    return paths


def read_ranked_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def spec_path(tmp_path):
    p = tmp_path / "mixtures.json"
    p.write_text(json.dumps(GMM_SPEC))
    return str(p)


class TestGen:
    def test_writes_one_file_per_mixture(self, tmp_path, spec_path, capsys):
        rc = main(["gen", spec_path, "--n", "4", "--seed", "7", "--out-dir", str(tmp_path / "out")])
        assert rc == 0
        files = sorted((tmp_path / "out").glob("measure_*.json"))
        assert len(files) == 5
        for f in files:
            m = load_measure(f)
            assert m.n == 4
            assert np.allclose(m.weights, 0.25)
            assert np.all(np.abs(m.support) <= 10.0)
        listed = capsys.readouterr().out.strip().splitlines()
        assert len(listed) == 5

    def test_same_seed_byte_identical(self, tmp_path, spec_path):
        main(["gen", spec_path, "--n", "6", "--seed", "3", "--out-dir", str(tmp_path / "a")])
        main(["gen", spec_path, "--n", "6", "--seed", "3", "--out-dir", str(tmp_path / "b")])
        for fa in sorted((tmp_path / "a").glob("*.json")):
            fb = tmp_path / "b" / fa.name
            assert fa.read_bytes() == fb.read_bytes()

    def test_single_sample_measures(self, tmp_path, spec_path):
        rc = main(["gen", spec_path, "--n", "1", "--seed", "0", "--out-dir", str(tmp_path / "o")])
        assert rc == 0
        m = load_measure(next((tmp_path / "o").glob("*.json")))
        assert m.n == 1 and m.weights[0] == 1.0

    def test_malformed_spec_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        rc = main(["gen", str(bad), "--out-dir", str(tmp_path)])
        assert rc == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["type"] == "validation"


class TestSolve:
    def test_two_diracs_distance_over_eta(self, tmp_path, capsys):
        ms = [DiscreteMeasure([[0.0, 0.0]], [1.0]), DiscreteMeasure([[3.0, 4.0]], [1.0])]
        paths = write_measures(tmp_path, ms)
        out = tmp_path / "out"
        rc = main(["solve", *paths, "--eta", "2.0", "--cost", "euclidean",
                   "--out-dir", str(out)])
        assert rc == 0
        tree = json.loads((out / "tree.json").read_text())
        assert tree["edges"] == [[1, 2]]
        assert tree["prufer"] == []
        assert tree["cost"] == pytest.approx(5.0 / 2.0, abs=1e-12)

    def test_output_files_complete(self, tmp_path, rng):
        paths = write_measures(tmp_path, random_measures(rng, [3, 2, 3]))
        out = tmp_path / "out"
        rc = main(["solve", *paths, "--eta", "1.0", "--out-dir", str(out)])
        assert rc == 0
        assert (out / "weights.csv").read_text().startswith("vertex,1,2,3")
        assert (out / "tree.dot").read_text().startswith("graph tree {")
        report = json.loads((out / "report.json").read_text())
        assert report["s"] == 3
        assert len(report["edges"]) == 3
        for row in report["edges"]:
            assert row["converged"]
        prufer = (out / "prufer.txt").read_text().strip()
        assert prufer == " ".join(str(c) for c in report["tree"]["prufer"])

    def test_weight_csv_roundtrip(self, tmp_path, rng):
        paths = write_measures(tmp_path, random_measures(rng, [2, 3, 2]))
        out = tmp_path / "out"
        main(["solve", *paths, "--eta", "1.0", "--out-dir", str(out)])
        rows = (out / "weights.csv").read_text().strip().splitlines()
        parsed = np.array([[float(x) for x in r.split(",")[1:]] for r in rows[1:]])
        assert parsed.shape == (3, 3)
        assert np.array_equal(parsed, parsed.T)

    def test_unreadable_file_exit_2_names_path(self, tmp_path, capsys):
        rc = main(["solve", str(tmp_path / "nope.json"), str(tmp_path / "nope2.json"),
                   "--eta", "1.0", "--out-dir", str(tmp_path)])
        assert rc == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["type"] == "io"
        assert "nope.json" in err["error"]["message"]

    def test_nonconvergence_exit_1(self, tmp_path, capsys):
        ms = [DiscreteMeasure([[-8.0], [9.0]], [0.4, 0.6]),
              DiscreteMeasure([[-7.5], [8.5]], [0.7, 0.3])]
        paths = write_measures(tmp_path, ms)
        rc = main(["solve", *paths, "--eta", "1.0", "--max-iter", "2",
                   "--out-dir", str(tmp_path)])
        assert rc == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["type"] == "numerical"

    def test_matrix_cost_flag(self, tmp_path):
        ms = [DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5]),
              DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])]
        paths = write_measures(tmp_path, ms)
        mat = tmp_path / "cost.csv"
        mat.write_text("0.0,1.0\n1.0,0.0\n")
        out = tmp_path / "out"
        rc = main(["solve", *paths, "--eta", "1.0", "--cost", f"matrix:{mat}",
                   "--out-dir", str(out)])
        assert rc == 0
        tree = json.loads((out / "tree.json").read_text())
        # frozen value for the uniform swap-cost edge: sb of the 2x2 instance
        assert tree["cost"] == pytest.approx(-1.0064088680781682, abs=1e-12)


class TestReproducibility:
    def test_solve_outputs_byte_identical_across_runs(self, tmp_path, rng):
        # deterministic files only; report.json carries wall-clock timings
        paths = write_measures(tmp_path, random_measures(rng, [3, 2, 3]))
        for d in ("r1", "r2"):
            assert main(["solve", *paths, "--eta", "1.0", "--threads", "1",
                         "--out-dir", str(tmp_path / d)]) == 0
        for name in ("weights.csv", "tree.json", "tree.dot", "prufer.txt"):
            assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()

    def test_enumerate_output_byte_identical_across_runs(self, tmp_path, rng):
        paths = write_measures(tmp_path, random_measures(rng, [2, 3, 2]))
        for d in ("e1", "e2"):
            assert main(["enumerate", *paths, "--eta", "1.0", "--top-k", "0",
                         "--out-dir", str(tmp_path / d)]) == 0
        assert ((tmp_path / "e1" / "trees_ranked.csv").read_bytes()
                == (tmp_path / "e2" / "trees_ranked.csv").read_bytes())


class TestWeights:
    def test_writes_matrix_only(self, tmp_path, rng, capsys):
        paths = write_measures(tmp_path, random_measures(rng, [2, 2, 3]))
        out = tmp_path / "w"
        rc = main(["weights", *paths, "--eta", "1.0", "--out-dir", str(out)])
        assert rc == 0
        assert (out / "weights.csv").exists()
        assert not (out / "tree.json").exists()
        assert "g[1,2]" in capsys.readouterr().out


class TestEnumerate:
    def test_three_measures_three_rows(self, tmp_path, rng):
        paths = write_measures(tmp_path, random_measures(rng, [2, 3, 2]))
        out = tmp_path / "e"
        rc = main(["enumerate", *paths, "--eta", "1.0", "--top-k", "0",
                   "--out-dir", str(out)])
        assert rc == 0
        rows = read_ranked_csv(out / "trees_ranked.csv")
        assert len(rows) == 3
        costs = [float(r["cost_additive"]) for r in rows]
        assert costs == sorted(costs)
        for r in rows:
            assert abs(float(r["cost_additive"]) - float(r["cost_direct"])) <= 1e-6

    def test_top_k_limits_rows(self, tmp_path, rng):
        paths = write_measures(tmp_path, random_measures(rng, [2, 2, 2, 2]))
        out = tmp_path / "e"
        rc = main(["enumerate", *paths, "--eta", "1.0", "--top-k", "5",
                   "--direct", "never", "--out-dir", str(out)])
        assert rc == 0
        rows = read_ranked_csv(out / "trees_ranked.csv")
        assert len(rows) == 5
        assert all(r["cost_direct"] == "" for r in rows)

    def test_solve_tree_is_rank_one(self, tmp_path, rng):
        paths = write_measures(tmp_path, random_measures(rng, [3, 2, 3, 2]))
        out_s = tmp_path / "s"
        out_e = tmp_path / "e"
        assert main(["solve", *paths, "--eta", "1.5", "--out-dir", str(out_s)]) == 0
        assert main(["enumerate", *paths, "--eta", "1.5", "--direct", "never",
                     "--out-dir", str(out_e)]) == 0
        tree = json.loads((out_s / "tree.json").read_text())
        rows = read_ranked_csv(out_e / "trees_ranked.csv")
        assert rows[0]["prufer"] == " ".join(str(c) for c in tree["prufer"])
        assert abs(float(rows[0]["cost_additive"]) - tree["cost"]) <= 1e-9

    def test_enumeration_cap_refusal(self, tmp_path, rng, capsys):
        paths = write_measures(tmp_path, random_measures(rng, [2] * 9))
        rc = main(["enumerate", *paths, "--eta", "1.0", "--out-dir", str(tmp_path)])
        assert rc == 2
        err = json.loads(capsys.readouterr().err)
        assert "cap" in err["error"]["message"]


class TestOracle:
    def test_zero_cost_instance_tiny_gaps(self, tmp_path, rng, capsys):
        ms = random_measures(rng, [2, 2, 2])
        paths = write_measures(tmp_path, ms)
        mat = tmp_path / "zero.csv"
        mat.write_text("0.0,0.0\n0.0,0.0\n")
        out = tmp_path / "o"
        rc = main(["oracle", *paths, "--eta", "1.0", "--cost", f"matrix:{mat}",
                   "--tree", "2", "--out-dir", str(out)])
        assert rc == 0
        report = json.loads((out / "oracle_report.json").read_text())
        assert report["sup_norm_gap"] < 1e-9
        assert report["cost_gap"] < 1e-9

    def test_random_small_instance_gaps(self, tmp_path, rng):
        ms = random_measures(rng, [3, 3, 3], low=-5, high=5)
        paths = write_measures(tmp_path, ms)
        out = tmp_path / "o"
        rc = main(["oracle", *paths, "--eta", "1.0", "--tree", "3", "--out-dir", str(out)])
        assert rc == 0
        report = json.loads((out / "oracle_report.json").read_text())
        assert report["sup_norm_gap"] < 1e-6
        assert report["cost_gap"] < 1e-6
        assert report["mm_converged"]

    def test_two_measures_empty_code(self, tmp_path, rng):
        ms = random_measures(rng, [3, 4], low=-5, high=5)
        paths = write_measures(tmp_path, ms)
        out = tmp_path / "o"
        rc = main(["oracle", *paths, "--eta", "1.0", "--tree", "", "--out-dir", str(out)])
        assert rc == 0
        report = json.loads((out / "oracle_report.json").read_text())
        assert report["sup_norm_gap"] < 1e-12

    def test_cap_exceeded_exit_2(self, tmp_path, rng, capsys):
        ms = random_measures(rng, [30, 30, 30])
        paths = write_measures(tmp_path, ms)
        rc = main(["oracle", *paths, "--eta", "1.0", "--tree", "2",
                   "--cap", "100", "--out-dir", str(tmp_path)])
        assert rc == 2
        err = json.loads(capsys.readouterr().err)
        assert "cap" in err["error"]["message"]
