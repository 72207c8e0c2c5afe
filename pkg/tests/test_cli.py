import json

import numpy as np
import pytest

from sep2n.cli import (
    certificate_from_json,
    certificate_to_json,
    generate_state,
    load_state,
    main,
    state_to_json,
)
from sep2n.matrixcore import partial_transpose_matrix
from sep2n.sepengine import analyze

from helpers import build_separable, eig_rank


def write_state(path, matrix, n, **kwargs):
    with open(path, "w") as fh:
        json.dump(state_to_json(matrix, n, **kwargs), fh)


class TestGenerate:
    def test_rank_n_separable(self, tmp_path):
        out = tmp_path / "s.json"
        assert main(["generate", "--kind", "rank-n-separable", "--n", "4",
                     "--seed", "5", "--out", str(out)]) == 0
        state, doc = load_state(out)
        assert state.rank == 4 == eig_rank(state.matrix)
        assert abs(state.trace - 1.0) < 1e-12

    def test_pt_invariant(self, tmp_path):
        out = tmp_path / "s.json"
        assert main(["generate", "--kind", "pt-invariant", "--n", "3",
                     "--seed", "1", "--out", str(out)]) == 0
        state, _ = load_state(out)
        assert np.linalg.norm(state.matrix - state.pt_matrix, 2) <= 1e-12

    def test_npt(self, tmp_path):
        out = tmp_path / "s.json"
        assert main(["generate", "--kind", "npt", "--n", "2", "--out", str(out)]) == 0
        state, _ = load_state(out)
        assert state.pt_min_eigenvalue < 0

    def test_deterministic_for_seed(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["generate", "--kind", "separable", "--n", "3", "--seed", "9", "--out", str(a)])
        main(["generate", "--kind", "separable", "--n", "3", "--seed", "9", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestAnalyzeCommand:
    def test_npt_exit_code(self, tmp_path):
        s = tmp_path / "npt.json"
        main(["generate", "--kind", "npt", "--n", "2", "--out", str(s)])
        assert main(["analyze", str(s)]) == 2

    def test_separable_roundtrip(self, tmp_path):
        s = tmp_path / "sep.json"
        main(["generate", "--kind", "rank-n-separable", "--n", "3", "--seed", "2",
              "--out", str(s)])
        report_path = tmp_path / "r.json"
        assert main(["analyze", str(s), "--report", str(report_path)]) == 0
        report = json.loads(report_path.read_text())
        assert report["report"]["verdict"] == "separable"
        assert report["report"]["reverified"] is True
        assert len(report["report"]["certificate"]["terms"]) == 3

    def test_non_hermitian_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        m = np.zeros((4, 4), dtype=complex)
        m[0, 1] = 1.0
        write_state(bad, m, 2)
        assert main(["analyze", str(bad)]) == 1

    def test_malformed_json_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["analyze", str(bad)]) == 1

    def test_deterministic_reports(self, tmp_path):
        s = tmp_path / "s.json"
        main(["generate", "--kind", "rank-n-separable", "--n", "4", "--seed", "7",
              "--out", str(s)])
        r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
        main(["analyze", str(s), "--report", str(r1)])
        main(["analyze", str(s), "--report", str(r2)])
        d1 = json.loads(r1.read_text())
        d2 = json.loads(r2.read_text())
        assert d1["report"] == d2["report"]  # timings live outside this key

    def test_tolerance_flag_recorded(self, tmp_path):
        s = tmp_path / "s.json"
        main(["generate", "--kind", "rank-n-separable", "--n", "2", "--seed", "3",
              "--out", str(s)])
        r = tmp_path / "r.json"
        main(["analyze", str(s), "--tol", "rank_rel_tol=1e-8", "--report", str(r)])
        report = json.loads(r.read_text())
        assert report["report"]["tolerances"]["rank_rel_tol"] == 1e-8

    def test_env_tolerance_file(self, tmp_path, monkeypatch):
        cfg = tmp_path / "tol.json"
        cfg.write_text(json.dumps({"cert_recon_tol": 1e-7}))
        monkeypatch.setenv("SEP2N_TOL_FILE", str(cfg))
        s = tmp_path / "s.json"
        main(["generate", "--kind", "rank-n-separable", "--n", "2", "--seed", "3",
              "--out", str(s)])
        r = tmp_path / "r.json"
        main(["analyze", str(s), "--report", str(r)])
        report = json.loads(r.read_text())
        assert report["report"]["tolerances"]["cert_recon_tol"] == 1e-7


class TestVerifyCommand:
    def test_matched_pair(self, tmp_path):
        s = tmp_path / "s.json"
        main(["generate", "--kind", "rank-n-separable", "--n", "3", "--seed", "4",
              "--out", str(s)])
        r = tmp_path / "r.json"
        main(["analyze", str(s), "--report", str(r)])
        assert main(["verify", str(s), str(r)]) == 0

    def test_wrong_state(self, tmp_path):
        s1, s2 = tmp_path / "s1.json", tmp_path / "s2.json"
        main(["generate", "--kind", "rank-n-separable", "--n", "3", "--seed", "4",
              "--out", str(s1)])
        main(["generate", "--kind", "rank-n-separable", "--n", "3", "--seed", "5",
              "--out", str(s2)])
        r = tmp_path / "r.json"
        main(["analyze", str(s1), "--report", str(r)])
        assert main(["verify", str(s2), str(r)]) != 0

    def test_flipped_weight_rejected(self, tmp_path):
        s = tmp_path / "s.json"
        main(["generate", "--kind", "rank-n-separable", "--n", "2", "--seed", "4",
              "--out", str(s)])
        r = tmp_path / "r.json"
        main(["analyze", str(s), "--report", str(r)])
        doc = json.loads(r.read_text())
        doc["report"]["certificate"]["terms"][0]["weight"] *= -1
        r2 = tmp_path / "r2.json"
        r2.write_text(json.dumps(doc["report"]))
        assert main(["verify", str(s), str(r2)]) != 0


class TestBatchCommand:
    def test_mixed_directory(self, tmp_path):
        d = tmp_path / "states"
        d.mkdir()
        for i, kind in enumerate(["rank-n-separable", "npt", "pt-invariant"]):
            main(["generate", "--kind", kind, "--n", "2", "--seed", str(i),
                  "--out", str(d / f"s{i}.json")])
        assert main(["batch", str(d), "--jobs", "2"]) == 0
        reports = sorted(p.name for p in d.glob("*.report.json"))
        assert reports == ["s0.report.json", "s1.report.json", "s2.report.json"]

    def test_empty_directory(self, tmp_path):
        d = tmp_path / "empty"
        d.mkdir()
        assert main(["batch", str(d)]) == 0

    def test_corrupt_file_recorded(self, tmp_path, capsys):
        d = tmp_path / "states"
        d.mkdir()
        main(["generate", "--kind", "rank-n-separable", "--n", "2", "--seed", "0",
              "--out", str(d / "good.json")])
        (d / "bad.json").write_text("{broken")
        assert main(["batch", str(d), "--jobs", "1"]) == 0
        out = capsys.readouterr().out
        assert "error" in out
        assert (d / "good.report.json").exists()
        assert not (d / "bad.report.json").exists()

    def test_aggregate_counts_match_generator_manifest(self, tmp_path):
        # generator labels are ground truth for the npt / separable kinds
        d = tmp_path / "states"
        d.mkdir()
        manifest = {}
        idx = 0
        for kind, expected in [("rank-n-separable", "separable"),
                               ("pt-invariant", "separable"),
                               ("npt", "entangled_npt")]:
            for seed in range(6):
                name = f"s{idx:02d}.json"
                main(["generate", "--kind", kind, "--n", str(2 + idx % 3),
                      "--seed", str(seed), "--out", str(d / name)])
                manifest[name] = expected
                idx += 1
        assert main(["batch", str(d), "--jobs", "3"]) == 0
        for name, expected in manifest.items():
            report = json.loads((d / name.replace(".json", ".report.json")).read_text())
            assert report["report"]["verdict"] == expected, name

    def test_desk_scale_n8(self, tmp_path):
        s = tmp_path / "big.json"
        main(["generate", "--kind", "rank-n-separable", "--n", "8", "--seed", "1",
              "--out", str(s)])
        r = tmp_path / "big.report.json"
        assert main(["analyze", str(s), "--report", str(r)]) == 0
        report = json.loads(r.read_text())
        assert len(report["report"]["certificate"]["terms"]) == 8

    def test_parallelism_independent_results(self, tmp_path):
        d1, d2 = tmp_path / "d1", tmp_path / "d2"
        for d in (d1, d2):
            d.mkdir()
            for i in range(4):
                main(["generate", "--kind", "rank-n-separable", "--n", "3",
                      "--seed", str(i), "--out", str(d / f"s{i}.json")])
        main(["batch", str(d1), "--jobs", "1"])
        main(["batch", str(d2), "--jobs", "4"])
        for i in range(4):
            a = json.loads((d1 / f"s{i}.report.json").read_text())["report"]
            b = json.loads((d2 / f"s{i}.report.json").read_text())["report"]
            assert a == b


class TestStateFileRoundTrip:
    def test_parse_serialize_lossless(self, tmp_path):
        rng = np.random.default_rng(0)
        m, _, _ = build_separable(rng, 3, 4)
        p1 = tmp_path / "a.json"
        write_state(p1, m, 3, label="roundtrip")
        state, doc = load_state(p1)
        p2 = tmp_path / "b.json"
        write_state(p2, state.matrix, 3, label=doc.get("label", ""))
        state2, _ = load_state(p2)
        assert np.allclose(state.matrix, state2.matrix, atol=0)

    def test_certificate_json_roundtrip(self):
        rng = np.random.default_rng(1)
        m, _, _ = build_separable(rng, 3, 3)
        verdict, _ = analyze(m)
        doc = certificate_to_json(verdict.certificate)
        cert = certificate_from_json(doc)
        rec1 = verdict.certificate.reconstruct(6)
        rec2 = cert.reconstruct(6)
        assert np.allclose(rec1, rec2, atol=1e-14)

    def test_generator_parameter_validation(self):
        with pytest.raises(Exception):
            generate_state("npt", 1, None, 0)
        with pytest.raises(Exception):
            generate_state("unknown", 3, None, 0)
