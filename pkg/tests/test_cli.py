import json

import numpy as np
import pytest

from embclean import EmbeddingMatrix, save_embeddings
from embclean.cli import main


def write_three_point(tmp_path):
    p = tmp_path / "emb.npy"
    save_embeddings(
        EmbeddingMatrix(values=np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])), p
    )
    return p


class TestRank:
    def test_duplicates_fixture(self, tmp_path):
        emb = write_three_point(tmp_path)
        out = tmp_path / "dups.csv"
        code = main(
            ["rank", "--embeddings", str(emb), "--issue", "duplicates", "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "rank,score,index_a,index_b"
        assert len(lines) == 4
        assert lines[1] == "1,0.5,0,1"

    def test_offtopic_fixture(self, tmp_path):
        emb = write_three_point(tmp_path)
        out = tmp_path / "ot.csv"
        assert main(
            ["rank", "--embeddings", str(emb), "--issue", "offtopic", "--out", str(out)]
        ) == 0
        assert len(out.read_text().splitlines()) == 4

    def test_labelerrors_requires_labels(self, tmp_path, capsys):
        emb = write_three_point(tmp_path)
        out = tmp_path / "le.csv"
        code = main(
            ["rank", "--embeddings", str(emb), "--issue", "labelerrors", "--out", str(out)]
        )
        assert code == 1
        assert "labels required" in capsys.readouterr().err

    def test_missing_file_exits_one(self, tmp_path):
        code = main(
            [
                "rank",
                "--embeddings",
                str(tmp_path / "nope.npy"),
                "--issue",
                "offtopic",
                "--out",
                str(tmp_path / "o.csv"),
            ]
        )
        assert code == 1

    def test_labelerrors_with_labels(self, tmp_path):
        emb = write_three_point(tmp_path)
        labels = tmp_path / "labels.txt"
        labels.write_text("a\na\nb\n")
        out = tmp_path / "le.csv"
        code = main(
            [
                "rank",
                "--embeddings",
                str(emb),
                "--issue",
                "labelerrors",
                "--labels",
                str(labels),
                "--out",
                str(out),
            ]
        )
        # class b has a single member: user-fixable input problem
        assert code == 1

    def test_top_k(self, tmp_path):
        emb = write_three_point(tmp_path)
        out = tmp_path / "dups.csv"
        main(
            [
                "rank",
                "--embeddings",
                str(emb),
                "--issue",
                "duplicates",
                "--top-k",
                "1",
                "--out",
                str(out),
            ]
        )
        assert len(out.read_text().splitlines()) == 2


def simulate_dir(tmp_path, issues="nd", seed=11, n=120, extra=()):
    out = tmp_path / f"sim_{issues.replace(',', '_')}"
    code = main(
        [
            "simulate",
            "--n",
            str(n),
            "--dim",
            "16",
            "--classes",
            "2",
            "--contamination",
            "0.05",
            "--issues",
            issues,
            "--seed",
            str(seed),
            "--out-dir",
            str(out),
            *extra,
        ]
    )
    assert code == 0
    return out


class TestSimulate:
    def test_outputs_exist(self, tmp_path):
        out = simulate_dir(tmp_path, issues="ot,nd,le")
        for name in (
            "embeddings.npy",
            "labels.txt",
            "truth_offtopic.csv",
            "truth_duplicates.csv",
            "truth_labelerrors.csv",
            "config.txt",
        ):
            assert (out / name).exists(), name

    def test_label_length_matches_matrix(self, tmp_path):
        out = simulate_dir(tmp_path, issues="ot,nd")
        from embclean import load_embeddings, load_labels

        m = load_embeddings(out / "embeddings.npy")
        load_labels(out / "labels.txt", m.n_samples)

    def test_unknown_issue_rejected(self, tmp_path):
        code = main(
            [
                "simulate",
                "--n",
                "50",
                "--dim",
                "8",
                "--classes",
                "2",
                "--contamination",
                "0.1",
                "--issues",
                "bogus",
                "--out-dir",
                str(tmp_path / "x"),
            ]
        )
        assert code == 1


class TestEndToEnd:
    def test_planted_duplicates_ap_is_one(self, tmp_path):
        sim = simulate_dir(tmp_path, issues="nd")
        ranking = tmp_path / "dups.csv"
        assert main(
            [
                "rank",
                "--embeddings",
                str(sim / "embeddings.npy"),
                "--issue",
                "duplicates",
                "--out",
                str(ranking),
            ]
        ) == 0
        report = tmp_path / "report.json"
        assert main(
            [
                "eval",
                "--ranking",
                str(ranking),
                "--truth",
                str(sim / "truth_duplicates.csv"),
                "--metrics",
                "auroc,ap,afe",
                "--out",
                str(report),
            ]
        ) == 0
        blob = json.loads(report.read_text())
        assert blob["ap"] == 1.0
        assert blob["auroc"] == 1.0

    def test_autoclean_clean_set_flags_nothing(self, tmp_path):
        emb = tmp_path / "clean.npy"
        rng = np.random.default_rng(0)
        centers = np.zeros((2, 16))
        centers[0, 0] = centers[1, 1] = 10 / np.sqrt(2)
        values = centers[np.arange(300) % 2] + rng.standard_normal((300, 16))
        save_embeddings(EmbeddingMatrix(values=values), emb)
        out = tmp_path / "decision.json"
        code = main(
            [
                "autoclean",
                "--embeddings",
                str(emb),
                "--issue",
                "duplicates",
                "--alpha",
                "0.10",
                "--q",
                "0.05",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        blob = json.loads(out.read_text())
        assert blob["flagged"] == []
        assert blob["issue_type"] == "duplicates"

    def test_autoclean_flags_planted_duplicates(self, tmp_path):
        sim = simulate_dir(tmp_path, issues="nd", n=200)
        out = tmp_path / "decision.json"
        assert main(
            [
                "autoclean",
                "--embeddings",
                str(sim / "embeddings.npy"),
                "--issue",
                "duplicates",
                "--out",
                str(out),
            ]
        ) == 0
        blob = json.loads(out.read_text())
        truth_pairs = {
            tuple(map(int, ln.split(",")))
            for ln in (sim / "truth_duplicates.csv").read_text().splitlines()
        }
        assert {tuple(k) for k in blob["flagged"]} == truth_pairs


class TestDeterminism:
    def run_all(self, tmp_path, tag):
        base = tmp_path / tag
        base.mkdir()
        sim = base / "sim"
        main(
            [
                "simulate",
                "--n",
                "80",
                "--dim",
                "8",
                "--classes",
                "2",
                "--contamination",
                "0.08",
                "--issues",
                "ot,nd,le",
                "--seed",
                "5",
                "--out-dir",
                str(sim),
            ]
        )
        rank_out = base / "rank.csv"
        main(
            [
                "rank",
                "--embeddings",
                str(sim / "embeddings.npy"),
                "--issue",
                "labelerrors",
                "--labels",
                str(sim / "labels.txt"),
                "--out",
                str(rank_out),
            ]
        )
        clean_out = base / "clean.json"
        main(
            [
                "autoclean",
                "--embeddings",
                str(sim / "embeddings.npy"),
                "--issue",
                "offtopic",
                "--out",
                str(clean_out),
            ]
        )
        eval_out = base / "eval.json"
        main(
            [
                "eval",
                "--ranking",
                str(rank_out),
                "--truth",
                str(sim / "truth_labelerrors.csv"),
                "--out",
                str(eval_out),
            ]
        )
        return [
            (sim / "embeddings.npy").read_bytes(),
            (sim / "labels.txt").read_bytes(),
            (sim / "truth_duplicates.csv").read_bytes(),
            rank_out.read_bytes(),
            clean_out.read_bytes(),
            eval_out.read_bytes(),
        ]

    def test_byte_identical_reruns(self, tmp_path):
        first = self.run_all(tmp_path, "a")
        second = self.run_all(tmp_path, "b")
        assert first == second


class TestThreads:
    def test_env_var_overrides_flag(self, monkeypatch):
        from embclean.cli import _threads

        monkeypatch.setenv("EMBCLEAN_THREADS", "3")
        assert _threads(8) == 3
        monkeypatch.delenv("EMBCLEAN_THREADS")
        assert _threads(8) == 8

    def test_bad_env_var_is_user_error(self, monkeypatch):
        from embclean import InputError
        from embclean.cli import _threads

        monkeypatch.setenv("EMBCLEAN_THREADS", "lots")
        with pytest.raises(InputError):
            _threads(None)


class TestEval:
    def test_unknown_metric(self, tmp_path):
        sim = simulate_dir(tmp_path, issues="le")
        ranking = tmp_path / "r.csv"
        main(
            [
                "rank",
                "--embeddings",
                str(sim / "embeddings.npy"),
                "--issue",
                "labelerrors",
                "--labels",
                str(sim / "labels.txt"),
                "--out",
                str(ranking),
            ]
        )
        code = main(
            [
                "eval",
                "--ranking",
                str(ranking),
                "--truth",
                str(sim / "truth_labelerrors.csv"),
                "--metrics",
                "nope",
                "--out",
                str(tmp_path / "x.json"),
            ]
        )
        assert code == 1
