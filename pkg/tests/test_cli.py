import hashlib
import subprocess
import sys

import pytest

from pronres.cli import main
from pronres.corpus_io import read_conll

SMALL = """\
corpus = corpus.conll
embeddings = corpus.emb
pretrain_checkpoint = pre.prn
checkpoint = model.prn
output = out
synth_docs = 3
vocab_size = 30
embedding_dim = 4
hidden = 8
feature_dim = 4
pretrain_epochs = 2
epochs = 3
seed = 3
"""


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "run.cfg").write_text(SMALL)
    return tmp_path


def run(*argv):
    return main(list(argv))


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_validate_valid_and_empty(workdir, capsys):
    empty = workdir / "empty.conll"
    empty.write_text("")
    assert run("validate", str(empty)) == 0
    assert capsys.readouterr().out.split("\n")[1].split()[1:] == ["0", "0", "0"]
    assert run("synth", "--config", "run.cfg") == 0
    capsys.readouterr()
    assert run("validate", "--config", "run.cfg") == 0
    assert capsys.readouterr().out.splitlines()[1].split()[1] == "3"


def test_validate_reports_every_bad_document(workdir, capsys):
    bad = workdir / "bad.conll"
    bad.write_text(
        "#begin document (doc-a)\n0\tx\t-\t(5\n\n#end document\n"
        "#begin document (doc-b)\n0\tx\tBogus\t-\n\n#end document\n"
    )
    assert run("validate", str(bad)) == 2
    err = capsys.readouterr().err
    assert "doc-a" in err and "5" in err and "line 2" in err
    assert "doc-b" in err


def test_predict_without_checkpoint_fails(workdir, capsys):
    assert run("synth", "--config", "run.cfg") == 0
    assert run("predict", "--config", "run.cfg") == 1
    assert "checkpoint" in capsys.readouterr().err


def test_bad_config_key(workdir, capsys):
    assert run("stats", "--config", "run.cfg", "--set", "no_such_key=1") == 1
    assert "no_such_key" in capsys.readouterr().err


def test_pipeline_and_config_echo(workdir, capsys):
    for cmd in ("synth", "pretrain", "train", "predict", "eval"):
        assert run(cmd, "--config", "run.cfg", "--dump-scores", "--dump-attention") == 0, cmd
    out = workdir / "out"
    for name in ("train.log", "train_curve.png", "predictions.conll", "links.tsv", "scores.txt",
                 "attention.txt", "report.tsv", "report.png", "train.config"):
        assert (out / name).stat().st_size > 0, name
    assert len((out / "train.log").read_text().splitlines()) == 3
    echo = (out / "train.config").read_text()
    assert "max_span_width = 10" in echo and "hidden = 8" in echo
    links = (out / "links.tsv").read_text().splitlines()
    assert all(len(line.split("\t")) == 5 for line in links)
    assert read_conll(out / "predictions.conll")

    # inputs untouched, and the echoed config reproduces the checkpoint
    before = {p: digest(workdir / p) for p in ("corpus.conll", "corpus.emb", "pre.prn")}
    first = digest(workdir / "model.prn")
    (workdir / "model.prn").unlink()
    assert run("train", "--config", str(out / "train.config")) == 0
    assert digest(workdir / "model.prn") == first
    assert before == {p: digest(workdir / p) for p in before}


def test_predict_keeps_checkpoint_settings_unless_overridden(workdir):
    for cmd in ("synth", "pretrain", "train"):
        assert run(cmd, "--config", "run.cfg", "--set", "top_span_ratio=0.3") == 0
    assert run("predict", "--config", "run.cfg") == 0
    assert "top_span_ratio = 0.3" in (workdir / "out" / "predict.config").read_text()
    assert run("predict", "--config", "run.cfg", "--set", "top_span_ratio=0.5") == 0
    assert "top_span_ratio = 0.5" in (workdir / "out" / "predict.config").read_text()


def test_stats_totals(workdir, capsys):
    assert run("synth", "--config", "run.cfg") == 0
    capsys.readouterr()
    assert run("stats", "corpus.conll", "corpus.conll") == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[-1].split()[:2] == ["Total", "6"]


def test_module_entry_point(workdir):
    done = subprocess.run([sys.executable, "-m", "pronres", "validate", "missing.conll"],
                          capture_output=True, text=True)
    assert done.returncode == 1
    assert "missing.conll" in done.stderr
