import json
import subprocess
import sys

import pytest

from pronlearn.cli import main
from pronlearn.core import read_corpus, read_lexicon


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth-gen", "--out", str(d / "lang"), "--seed", "4", "--vocab-size", "100",
                 "--n-sentences", "300", "--seed-sizes", "20,40"]) == 0
    return d


def run(argv, capsys):
    """Exit status as the shell would see it, plus captured output."""
    try:
        code = main([str(a) for a in argv])
    except SystemExit as exc:
        code = exc.code
    return code, capsys.readouterr()


def test_synth_gen_outputs(workdir):
    lang = workdir / "lang"
    for name in ("gold.lex", "corpus.txt", "rules.txt", "irregular.txt", "seed_20.lex", "seed_40.lex", "test.lex"):
        assert (lang / name).exists(), name
    assert len(read_lexicon(lang / "seed_40.lex")) == 40


def test_tool_chain(workdir, capsys):
    lang, out = workdir / "lang", workdir / "out"
    out.mkdir(exist_ok=True)
    code, _ = run(["train-g2p", "--lexicon", lang / "seed_40.lex", "--tag", "syn", "--out", out / "g2p.model",
                   "--em-iters", "3"], capsys)
    assert code == 0
    code, res = run(["apply-g2p", "--model", out / "g2p.model", "--tag", "syn", "--corpus", lang / "corpus.txt",
                     "--out", out / "dict.lex", "--skipped", out / "skipped.txt"], capsys)
    assert code == 0 and "words pronounced" in res.out
    code, _ = run(["train-lm", "--corpus", lang / "corpus.txt", "--lexicon", out / "dict.lex", "--order", "4",
                   "--out", out / "phone.lm"], capsys)
    assert code == 0
    code, _ = run(["decode", "--corpus", lang / "corpus.txt", "--lm", out / "phone.lm", "--out",
                   out / "decoded.txt", "--seed", "3"], capsys)
    assert code == 0
    decoded = read_corpus(out / "decoded.txt")
    assert len(decoded.sentences) == 300
    code, res = run(["learn-lexicon", "--corpus", out / "decoded.txt", "--out-dir", out / "learn", "--k", "1,2",
                     "--max-iters", "5", "--lm", out / "phone.lm"], capsys)
    assert code == 0 and "num_words" in res.out
    k1, k2 = read_lexicon(out / "learn" / "learned_k1.lex"), read_lexicon(out / "learn" / "learned_k2.lex")
    assert set(k2.words()) <= set(k1.words())
    code, res = run(["eval", "--hyp", out / "learn" / "learned_k1.lex", "--ref", lang / "gold.lex", "--json"], capsys)
    assert code == 0
    report = json.loads(res.out)
    assert 0 <= report["per"] < 0.5 and report["num_words"] == len(k1)
    code, res = run(["compare", "--a", out / "learn" / "learned_k1.lex", "--b", out / "dict.lex",
                     "--ref", lang / "gold.lex", "--tsv"], capsys)
    assert code == 0
    header, row = res.out.strip().split("\n")
    n, better, worse, same = map(int, row.split("\t"))
    assert better + worse + same == n
    code, res = run(["compare", "--a", out / "dict.lex", "--b", out / "dict.lex", "--ref", lang / "gold.lex"],
                    capsys)
    assert code == 0 and "(100.00%)" in res.out


def test_pipeline_subcommand(workdir, capsys):
    cfg = workdir / "p.ini"
    cfg.write_text("[data]\nseed_size = 20\n[g2p]\nem_iters = 3\n[lexlearn]\nmax_iters = 5\n[experiment]\nk = 1 2\n"
                   "[synth]\nvocab_size = 100\nn_sentences = 300\nseed = 2\n", encoding="utf-8")
    code, res = run(["pipeline", "--config", cfg, "--run-dir", workdir / "run"], capsys)
    assert code == 0 and "== table2" in res.out
    manifest = json.loads((workdir / "run" / "manifest.json").read_text())
    assert manifest["status"] == "complete"


def test_usage_errors_exit_1(workdir, capsys):
    assert run(["no-such-command"], capsys)[0] == 1
    assert run(["eval", "--hyp", "x"], capsys)[0] == 1
    assert run(["synth-gen", "--out", workdir / "z", "--irregularity-rate", "3"], capsys)[0] == 1
    bad = workdir / "bad.ini"
    bad.write_text("[nonsense]\n", encoding="utf-8")
    assert run(["pipeline", "--config", bad], capsys)[0] == 1
    assert run([], capsys)[0] == 1


def test_stage_errors_exit_2(workdir, capsys):
    code, res = run(["eval", "--hyp", workdir / "missing.lex", "--ref", workdir / "lang" / "gold.lex"], capsys)
    assert code == 2 and "failed" in res.err
    broken = workdir / "broken.lex"
    broken.write_text("word without tab\n", encoding="utf-8")
    code, res = run(["train-g2p", "--lexicon", broken, "--tag", "x", "--out", workdir / "m"], capsys)
    assert code == 2 and "broken.lex:1:" in res.err
    cfg = workdir / "fail.ini"
    cfg.write_text(f"[data]\ncorpus = {broken}\ngold_lexicon = {broken}\n", encoding="utf-8")
    code, _ = run(["pipeline", "--config", cfg, "--run-dir", workdir / "failrun"], capsys)
    assert code == 2
    assert json.loads((workdir / "failrun" / "manifest.json").read_text())["status"] == "failed"


def test_help_runs_as_a_module():
    out = subprocess.run([sys.executable, "-m", "pronlearn.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("synth-gen", "train-g2p", "apply-g2p", "train-lm", "decode", "learn-lexicon", "eval", "compare",
                "pipeline", "iterate", "sweep-seeds"):
        assert cmd in out.stdout
