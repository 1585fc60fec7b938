import json
import subprocess
import sys

import pytest

from leadsheet.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, run
from leadsheet.ingest import loads, write_leadsheet
from sheets import one_bar_example
from smf_writer import render


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, toy_sheets):
    root = tmp_path_factory.mktemp("cli")
    for i, ls in enumerate(toy_sheets):
        (root / "sheets").mkdir(exist_ok=True)
        write_leadsheet(ls, root / "sheets" / f"s{i}.json")
    assert run(["train", str(root / "sheets"), "-o", str(root / "all.nglm")]) == EXIT_OK
    (root / "lyrics.txt").write_text("[verse] hello world la la\n[chorus] la la love\n")
    return root


def _generate(ws, out, *extra):
    return run(["generate", "--model", str(ws / "all.nglm"), "--lyrics", str(ws / "lyrics.txt"), "--seed", "4",
                "-o", str(out), *extra])


def test_generate_deterministic(workspace):
    a, b = workspace / "a.json", workspace / "b.json"
    assert _generate(workspace, a) == EXIT_OK
    assert _generate(workspace, b) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    sheet = loads(a.read_text())
    assert [label for label, _ in sheet.meta.sections] == ["verse", "chorus"]


def test_generate_stems_vocal(workspace):
    out = workspace / "v.json"
    assert _generate(workspace, out, "--stems", "vocal") == EXIT_OK
    assert list(json.loads(out.read_text())["tracks"]) == ["Vocal"]


def test_score_generated(workspace, capsys):
    out = workspace / "s.json"
    assert _generate(workspace, out, "--scale") == EXIT_OK
    capsys.readouterr()
    assert run(["score", str(out), "--lyrics", str(workspace / "lyrics.txt")]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["wer"] == 0 and rep["scale_consistency"] == 1.0 and rep["grammar_valid"]
    assert (rep["structure_precision"], rep["structure_lcs"]) == (1.0, 1.0)


def test_stream_prints_tokens(workspace, capsys):
    assert _generate(workspace, "-", "--stream") == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "Bar" and lines[-1] == "EOS"


def test_encode_decode_pipe(tmp_path):
    src = tmp_path / "one.json"
    write_leadsheet(one_bar_example(), src)
    enc = subprocess.run([sys.executable, "-m", "leadsheet.cli", "encode", str(src)], capture_output=True, check=True)
    dec = subprocess.run([sys.executable, "-m", "leadsheet.cli", "decode", "-"], input=enc.stdout,
                         capture_output=True, check=True)
    assert dec.stdout == src.read_bytes()


@pytest.mark.parametrize("fmt,out", [("remi", "bin"), ("xval", "text")])
def test_encode_forms(tmp_path, fmt, out, capsys):
    src = tmp_path / "one.json"
    write_leadsheet(one_bar_example(), src)
    tok = tmp_path / "t"
    assert run(["encode", str(src), "--format", fmt, "--out", out, "-o", str(tok)]) == EXIT_OK
    assert run(["validate", str(tok)] if fmt == "remi" else ["decode", str(tok), "--format", "xval"]) == EXIT_OK


def test_validate_reports_invalid(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("BOS Tempo_20 TimeSig_4/4 Key_0_major Bar Track_Vocal Pos_8 Pitch_60 Dur_2 Pos_4\n")
    assert run(["validate", str(bad)]) == EXIT_DATA
    assert "at token 9" in capsys.readouterr().out


def test_exit_codes(tmp_path, workspace):
    assert run(["frobnicate"]) == EXIT_USAGE
    assert run(["encode", str(tmp_path / "missing.json")]) == EXIT_DATA
    src = tmp_path / "one.json"
    write_leadsheet(one_bar_example(), src)
    assert run(["encode", str(src), "--format", "xval", "--out", "bin"]) == EXIT_USAGE
    assert run(["generate", "--model", str(workspace / "all.nglm"), "--top-k", "0"]) == EXIT_USAGE
    assert run(["generate", "--model", str(workspace / "all.nglm"), "--stems", "kazoo"]) == EXIT_USAGE
    junk = tmp_path / "junk.json"
    junk.write_text('{"lsv": 1}')
    assert run(["decode", str(junk)]) == EXIT_DATA


def test_config_defaults(workspace, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 4}))
    a = tmp_path / "a.json"
    assert run(["--config", str(cfg), "generate", "--model", str(workspace / "all.nglm"), "--lyrics",
                str(workspace / "lyrics.txt"), "-o", str(a)]) == EXIT_OK
    b = tmp_path / "b.json"
    assert _generate(workspace, b) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_edit_and_ingest(tmp_path, workspace, toy_sheets, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"bars": [1, 3], "mode": "melody-edit"}))
    out = tmp_path / "e.json"
    assert run(["edit", str(workspace / "sheets" / "s0.json"), "--spec", str(spec), "--model",
                str(workspace / "all.nglm"), "--candidates", "2", "-o", str(out)]) == EXIT_OK
    edited = loads(out.read_text())
    assert edited.meta == toy_sheets[0].meta
    mid = tmp_path / "midi" / "pop"
    mid.mkdir(parents=True)
    (mid / "x.mid").write_bytes(render(toy_sheets[1]))
    assert run(["ingest", str(tmp_path / "midi"), "-o", str(tmp_path / "out")]) == EXIT_OK
    assert (tmp_path / "out" / "pop" / "x.json").exists()
    assert run(["corpus-stats", str(tmp_path / "out")]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["sheets"] == 1


def test_vocab_build(capsys):
    assert run(["vocab", "build"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("#hash=")
