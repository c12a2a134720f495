import json

import pytest

from ppdm.cli import main, _fmt_volume
from ppdm.documents import load_document


def run(capsys, *argv):
    rc = main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def test_fixture_and_volume(tmp_path, capsys):
    path = tmp_path / "box.json"
    rc, _o, _e = run(capsys, "fixture", "box", "--params", "w=4", "d=2", "h=2",
                     "--out", str(path))
    assert rc == 0
    rc, out, _e = run(capsys, "volume", str(path))
    assert rc == 0
    assert out.strip() == "16.0000000000"


def test_fmt_volume_digits():
    assert _fmt_volume(16.0) == "16.0000000000"
    assert _fmt_volume(0.5) == "0.50000000000"
    assert _fmt_volume(123456.0) == "123456.000000"


def test_validate_exit_codes(tmp_path, capsys):
    good = tmp_path / "ok.json"
    run(capsys, "fixture", "box", "--out", str(good))
    rc, out, _e = run(capsys, "validate", str(good))
    assert rc == 0 and "valid" in out

    doc = json.loads(good.read_text())
    doc["faces"] = doc["faces"][:-1]
    doc["shells"][0]["faces"] = doc["shells"][0]["faces"][:-1]
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(doc))
    rc, out, _e = run(capsys, "validate", str(broken), "--report", "json")
    assert rc == 1
    report = json.loads(out)
    assert not report["valid"]
    assert any(v["condition"] == 2 for v in report["violations"])


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["pushpull", "--bogus"])
    assert exc.value.code == 2


def test_pushpull_trace(tmp_path, capsys):
    src = tmp_path / "sl.json"
    out = tmp_path / "out.json"
    trace = tmp_path / "trace.json"
    run(capsys, "fixture", "slotted_block", "--out", str(src))
    rc, _o, _e = run(capsys, "pushpull", str(src), "--faces", "top",
                     "--translate", "0,0,-4", "--out", str(out),
                     "--trace", str(trace))
    assert rc == 0
    tr = json.loads(trace.read_text())
    assert [round(e["t"], 6) for e in tr["events"]] == [0.5, 0.75]
    body = load_document(out.read_bytes())
    from ppdm.brep import volume

    assert volume(body) == pytest.approx(8.0, abs=1e-9)


def test_pushpull_steps_samples(tmp_path, capsys):
    src = tmp_path / "cube.json"
    out = tmp_path / "out.json"
    trace = tmp_path / "trace.json"
    run(capsys, "fixture", "box", "--out", str(src))
    rc, _o, _e = run(capsys, "pushpull", str(src), "--faces", "top",
                     "--translate", "0,0,-0.5", "--out", str(out),
                     "--trace", str(trace), "--steps", "4")
    assert rc == 0
    tr = json.loads(trace.read_text())
    got = {round(t, 6): round(v, 9) for t, v in tr["samples"]}
    assert got == {0.0: 1.0, 0.25: 0.875, 0.5: 0.75, 0.75: 0.625, 1.0: 0.5}


def test_export_roundtrip(tmp_path, capsys):
    src = tmp_path / "vslot.json"
    out = tmp_path / "v.stl"
    run(capsys, "fixture", "vslot", "--out", str(src))
    rc, _o, _e = run(capsys, "export", str(src), "--format", "stl", "--out", str(out))
    assert rc == 0
    from ppdm.meshio import stl_volume

    assert stl_volume(out.read_bytes()) == pytest.approx(14.0, abs=1e-6)


def test_domain_failure_error_line(tmp_path, capsys):
    src = tmp_path / "box.json"
    run(capsys, "fixture", "box", "--out", str(src))
    rc, _o, err = run(capsys, "pushpull", str(src), "--faces", "nope",
                      "--translate", "0,0,-1", "--out", str(tmp_path / "x.json"))
    assert rc == 1
    assert "error: code=UNKNOWN_FACE" in err
