import json
from fractions import Fraction
from pathlib import Path

import pytest

from faacalc.cli import main

DATA = Path(__file__).parent / "data"


@pytest.fixture(autouse=True)
def in_data_dir(monkeypatch):
    monkeypatch.chdir(DATA)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def flat(data):
    if isinstance(data, list):
        return [x for d in data for x in flat(d)]
    return [Fraction(data)]


def test_partitions(capsys):
    doc = run_json(capsys, "partitions", "--m", "3", "--k", "2")
    assert doc["result"] == [[[1, 2], [3]], [[1, 3], [2]], [[1], [2, 3]]]
    assert len(run_json(capsys, "partitions", "--m", "4")["result"]) == 15


def test_bell(capsys):
    doc = run_json(capsys, "bell", "--m", "4", "--k", "2", "--xs", "1,1,1")
    assert doc["result"]["value"] == "7"
    doc = run_json(capsys, "bell", "--m", "2", "--k", "2", "--xs", "x1")
    assert doc["result"]["value"] == "x1**2"


@pytest.mark.parametrize("exact", [False, True])
def test_derive(capsys, exact):
    argv = ["derive", "--f", "square.json", "--phi", "cube.json", "--at", "1", "--order", "3"]
    doc = run_json(capsys, *(argv + ["--exact"] * exact))
    assert [flat(t["data"])[0] for t in doc["result"]["derivs"]] == [1, 6, 30, 120]


def test_inverse(capsys):
    doc = run_json(capsys, "inverse", "--phi", "x_plus_cube.json", "--at", "0", "--order", "5", "--exact")
    assert [str(flat(t["data"])[0]) for t in doc["result"]["derivs"]] == ["0", "1", "0", "-6", "0", "360"]


def test_text_format(capsys):
    code, out, _ = run(capsys, "partitions", "--m", "3", "--k", "2", "--format", "text")
    assert code == 0 and out.splitlines() == ["1 2|3", "1 3|2", "1|2 3"]


def test_seminorm_and_orlicz(capsys):
    assert float(run_json(capsys, "seminorm", "--kind", "slobodeckij", "--samples", "pair.json")["result"]["value"]) \
        == pytest.approx(2 ** 0.5)
    lux = run_json(capsys, "orlicz", "--integrand", "exp", "--samples", "unit.json", "--values", "ones.json")
    assert float(lux["result"]["luxemburg"]) == pytest.approx(1.4426950408889634, rel=1e-9)
    h = run_json(capsys, "orlicz", "--samples", "unit.json", "--values", "ones.json", "--holder", "ones.json")
    assert h["result"]["holds"] is True


def test_transform_report(capsys):
    doc = run_json(capsys, "seminorm", "--kind", "transform", "--samples", "square_grid.json", "--u", "field2.json",
                   "--phi", "map2.json", "--d", "1", "--m", "1")
    names = [e["name"] for e in doc["result"]]
    assert names[:2] == ["lp", "slobodeckij_scalar"]
    assert not any(e["flagged"] for e in doc["result"])


def test_exit_codes(capsys):
    assert run(capsys, "inverse", "--phi", "square.json", "--at", "0", "--order", "2")[0] == 1
    assert run(capsys, "derive", "--f", "missing.json", "--phi", "cube.json", "--at", "1", "--order", "2")[0] == 2
    code, _, err = run(capsys, "partitions", "--bogus")
    assert code == 2 and "usage" in err
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "derive", "--phi", "cube.json", "--at", "1")[0] == 2
    code, _, err = run(capsys, "seminorm", "--kind", "transform", "--samples", "square_grid.json", "--u",
                       "field2.json", "--phi", "map2.json", "--theta", "1")
    assert code == 2 and "theta" in err


ROUND_TRIP = [
    ["partitions", "--m", "4", "--k", "2"],
    ["bell", "--m", "5", "--k", "2", "--xs", "1,2,3,4"],
    ["derive", "--f", "square.json", "--phi", "cube.json", "--at", "1", "--order", "3", "--exact"],
    ["pullback", "--u", "field2.json", "--phi", "map2.json", "--at", "1,2", "--order", "1", "--d", "1"],
    ["inverse", "--phi", "map2.json", "--at", "1/2,1", "--order", "2", "--exact"],
    ["bound", "--u", "field2.json", "--phi", "map2.json", "--at", "1,2", "--order", "1", "--d", "1"],
    ["seminorm", "--kind", "lp", "--samples", "pair.json", "--p", "inf"],
    ["orlicz", "--integrand", "exp", "--samples", "unit.json", "--values", "ones.json", "--dual"],
    ["verify", "--suite", "5", "--scale", "0.1", "--format", "json"],
]


@pytest.mark.parametrize("argv", ROUND_TRIP, ids=[a[0] for a in ROUND_TRIP])
def test_input_round_trip(capsys, tmp_path, argv):
    first = run_json(capsys, *argv)
    doc = tmp_path / "doc.json"
    doc.write_text(json.dumps(first))
    second = run_json(capsys, argv[0], "--input", str(doc), "--format", "json")
    if argv[0] == "verify":
        for r in second["result"]:
            r.pop("seconds", None)
        for r in first["result"]:
            r.pop("seconds", None)
    assert second["result"] == first["result"]


def test_input_command_mismatch(capsys, tmp_path):
    doc = tmp_path / "doc.json"
    doc.write_text(json.dumps(run_json(capsys, "partitions", "--m", "2")))
    assert run(capsys, "bell", "--input", str(doc))[0] == 2


def test_polymap_accepts_envelope(capsys, tmp_path):
    doc = tmp_path / "env.json"
    doc.write_text(json.dumps({"command": "x", "args": {}, "result": json.loads((DATA / "cube.json").read_text())}))
    out = run_json(capsys, "derive", "--f", "square.json", "--phi", str(doc), "--at", "1", "--order", "1")
    assert flat(out["result"]["derivs"][1]["data"]) == [6]


EXACT_VS_FLOAT = [
    ["derive", "--f", "square.json", "--phi", "cube.json", "--at", "1/3", "--order", "4"],
    ["derive", "--f", "field2.json", "--phi", "map2.json", "--at", "1,2", "--order", "3"],
    ["pullback", "--u", "field2.json", "--phi", "map2.json", "--at", "1,2", "--order", "2", "--d", "1"],
    ["inverse", "--phi", "map2.json", "--at", "1/2,1", "--order", "3"],
    ["inverse", "--phi", "x_plus_cube.json", "--at", "1/4", "--order", "4"],
]


@pytest.mark.parametrize("argv", EXACT_VS_FLOAT, ids=lambda a: " ".join(a[:2]))
def test_exact_and_float_agree(capsys, argv):
    fl = run_json(capsys, *argv)["result"]["derivs"]
    ex = run_json(capsys, *(argv + ["--exact"]))["result"]["derivs"]
    for a, b in zip(fl, ex):
        for x, y in zip(flat(a["data"]), flat(b["data"])):
            assert float(x) == pytest.approx(float(y), rel=1e-9, abs=1e-12)
