import json
import os
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from medial_atlas import export
from medial_atlas.cli import run
from medial_atlas.scene import Scene

SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.mark.parametrize("name", ["branch", "optimality", "polygon", "two-point", "triangle"])
def test_gallery_round_trip(work, name):
    assert run(["gallery", name, "--out", "s.json"]) == 0
    obj = export.read_json("s.json")
    again = Scene.from_json(obj)
    assert again.to_json() == obj
    assert os.path.exists("s.oracle.json")
    assert run(["gallery", name, "--out", "t.json"]) == 0
    assert Scene.from_json(export.read_json("t.json")) == again


@pytest.mark.parametrize("name", ["cantor", "zigzag"])
def test_gallery_convex(work, name):
    assert run(["gallery", name, "--out", "c.json", "--param", "depth=4" if name == "cantor" else "j_max=8"]) == 0
    assert "convex" in export.read_json("c.json")
    assert run(["classify", "--scene", "c.json", "--point", "0,0"]) == 0
    assert run(["scan", "--scene", "c.json", "--window", "0,0,1,1", "--h", "0.1", "--out", "g.csv"]) == 2


def test_trace_two_point(work):
    assert run(["gallery", "two-point", "--out", "tp.json"]) == 0
    assert run(["trace", "--scene", "tp.json", "--seed-point", "0,0", "--out", "arc.csv"]) == 0
    header, data = export.read_table("arc.csv")
    assert header == ["t_index", "x", "y", "residual", "grad_mag"]
    assert np.abs(data[:, 1]).max() < 1e-6
    assert len(data) > 100


def test_scan_branch_and_render(work):
    assert run(["gallery", "branch", "--out", "b.json"]) == 0
    assert run(["scan", "--scene", "b.json", "--window", "-.5,-.5,.5,.5", "--h", "0.0078125",
                "--out", "grid.csv", "--figure", "grid.png"]) == 0
    header, data = export.read_table("grid.csv")
    assert header == ["i", "j", "x_center", "y_center", "jump"]
    item = __import__("medial_atlas").gallery.branch_example()
    assert item.oracle.distance(data[:, 2:4]).max() <= 0.0078125 * 1.5
    with open("grid.png", "rb") as fh:
        assert fh.read(8) == b"\x89PNG\r\n\x1a\n"

    assert run(["trace", "--scene", "b.json", "--seed-point", "0,0.2", "--out", "arc.csv"]) == 0
    assert run(["render", "--in", "grid.csv", "arc.csv", "--svg", "out.svg", "--scene", "b.json"]) == 0
    root = ET.parse("out.svg").getroot()
    assert root.get("viewBox") == "0 0 1024 1024"
    groups = {g.get("id"): g for g in root.iter(SVG + "g")}
    assert set(groups) == {"primitives", "cells", "arcs"}
    assert len(groups["arcs"].findall(SVG + "path")) == 1
    assert len(groups["cells"].findall(SVG + "rect")) == len(data)


def test_render_one_path_per_arc(work):
    assert run(["gallery", "two-point", "--out", "tp.json"]) == 0
    assert run(["trace", "--scene", "tp.json", "--seed-point", "0,0.3", "--out", "a.csv"]) == 0
    assert run(["trace", "--scene", "tp.json", "--seed-point", "0,-0.3", "--out", "b.csv"]) == 0
    assert run(["render", "--in", "a.csv", "b.csv", "--svg", "o.svg", "--figure", "o.png"]) == 0
    root = ET.parse("o.svg").getroot()
    assert len(list(root.iter(SVG + "path"))) == 2


def test_classify_and_sectors_output(work, capsys):
    assert run(["gallery", "triangle", "--out", "t.json"]) == 0
    c = export.read_json("t.oracle.json")["meta"]["circumcenter"]
    capsys.readouterr()
    assert run(["classify", "--scene", "t.json", "--point", f"{c[0]!r},{c[1]!r}"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["k"] == 3
    assert run(["sectors", "--scene", "t.json", "--point", f"{c[0]!r},{c[1]!r}", "--arcs", "--out", "f.json"]) == 0
    fan = export.read_json("f.json")
    assert len(fan["gaps"]) == 3 and len(fan["arcs"]) == 3
    assert sum(fan["gaps"]) == pytest.approx(2 * np.pi)


def test_cover_output(work):
    assert run(["gallery", "triangle", "--out", "t.json"]) == 0
    assert run(["cover", "--scene", "t.json", "--window", "-.5,-.5,.5,.5", "--h", "0.0078125",
                "--out", "r.json"]) == 0
    rep = export.read_json("r.json")
    assert {"strata", "arcs", "residual"} <= set(rep)
    assert len(rep["arcs"]) >= 3


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["scan", "--scene", "missing.json", "--window", "0,0,1,1", "--h", "0.1", "--out", "g.csv"],
    ["scan", "--scene", "two-point", "--window", "0,0,1", "--h", "0.1", "--out", "g.csv"],
    ["scan", "--scene", "two-point", "--window", "0,0,x,1", "--h", "0.1", "--out", "g.csv"],
    ["scan", "--scene", "two-point", "--window", "0.5,-1,1.5,1", "--h", "0.1", "--out", "g.csv"],
    ["scan", "--scene", "two-point", "--window", "-.5,-.5,.5,.5", "--h", "-1", "--out", "g.csv"],
    ["render", "--in", "nothing.csv", "--svg", "x.svg"],
    ["gallery", "polygon", "--out", "p.json", "--param", "bad"],
])
def test_bad_arguments_exit_2(work, argv):
    assert run(argv) == 2


@pytest.mark.parametrize("argv", [
    ["trace", "--scene", "two-point", "--seed-point", "0.5,0", "--out", "a.csv"],
    ["sectors", "--scene", "two-point", "--point", "0.5,0"],
])
def test_numerical_failure_exit_3(work, argv):
    assert run(argv) == 3
    assert not os.path.exists("a.csv")


def test_outputs_deterministic(work):
    run(["gallery", "branch", "--out", "b.json"])
    for name in ("g1.csv", "g2.csv"):
        assert run(["scan", "--scene", "b.json", "--window", "-.5,-.5,.5,.5", "--h", "0.0078125", "--out", name]) == 0
    for name in ("r1.json", "r2.json"):
        assert run(["cover", "--scene", "b.json", "--window", "-.5,-.5,.5,.5", "--h", "0.0078125", "--out", name]) == 0
    read = lambda p: open(p, "rb").read()
    assert read("g1.csv") == read("g2.csv")
    assert read("r1.json") == read("r2.json")


def test_floats_have_17_digits(work):
    run(["gallery", "two-point", "--out", "tp.json"])
    run(["trace", "--scene", "tp.json", "--seed-point", "0,0.1", "--out", "a.csv"])
    header, data = export.read_table("a.csv")
    with open("a.csv") as fh:
        next(fh)
        row = next(fh).strip().split(",")
    assert float(row[2]) == data[0, 2]
    assert export.csv_text(["x"], [(0.1,)]).splitlines()[1] == "0.10000000000000001"


def test_atomic_write_leaves_no_temp(work):
    export.atomic_write("x.txt", "hello")
    export.atomic_write("x.txt", "again")
    assert open("x.txt").read() == "again"
    assert [p for p in os.listdir(".") if p.startswith(".tmp-")] == []


def test_console_entry_point(work):
    r = subprocess.run([sys.executable, "-m", "medial_atlas.cli", "gallery", "two-point", "--out", "s.json"],
                       capture_output=True)
    assert r.returncode == 0
    r = subprocess.run([sys.executable, "-m", "medial_atlas.cli", "classify", "--scene", "s.json"],
                       capture_output=True)
    assert r.returncode == 2


def test_thread_count_does_not_change_output(work, monkeypatch):
    run(["gallery", "branch", "--out", "b.json"])
    args = ["scan", "--scene", "b.json", "--window", "-.5,-.5,.5,.5", "--h", "0.0078125", "--out"]
    monkeypatch.setenv("MEDIAL_ATLAS_THREADS", "1")
    assert run(args + ["one.csv"]) == 0
    monkeypatch.setenv("MEDIAL_ATLAS_THREADS", "3")
    assert run(args + ["three.csv"]) == 0
    assert open("one.csv", "rb").read() == open("three.csv", "rb").read()
