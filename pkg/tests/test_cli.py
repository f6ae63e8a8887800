import json
import shutil
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ambirot import AmbiguousRotation, AmbiguousSample, DistributionSpec, haar_rotation, quotient_distance, sample
from ambirot.cli import main
from ambirot.io import DatasetError, dumps_json, format_dataset, parse_dataset, read_dataset, write_dataset
from ambirot.rotations import quaternion_to_matrix
from ambirot.stereonet import project, render_stereonet, stereonet_markers
from ambirot.validation import RotationRepairWarning


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _gen(tmp_path, name, *flags):
    path = tmp_path / name
    assert main(["gen", "--out", str(path), *map(str, flags)]) == 0
    return path


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------


def test_ingest_identity_rows():
    ds = parse_dataset("# format=quaternion\n# group=O\n1,0,0,0\n")
    assert_allclose(ds.samples[0].reps[0], np.eye(3), atol=0)
    ds = parse_dataset("# format=matrix\n# group=C2\n1,0,0,0,1,0,0,0,1\n")
    assert_allclose(ds.samples[0].reps[0], np.eye(3), atol=0)


def test_ingest_repairs_near_rotation():
    R = haar_rotation(np.random.default_rng(0))
    bad = R + 1e-7 * np.random.default_rng(1).standard_normal((3, 3))
    text = "# format=matrix\n# group=D2\n" + ",".join("%.17g" % x for x in bad.ravel()) + "\n"
    with pytest.warns(RotationRepairWarning):
        ds = parse_dataset(text)
    M = ds.samples[0].reps[0]
    assert_allclose(M.T @ M, np.eye(3), atol=1e-14)
    assert np.abs(M - R).max() < 1e-6


@pytest.mark.parametrize("text,where", [
    ("# format=matrix\n# group=O\n1,0,0,0,1,0,0,0,1\n2,0,0,0,1,0,0,0,1\n", "row 4"),
    ("# format=quaternion\n# group=O\n1,0,0,0\n1,0,0\n", "line 4"),
    ("# format=quaternion\n# group=O\n1,0,0,0\n1,x,0,0\n", "line 4"),
    ("# format=quaternion\n# group=O\n2,0,0,0\n", "row 3"),
])
def test_ingest_errors_name_the_row(text, where):
    with pytest.raises(DatasetError, match=where):
        parse_dataset(text)


def test_ingest_header_errors():
    with pytest.raises(DatasetError):
        parse_dataset("1,0,0,0\n")
    with pytest.raises(DatasetError):
        parse_dataset("# format=quaternion\n# group=O\n")
    with pytest.raises(DatasetError):
        parse_dataset("# format=quaternion\n# group=O\n1,0,0,0\n", group="T")
    with pytest.raises(DatasetError):
        parse_dataset("# format=quaternion\n# group=O\n1,0,0,0\n", fmt="matrix")
    with pytest.raises(ValueError):
        parse_dataset("# format=quaternion\n# group=Q7\n1,0,0,0\n")


@pytest.mark.parametrize("fmt", ["quaternion", "matrix"])
def test_dataset_round_trip(tmp_path, fmt):
    rng = np.random.default_rng(2)
    a = AmbiguousSample(haar_rotation(rng, 7), "C2")
    b = AmbiguousSample(haar_rotation(rng, 7), "O")
    back = write_dataset(tmp_path / "d.csv", [a, b], fmt, {"note": "x"})
    ds = read_dataset(str(tmp_path / "d.csv"))
    assert ds.paired and [g.name for g in ds.groups] == ["C2", "O"] and ds.meta == {"note": "x"}
    for orig, got, ret in zip((a, b), ds.samples, back):
        assert np.array_equal(got.reps, ret.reps)
        assert np.abs(got.reps - orig.reps).max() < 1e-15
    if fmt == "matrix":
        # matrix text survives a read-write cycle unchanged
        assert format_dataset(ds.samples, fmt, {"note": "x"}) == (tmp_path / "d.csv").read_text()


def test_dumps_json_is_stable():
    text = dumps_json({"b": np.float64(np.nan), "a": np.arange(2), "c": np.bool_(True)})
    assert json.loads(text) == {"a": [0, 1], "b": None, "c": True}
    assert text == dumps_json({"c": True, "a": [0, 1], "b": float("nan")})


# ---------------------------------------------------------------------------
# Stereonet
# ---------------------------------------------------------------------------


def test_projection():
    assert_allclose(project(np.array([0.0, 0.0, 1.0])), [0.0, 0.0])
    assert_allclose(project(np.array([1.0, 0.0, 0.0])), [1.0, 0.0])
    x = np.random.default_rng(3).standard_normal((100, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    assert np.all(np.linalg.norm(project(x), axis=1) <= 1 + 1e-12)


def test_markers_north_pole_and_counts():
    s = AmbiguousSample(np.eye(3)[None], "C2")
    marks = stereonet_markers(s)
    assert len(marks) == 3
    tri = [m for m in marks if m.kind == "vector-triangle"]
    assert len(tri) == 1 and np.allclose(tri[0].point, 0.0)
    assert sorted(m.kind for m in marks) == ["axis-filled", "axis-open", "vector-triangle"]
    # the two ends of an axis are antipodal in the plane
    ends = [np.array(m.point) for m in marks if m.kind != "vector-triangle"]
    assert_allclose(ends[0], -ends[1])
    with_mean = stereonet_markers(s, AmbiguousRotation(np.eye(3), "C2"))
    big = [m for m in with_mean if m.mean]
    assert len(with_mean) == 6 and len(big) == 3
    assert all(m.size == 2 * marks[0].size for m in big)


def test_lower_end_is_filled():
    R = quaternion_to_matrix(np.array([0.9, 0.3, -0.2, 0.1]))
    marks = stereonet_markers(AmbiguousSample(R[None], "C2"))
    u1 = R[:, 0]
    filled = next(m for m in marks if m.kind == "axis-filled")
    lower = u1 if u1[2] <= 0 else -u1
    assert_allclose(filled.point, project(lower))


def test_render_deterministic_and_group_checked():
    s = AmbiguousSample(haar_rotation(np.random.default_rng(4), 5), "C2")
    svg = render_stereonet(s, AmbiguousRotation(s.reps[0], "C2"))
    assert svg == render_stereonet(s, AmbiguousRotation(s.reps[0], "C2"))
    assert svg.count("<polygon") == 6 and svg.count("<circle") == 1 + 12
    with pytest.raises(ValueError):
        render_stereonet(AmbiguousSample(s.reps, "O"))


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------


def test_gen_is_deterministic(tmp_path):
    a = _gen(tmp_path, "a.csv", "--group", "O", "--family", "uniform", "-n", 100, "--seed", 1)
    b = _gen(tmp_path, "b.csv", "--group", "O", "--family", "uniform", "-n", 100, "--seed", 1)
    assert a.read_bytes() == b.read_bytes()
    c = _gen(tmp_path, "c.csv", "--group", "O", "--family", "uniform", "-n", 100, "--seed", 2)
    assert a.read_bytes() != c.read_bytes()


def test_gen_round_trip_and_header(tmp_path):
    q = "0.8,0.2,-0.4,0.4"
    path = _gen(tmp_path, "w.csv", "--group", "T", "--family", "watson", "--kappa", 5, "--mode", q, "-n", 30,
                "--seed", 3)
    ds = read_dataset(str(path))
    assert ds.meta["family"] == "watson" and ds.meta["seed"] == "3" and float(ds.meta["kappa"]) == 5.0
    qv = np.array([float(x) for x in q.split(",")])
    mode = AmbiguousRotation(quaternion_to_matrix(qv / np.linalg.norm(qv)), "T")
    expected = sample(DistributionSpec("watson", mode, 5.0), 30, np.random.default_rng(3))
    assert np.abs(ds.samples[0].reps - expected.reps).max() < 1e-15


def test_gen_watson_mean_near_mode(tmp_path, capsys):
    path = _gen(tmp_path, "w.csv", "--group", "O", "--family", "watson", "--kappa", 50, "--mode", "0,1,0,0",
                "-n", 100)
    code, out, _ = _run(["mean", "--group", "O", path], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["n"] == 100 and d["group"] == "O" and d["config"]["seed"] == 0
    mean = AmbiguousRotation(quaternion_to_matrix(np.array(d["mean_quaternion"])), "O")
    mode = AmbiguousRotation(quaternion_to_matrix(np.array([0.0, 1, 0, 0])), "O")
    assert quotient_distance(mean, mode) < 0.05


def test_gen_cardioid_kappa_too_large(capsys):
    code, _, err = _run(["gen", "--group", "O", "--family", "cardioid", "--kappa", 10], capsys)
    assert code == 2 and "kappa" in err


@pytest.mark.parametrize("argv", [
    ["gen", "--group", "Z9"],
    ["gen", "--group", "O", "-n", "abc"],
    ["frobnicate"],
    ["gen"],
    ["test-location", "x.csv", "--m0", "1,0,0"],
])
def test_usage_errors_exit_2(argv, capsys):
    code, _, err = _run(argv, capsys)
    assert code == 2 and err


def test_test_uniformity_c2_components(tmp_path, capsys):
    path = _gen(tmp_path, "u.csv", "--group", "C2", "-n", 50)
    code, out, _ = _run(["test-uniformity", "--group", "C2", "--mode", "asymptotic", path], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["method"] == "uniformity-S" and set(d["components"]) == {"S_R", "S_B"}
    assert 0 <= d["p_value"] <= 1
    code, out, _ = _run(["test-uniformity", "--statistic", "TG", "-B", 49, path], capsys)
    assert code == 0 and json.loads(out)["B"] == 49


def test_plot_c2(tmp_path, capsys):
    path = _gen(tmp_path, "c2.csv", "--group", "C2", "--family", "watson", "--kappa", 5, "-n", 8)
    fig = tmp_path / "fig.svg"
    code, _, _ = _run(["plot", "--group", "C2", path, "--out", fig], capsys)
    assert code == 0
    svg = fig.read_text()
    assert svg.startswith("<svg") and svg.count("<polygon") == 9 and svg.count("<circle") == 1 + 18
    code, _, _ = _run(["plot", path, "--out", tmp_path / "fig2.svg"], capsys)
    assert (tmp_path / "fig2.svg").read_bytes() == fig.read_bytes()
    code, out, _ = _run(["plot", "--no-mean", path], capsys)
    assert out.count("<polygon") == 8


def test_plot_rejects_other_groups(tmp_path, capsys):
    path = _gen(tmp_path, "o.csv", "--group", "O", "-n", 3)
    code, _, err = _run(["plot", path], capsys)
    assert code == 2 and "C2" in err


def test_degenerate_data_exit_1(tmp_path, capsys):
    path = tmp_path / "same.csv"
    path.write_text("# format=quaternion\n# group=O\n" + "1,0,0,0\n" * 8)
    code, _, err = _run(["test-location", path, "--m0", "1,0,0,0", "--method", "hotelling"], capsys)
    assert code == 1 and "singular" in err


def test_matrix_ingest_warns_on_repair(tmp_path, capsys):
    R = haar_rotation(np.random.default_rng(5), 3).reshape(3, 9) + 1e-7
    path = tmp_path / "m.csv"
    path.write_text("# format=matrix\n# group=D2\n" + "".join(",".join("%.17g" % x for x in r) + "\n" for r in R))
    code, out, err = _run(["disp", path], capsys)
    assert code == 0 and "projected onto SO(3)" in err
    assert 0 <= json.loads(out)["dispersion"] <= 2


def test_remaining_commands(tmp_path, capsys):
    a = _gen(tmp_path, "a.csv", "--group", "D2", "--family", "watson", "--kappa", 100, "-n", 20, "--seed", 1)
    b = _gen(tmp_path, "b.csv", "--group", "D2", "--family", "watson", "--kappa", 100, "-n", 20, "--seed", 2)
    cases = [
        ["disp", a],
        ["test-location", a, "--m0", "1,0,0,0", "-B", 49],
        ["test-location", a, "--m0", "1,0,0,0", "--method", "hotelling"],
        ["test-two-sample", a, b, "-B", 49],
        ["test-two-sample", a, b, "--method", "hotelling"],
        ["test-independence", a, b, "-B", 49],
        ["fit", a],
        ["fit", a, "--family", "cardioid"],
        ["regress", a, b],
        ["misorient", a, b, "--alt"],
    ]
    for argv in cases:
        code, out, err = _run(argv, capsys)
        assert code == 0, (argv, err)
        d = json.loads(out)
        assert d["config"]["command"] == argv[0]
    code, out, _ = _run(["test-location", a, "--m0", "1,0,0,0", "-B", 49, "--seed", 7], capsys)
    first = json.loads(out)["p_value"]
    code, out, _ = _run(["test-location", a, "--m0", "1,0,0,0", "-B", 49, "--seed", 7], capsys)
    assert json.loads(out)["p_value"] == first


def test_paired_file_and_group_pairs(tmp_path, capsys):
    rng = np.random.default_rng(6)
    U = AmbiguousSample(haar_rotation(rng, 10), "C2")
    A = haar_rotation(rng)
    V = AmbiguousSample(A @ U.reps, "O")
    write_dataset(tmp_path / "p.csv", [U, V])
    code, out, _ = _run(["regress", tmp_path / "p.csv"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["groups"] == ["C2", "O"] and d["r"] == pytest.approx(1.0)
    write_dataset(tmp_path / "u.csv", U)
    write_dataset(tmp_path / "v.csv", V)
    code, out, _ = _run(["misorient", tmp_path / "u.csv", tmp_path / "v.csv", "--group", "C2,O"], capsys)
    assert code == 0 and len(json.loads(out)["pairs"]) == 10
    code, _, _ = _run(["regress", tmp_path / "u.csv"], capsys)
    assert code == 2


def test_console_script():
    exe = shutil.which("ambirot")
    cmd = [exe] if exe else [sys.executable, "-m", "ambirot.cli"]
    proc = subprocess.run(cmd + ["--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "test-uniformity" in proc.stdout
