import json

import numpy as np
import pytest

from opvg import cli
from opvg.algebra import AElem
from opvg.errors import MetricInvalid, ParseError, SchemaError
from opvg.scene import coefficient_vector, load_scene, scene_from_dict

BASE = {
    "schema": 1,
    "algebra": {"fibers": 1},
    "dimension": 2,
    "coordinates": ["u", "v"],
    "metric": [["1", "0"], ["0", "1"]],
    "domain": {"box": [[0, 1], [0, 1]]},
}


def doc(**kw):
    d = json.loads(json.dumps(BASE))
    d.update(kw)
    return d


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_load_examples(scene_path):
    s = load_scene(scene_path("euclidean2d"))
    assert s.metric.nu == AElem([1.0])
    s = load_scene(scene_path("sphere_fibered"))
    assert s.fibers == 2 and s.algebra.labels == ("r=1", "r=2")
    assert len(s.digest) == 64


def test_parse_error_has_offset():
    d = doc(constants={"r": [[1, 0]]}, metric=[["r^2*sin(u", "0"], ["0", "1"]])
    with pytest.raises(ParseError) as e:
        scene_from_dict(d)
    assert e.value.path == "/metric/0/0" and e.value.offset == 9


@pytest.mark.parametrize("patch,path", [
    ({"extra": 1}, "/"),
    ({"schema": 2}, "/schema"),
    ({"dimension": 3}, "/coordinates"),
    ({"domain": {"box": [[0, 1]]}}, "/domain/box"),
    ({"domain": {"box": [[1, 0], [0, 1]]}}, "/domain/box"),
    ({"constants": {"r": [[1, 0], [2, 0]]}}, "/constants/r"),
    ({"forms": {"w": {"k": 1, "components": {"[2]": "u"}}}}, "/forms/w/components/[2]"),
    ({"forms": {"w": {"k": 3, "components": {}}}}, "/forms/w/k"),
    ({"vector_fields": {"X": ["u"]}}, "/vector_fields/X"),
    ({"coordinates": ["u", "sin"]}, "/coordinates"),
])
def test_schema_errors(patch, path):
    with pytest.raises(SchemaError) as e:
        scene_from_dict(doc(**patch))
    assert e.value.path == path


def test_metric_invalid():
    with pytest.raises(MetricInvalid):
        scene_from_dict(doc(metric=[["u - 0.5", "0"], ["0", "1"]]))
    with pytest.raises(MetricInvalid):
        scene_from_dict(doc(metric=[["1", "u"], ["v", "1"]]))


def test_coefficient_vector(scene_path):
    s = load_scene(scene_path("sphere_fibered"))
    p = np.array([1.0, 1.0])
    assert np.array_equal(coefficient_vector(s, "v", p), coefficient_vector(s, "1", p))
    assert np.array_equal(coefficient_vector(s, "du", p), coefficient_vector(s, "0", p))
    with pytest.raises(SchemaError):
        coefficient_vector(s, "7", p)
    with pytest.raises(SchemaError):
        coefficient_vector(s, "nope", p)


def test_check_euclidean(scene_path, capsys):
    code, out, _ = run(["check", scene_path("euclidean2d"), "--samples", "4"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["exit"] == 0
    assert rep["command"] == "check"
    assert all(r["pass"] for r in rep["identities"])
    assert "timings" not in rep


def test_check_corrupted_fails(scene_path, capsys):
    code, out, _ = run(["check", scene_path("corrupted_connection"), "--samples", "4"], capsys)
    rep = json.loads(out)
    assert code == 1
    failed = {r["name"] for r in rep["identities"] if not r["pass"]}
    assert "torsion" in failed and "christoffel_symmetry" in failed


def test_check_is_byte_deterministic(scene_path, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        cli.main(["check", scene_path("sphere_fibered"), "--samples", "4", "--seed", "7", "--output", str(out)])
    assert a.read_bytes() == b.read_bytes()


def test_invariants_examples(scene_path, capsys):
    code, out, _ = run(["invariants", scene_path("sphere_fibered"), "--point", f"{np.pi / 2},1",
                        "--plane", "du,dv"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert np.allclose(rep["results"]["scalar"], [[2, 0], [0.5, 0]], atol=1e-12)
    assert np.allclose(rep["results"]["sectional"][0]["K"], [[1, 0], [0.25, 0]], atol=1e-12)
    _, out, _ = run(["invariants", scene_path("euclidean2d"), "--point", "0.5,0.5"], capsys)
    assert json.loads(out)["results"]["scalar"] == [[0.0, 0.0]]
    _, out, _ = run(["invariants", scene_path("minkowski4d"), "--point", "0.5,0.5,0.5,0.5"], capsys)
    assert json.loads(out)["results"]["nu"] == [[-1.0, 0.0]]


def test_invariants_errors(scene_path, capsys):
    code, _, err = run(["invariants", scene_path("sphere_fibered"), "--point", "3.1,1"], capsys)
    assert code == 2 and "OutOfDomain" in err
    code, _, err = run(["invariants", scene_path("sphere_fibered"), "--point", "1,1", "--plane", "du,du"], capsys)
    assert code == 2 and "DegeneratePlane" in err
    code, _, err = run(["invariants", scene_path("sphere_fibered"), "--point", "1"], capsys)
    assert code == 2 and "SchemaError" in err


def test_integrate_examples(scene_path, capsys):
    _, out, _ = run(["integrate", scene_path("euclidean2d"), "--form", "vol"], capsys)
    assert np.allclose(json.loads(out)["results"]["value"], [[1, 0]], atol=1e-14)
    code, out, _ = run(["integrate", scene_path("euclidean2d"), "--stokes", "omega"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["identities"][0]["max_residual"] < 1e-10
    _, out, _ = run(["integrate", scene_path("sphere_fibered"), "--function", "r*u*v", "--quad", "6,2"], capsys)
    val = json.loads(out)["results"]["value"]
    # r * int_{0.2}^{2.9} u du * int_0^6 v dv
    want = np.array([1.0, 2.0]) * (2.9 ** 2 - 0.2 ** 2) / 2 * 18
    assert np.allclose([v[0] for v in val], want, rtol=1e-12)
    code, out, _ = run(["integrate", scene_path("euclidean2d"), "--adjoint", "beta,alpha"], capsys)
    assert code == 0


def test_integrate_errors(scene_path, capsys):
    code, _, err = run(["integrate", scene_path("euclidean2d"), "--form", "omega"], capsys)
    assert code == 2 and "WrongDegree" in err
    code, _, err = run(["integrate", scene_path("euclidean2d"), "--adjoint", "omega,vol"], capsys)
    assert code == 2 and "SupportViolation" in err
    code, _, err = run(["integrate", scene_path("euclidean2d"), "--form", "missing"], capsys)
    assert code == 2 and "SchemaError" in err
    code, _, err = run(["integrate", scene_path("euclidean2d"), "--function", "sin(u"], capsys)
    assert code == 2 and "ParseError" in err
    code, _, err = run(["integrate", scene_path("euclidean2d"), "--form", "vol", "--quad", "x"], capsys)
    assert code == 2


def test_bad_scene_file(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    code, _, err = run(["check", str(p)], capsys)
    assert code == 2 and "SchemaError" in err
