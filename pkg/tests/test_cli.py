import csv
import io
import json
import math

import numpy as np
import pytest

from chaosbounds import cli, nets
from chaosbounds.tensor import CoefficientTensor, load_tensor, tensor_to_dict


def write(tmp_path, name, arr, sparse=False):
    p = tmp_path / name
    p.write_text(json.dumps(tensor_to_dict(CoefficientTensor(np.asarray(arr, float)), sparse=sparse)))
    return str(p)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


def run_csv(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--format", "csv")
    return code, list(csv.reader(io.StringIO(out)))


@pytest.fixture
def identity(tmp_path):
    return write(tmp_path, "id.json", np.eye(2))


@pytest.fixture
def rank_one(tmp_path):
    return write(tmp_path, "e1.json", [[1.0, 0.0], [0.0, 0.0]], sparse=True)


def test_norms_identity(capsys, identity):
    code, rep = run_json(capsys, "norms", "--tensor", identity)
    assert code == 0
    assert [(a["s"], a["exact"]) for a in rep["alphas"]] == [(1, True), (2, True)]
    assert rep["alphas"][0]["value"] == pytest.approx(math.sqrt(2), rel=1e-15)
    assert rep["alphas"][1]["value"] == pytest.approx(1.0, rel=1e-12)
    assert rep["provenance"]["seed"] == 0 and "numpy" in rep["provenance"]["versions"]


def test_norms_zero_and_ones(capsys, tmp_path):
    code, rep = run_json(capsys, "norms", "--tensor", write(tmp_path, "z.json", np.zeros((2, 2, 2))))
    assert code == 0 and all(a["value"] == 0 for a in rep["alphas"])
    code, rows = run_csv(capsys, "norms", "--tensor", write(tmp_path, "o.json", np.ones((2, 2, 2))))
    assert rows[0] == ["s", "value", "exact", "partition"]
    vals = [float(r[1]) for r in rows[1:]]
    assert vals[0] == pytest.approx(2 * math.sqrt(2), rel=1e-15)
    assert vals[2] <= vals[1] + 1e-9 <= vals[0] + 2e-9
    code, rows = run_csv(capsys, "norms", "--tensor", write(tmp_path, "o.json", np.ones((2, 2, 2))), "--s", "2")
    assert len(rows) == 2 and rows[1][0] == "2"


def test_verify_examples(capsys, identity, rank_one):
    code, rep = run_json(capsys, "verify", "--tensor", identity, "--M", "1", "--samples", "20000")
    assert code == 0
    assert rep["oracle"] == pytest.approx(2.0) and rep["bound"] == pytest.approx(2.0)
    assert rep["ratio"] == pytest.approx(1.0) and rep["oracle_source"] == "wick"
    code, rep = run_json(capsys, "verify", "--tensor", rank_one, "--M", "2", "--samples", "20000")
    assert code == 0 and rep["oracle"] == pytest.approx(9.0) and rep["bound"] == pytest.approx(16.0)
    code, rep = run_json(capsys, "verify", "--tensor", rank_one, "--M", "2", "--C", "0.1", "--samples", "20000")
    assert code == 1 and rep["pass"] is False


def test_verify_fallback(capsys, tmp_path):
    path = write(tmp_path, "r.json", np.arange(8.0).reshape(2, 2, 2))
    code, rep = run_json(capsys, "verify", "--tensor", path, "--M", "2", "--budget", "10",
                         "--samples", "10000")
    assert rep["oracle_source"] == "mc_fallback" and rep["fallback_warning"] is True
    assert code in (0, 1)
    code, _, err = run(capsys, "verify", "--tensor", path, "--M", "2", "--budget", "10", "--samples", "100")
    assert code == 2 and "samples" in err


def test_verify_csv_schema(capsys, identity):
    code, rows = run_csv(capsys, "verify", "--tensor", identity, "--M", "1", "--samples", "10000")
    assert rows[0] == ["M", "oracle", "oracle_source", "mc_estimate", "mc_lo", "mc_hi", "bound", "C",
                       "ratio", "pass"]
    assert len(rows) == 2 and rows[1][-1] == "True"


def test_bound_command(capsys, identity):
    code, rep = run_json(capsys, "bound", "--tensor", identity, "--M", "1", "--x", "4")
    assert code == 0 and rep["moment_bound"] == pytest.approx(2.0)
    assert rep["tail_bound"] == pytest.approx(math.exp(-4), rel=1e-12)
    code, rows = run_csv(capsys, "bound", "--tensor", identity, "--M", "3")
    assert rows[0] == ["M", "C", "s", "alpha", "exact", "contribution", "raw_factor",
                       "log_moment_bound", "tail_x", "tail_bound"]
    assert len(rows) == 3


def test_nets_command(capsys, tmp_path):
    path = write(tmp_path, "emb.json", nets.identity_embedding(2).coeffs)
    code, rows = run_csv(capsys, "nets", "--tensor", path, "--t", "0.5", "1", "--samples", "5000")
    assert code == 0 and rows[0] == ["t", "bound", "estimate", "se", "pass"]
    assert [r[0] for r in rows[1:]] == ["0.5", "1.0"]


def test_partition_command(capsys, tmp_path):
    g = np.random.default_rng(0)
    from chaosbounds import bounds
    A = bounds.normalize_DM(CoefficientTensor(g.standard_normal((2, 2, 2))), 1)[0]
    path = write(tmp_path, "a.json", A.coeffs)
    code, rep = run_json(capsys, "partition", "--tensor", path, "--r", "8", "--seed", "3")
    assert code == 0 and rep["checks"]["membership_next_level"] is True
    members = sorted(i for p in rep["parts"] for i in p["member_indices"])
    assert members == list(range(1, 9))
    assert all(1 <= p["shift_index"] <= 8 for p in rep["parts"])
    code, rows = run_csv(capsys, "partition", "--tensor", path, "--r", "8", "--seed", "3")
    assert rows[0] == ["part", "shift_index", "members"]
    assert sorted(int(m) for r in rows[1:] for m in r[2].split()) == list(range(1, 9))
    bad = tmp_path / "u.json"
    bad.write_text(json.dumps([[[2.0, 0.0], [0.0, 0.0]]]))
    code, _, err = run(capsys, "partition", "--tensor", path, "--U", str(bad))
    assert code == 2 and "not in the class" in err


def test_fit_c_command(capsys, tmp_path, identity, rank_one):
    code, rep = run_json(capsys, "fit-c", identity, rank_one, "--M", "1", "2", "--samples", "10000")
    assert code == 0
    # the identity at M=2 has fourth moment 3 E|g|^4 = 24 against a raw factor of 2
    assert rep["C_star_moment"] == pytest.approx(24 ** 0.25 / 2, rel=1e-12)
    code, rows = run_csv(capsys, "fit-c", "--tensor", identity, "--M", "1", "--x", "1",
                         "--samples", "10000")
    assert rows[0] == ["tensor", "kind", "param", "measured", "source", "raw_factor",
                       "C_star_moment", "C_star_tail"]
    assert [r[1] for r in rows[1:]] == ["moment", "tail"]


def test_output_file_and_byte_stability(capsys, tmp_path, identity):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert cli.main(["verify", "--tensor", identity, "--M", "1", "--samples", "10000",
                         "--seed", "5", "--output", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    assert rep["provenance"]["config"]["seed"] == 5 and "output" not in rep["provenance"]["config"]


def test_report_tensor_roundtrip(tmp_path, rank_one):
    A = load_tensor(rank_one)
    path = write(tmp_path, "again.json", A.coeffs)
    assert np.array_equal(load_tensor(path).coeffs, A.coeffs)


def test_exit_codes(capsys, tmp_path, identity):
    assert run(capsys, "norms", "--tensor", str(tmp_path / "missing.json"))[0] == 2
    assert run(capsys, "verify", "--tensor", identity)[0] == 2
    assert run(capsys, "bogus")[0] == 2
    assert run(capsys, "bound", "--tensor", identity, "--M", "0")[0] == 2
    garbage = tmp_path / "g.json"
    garbage.write_text("{not json")
    assert run(capsys, "norms", "--tensor", str(garbage))[0] == 2
    big = write(tmp_path, "big.json", np.ones((3, 3, 3, 3)))
    code, _, err = run(capsys, "verify", "--tensor", big, "--M", "3", "--budget", "1000",
                       "--samples", "10")
    assert code == 2
    code, _, err = run(capsys, "nets", "--tensor", write(tmp_path, "d12.json", np.zeros((1,) * 12)),
                       "--samples", "10")
    assert code == 3 and "capacity" in err
