"""Command line interface: subcommands, exit codes, config merging,
and reproducibility."""

import json

import numpy as np
import pytest

from plsmooth.builders import (perturbed_kuhn_map, subdivided_tet,
                               two_tet_map)
from plsmooth.cli import main
from plsmooth.mesh import pl_map_from_vertex_images, save_document


@pytest.fixture(scope="module")
def kuhn_doc(tmp_path_factory):
    path = tmp_path_factory.mktemp("docs") / "kuhn.json"
    save_document(perturbed_kuhn_map(), path)
    return str(path)


@pytest.fixture(scope="module")
def fold_doc(tmp_path_factory):
    cx = subdivided_tet()
    images = cx.points.copy()
    images[4] = [0.8, 0.4, 0.4]
    path = tmp_path_factory.mktemp("docs") / "fold.json"
    save_document(pl_map_from_vertex_images(cx, images), path)
    return str(path)


def test_validate_ok(kuhn_doc, tmp_path, capsys):
    assert main(["validate", kuhn_doc]) == 0
    assert "PASS" in capsys.readouterr().out
    out = tmp_path / "report.txt"
    assert main(["validate", kuhn_doc, "--out", str(out)]) == 0
    assert "PASS" in out.read_text()


def test_validate_fold_exits_2(fold_doc, capsys):
    assert main(["validate", fold_doc]) == 2
    assert "validation failure" in capsys.readouterr().err


def test_missing_file_exits_1(capsys):
    assert main(["validate", "/no/such/file.json"]) == 1
    assert "error" in capsys.readouterr().err


def test_malformed_json_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["validate", str(bad)]) == 1


def test_complex_without_pieces_exits_2(tmp_path):
    doc = tmp_path / "mesh_only.json"
    save_document(subdivided_tet(), doc)
    assert main(["validate", str(doc)]) == 2


def test_smooth_summary(kuhn_doc, tmp_path):
    out = tmp_path / "summary.json"
    assert main(["smooth", kuhn_doc, "--lam", "0.5",
                 "--out", str(out)]) == 0
    summary = json.loads(out.read_text())
    assert summary["lambda"] == 0.5
    assert summary["min_jacobian_det"] > 0
    assert summary["volume_difference_set"] > 0
    assert len(summary["face_widths"]) == 6
    assert len(summary["edge_rho"]) == 1


def test_sweep_table_and_rozumny(kuhn_doc, tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", kuhn_doc, "--lambdas", "1.0", "0.5",
                 "--epsilon", "10.0", "--norm", "lp:2",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("lambda,vol_E,")
    assert len(lines[1].split(",")) == 8
    assert "# rozumny lp:2" in lines
    idx = lines.index("# rozumny lp:2")
    vals = [float(tok) for tok in lines[idx + 1].split(",")]
    assert len(vals) >= 2 and all(np.isfinite(vals))


def test_sweep_unmet_epsilon_exits_4(kuhn_doc, capsys):
    assert main(["sweep", kuhn_doc, "--lambdas", "1.0",
                 "--epsilon", "1e-12"]) == 4
    assert "not met" in capsys.readouterr().err


def test_bad_norm_spec_exits_1(kuhn_doc, capsys):
    assert main(["sweep", kuhn_doc, "--lambdas", "1.0",
                 "--norm", "frobnicate:2"]) == 1


def test_config_defaults_and_explicit_override(kuhn_doc, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lam": 0.25, "seed": 42}))
    out = tmp_path / "a.json"
    assert main(["--config", str(cfg), "smooth", kuhn_doc,
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text())["lambda"] == 0.25
    # an explicit flag beats the config value
    out2 = tmp_path / "b.json"
    assert main(["--config", str(cfg), "smooth", kuhn_doc,
                 "--lam", "0.5", "--out", str(out2)]) == 0
    assert json.loads(out2.read_text())["lambda"] == 0.5


def test_repeatable_outputs(kuhn_doc, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["sweep", kuhn_doc, "--lambdas", "1.0", "0.5",
                     "--epsilon", "10", "--seed", "5",
                     "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_two_tet_document_roundtrip_via_cli(tmp_path):
    M = np.eye(3)
    pl = two_tet_map(M, M + np.outer([0.2, 0.0, 0.1], [0.0, 0.0, 1.0]))
    doc = tmp_path / "two_tet.json"
    save_document(pl, doc)
    assert main(["validate", str(doc)]) == 0
