import json

import pytest

from dfdsem.cli import main

from conftest import FIG3_COMPOSE


@pytest.fixture()
def fig3_file(tmp_path):
    path = tmp_path / "figure3.yml"
    path.write_text(FIG3_COMPOSE, "utf-8")
    return path


def test_build_single_file(tmp_path, fig3_file, capsys):
    out = tmp_path / "out"
    code = main(["build", "-o", str(out), "--seed", "3", str(fig3_file)])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "figure3" in stdout and "2-1" in stdout and "3-3" in stdout
    assert sorted(p.name for p in out.iterdir()) == [
        "figure3.dot", "figure3.explicit", "figure3.model",
        "figure3.reasoned", "figure3.report",
    ]


def test_build_corpus_error_exit_code(tmp_path, fig3_file, capsys):
    (tmp_path / "bad.yml").write_text("services: [broken\n", "utf-8")
    out = tmp_path / "out"
    code = main(["build", "-o", str(out), str(tmp_path)])
    assert code == 1
    err = capsys.readouterr().err
    assert "bad.yml" in err


def test_build_with_labels_prints_table(tmp_path, fig3_file, capsys):
    labels = tmp_path / "labels.csv"
    labels.write_text("figure3,1\n", "utf-8")
    code = main(["build", "-o", str(tmp_path / "out"), "--labels", str(labels),
                 str(fig3_file)])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "Precision" in stdout and "Recall" in stdout


def test_analyze_reasoned_graph(tmp_path, fig3_file, capsys):
    out = tmp_path / "out"
    main(["build", "-o", str(out), str(fig3_file)])
    reports = tmp_path / "reports"
    code = main(["analyze", "-o", str(reports), str(out / "figure3.reasoned")])
    assert code == 0
    report = json.loads((reports / "figure3.report").read_text("utf-8"))
    assert report["matched"] == ["2-1", "3-3"]


def test_analyze_explicit_graph_materializes_first(tmp_path, fig3_file):
    out = tmp_path / "out"
    main(["build", "-o", str(out), str(fig3_file)])
    reports = tmp_path / "reports"
    code = main(["analyze", "-o", str(reports), str(out / "figure3.explicit")])
    assert code == 0
    report = json.loads((reports / "figure3.report").read_text("utf-8"))
    assert report["matched"] == ["2-1", "3-3"]


def test_eval_from_reports(tmp_path, fig3_file, capsys):
    out = tmp_path / "out"
    main(["build", "-o", str(out), str(fig3_file)])
    labels = tmp_path / "labels.csv"
    labels.write_text("figure3,1\n", "utf-8")
    code = main(["eval", "--labels", str(labels), "-o", str(tmp_path / "metrics"),
                 str(out / "figure3.report")])
    assert code == 0
    rows = json.loads((tmp_path / "metrics" / "evaluation.json").read_text("utf-8"))
    assert rows[0]["positive"] == 1
    assert "1.00" in capsys.readouterr().out


def test_render(tmp_path, fig3_file, capsys):
    out = tmp_path / "out"
    main(["build", "-o", str(out), str(fig3_file)])
    rendered = tmp_path / "rendered"
    code = main(["render", "-o", str(rendered), str(out / "figure3.model")])
    assert code == 0
    text = (rendered / "figure3.dot").read_text("utf-8")
    assert '"user" -> "process0"' in text


def test_pattern_filter(tmp_path, fig3_file):
    out = tmp_path / "out"
    code = main(["build", "-o", str(out), "--patterns", "2-1", "--formats",
                 "report", str(fig3_file)])
    assert code == 0
    report = json.loads((out / "figure3.report").read_text("utf-8"))
    assert [p["pattern_id"] for p in report["patterns"]] == ["2-1"]


def test_unknown_pattern_id_fails_cleanly(tmp_path, fig3_file, capsys):
    code = main(["build", "-o", str(tmp_path / "o"), "--patterns", "bogus",
                 str(fig3_file)])
    assert code == 2
    assert "bogus" in capsys.readouterr().err


def test_custom_taxonomy_flag(tmp_path, fig3_file):
    # Without the php/mongo entries everything is a generic process.
    taxonomy = tmp_path / "services.yml"
    taxonomy.write_text("services: []\nports: []\n", "utf-8")
    out = tmp_path / "out"
    code = main(["build", "-o", str(out), "-t", str(taxonomy), "--formats",
                 "report", str(fig3_file)])
    assert code == 0
    report = json.loads((out / "figure3.report").read_text("utf-8"))
    assert report["matched"] == []
