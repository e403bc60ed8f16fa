import json

import pytest

from gkan.cli import main
from gkan.experiments import (
    ExperimentSpec,
    SpecError,
    TABLES,
    format_table_report,
    parse_spec,
    summary_from_csvs,
    table_parameter_counts,
)
from gkan.training import read_csv

SYNTH_SPEC = """
[dataset]
name = synthetic
num_nodes = 90
num_classes = 3
dim = 6

[model]
architecture = {arch}
hidden = 8

[train]
epochs = {epochs}
record_time = false

[run]
repeats = 3
seeds = 0, 1, 2
output_dir = {out}
"""


def spec_file(tmp_path, arch="GKAN2", epochs=5, out=None, name="spec.ini"):
    path = tmp_path / name
    path.write_text(SYNTH_SPEC.format(arch=arch, epochs=epochs, out=out or tmp_path / "runs"))
    return path


def test_parse_defaults_and_overrides():
    spec = parse_spec("[model]\narchitecture = gcn\nhidden = 100\n[run]\nrepeats = 2\n")
    assert spec.model.architecture == "GCN" and spec.model.hidden == 100
    assert spec.seeds == (0, 1)
    assert spec.dataset.name == "cora" and spec.dataset.features == 100
    assert spec.train.epochs == 300 and spec.train.grid_update_epochs == ()
    assert (spec.model.g, spec.model.k) == (3, 1)


@pytest.mark.parametrize(
    "text",
    [
        "[model\nhidden = 3",
        "[model]\nwidth = 3\n",
        "[extras]\na = 1\n",
        "[model]\nhidden = many\n",
        "[model]\narchitecture = GAT\n",
        "[model]\ng = 0\n",
        "[dataset]\nname = citeseer\n",
        "[train]\nepochs = 0\n",
        "[run]\nrepeats = 2\nseeds = 1\n",
        "[train]\nrecord_time = maybe\n",
    ],
)
def test_parse_rejects(text):
    with pytest.raises(SpecError):
        parse_spec(text)


def test_train_writes_one_csv_per_seed(tmp_path, capsys):
    out = tmp_path / "runs"
    assert main(["train", "--config", str(spec_file(tmp_path, out=out))]) == 0
    assert sorted(p.name for p in out.glob("*.csv")) == [f"run_seed{s}.csv" for s in (0, 1, 2)]
    assert sorted(p.name for p in out.glob("summary*")) == ["summary.json"]
    assert len(list(out.glob("*.manifest.json"))) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seeds"] == [0, 1, 2]
    # statistics recompute from the CSVs alone
    again = summary_from_csvs(sorted(out.glob("run_seed*.csv")))
    assert again["test_acc_mean"] == summary["test_acc_mean"]
    assert again["test_acc_std"] == summary["test_acc_std"]
    for s in (0, 1, 2):
        assert read_csv(out / f"run_seed{s}.csv")["epoch"] == [1, 2, 3, 4, 5]
    assert "test accuracy" in capsys.readouterr().out


def test_train_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["train", "--config", str(spec_file(tmp_path, out=a))]) == 0
    assert main(["train", "--config", str(spec_file(tmp_path, out=b))]) == 0
    for s in (0, 1, 2):
        assert (a / f"run_seed{s}.csv").read_bytes() == (b / f"run_seed{s}.csv").read_bytes()


def test_flag_overrides(tmp_path):
    out = tmp_path / "flags"
    rc = main(["train", "--config", str(spec_file(tmp_path)), "--seed", "5", "--repeats", "2", "--out", str(out), "--epochs", "2"])
    assert rc == 0
    assert sorted(p.name for p in out.glob("*.csv")) == ["run_seed5.csv", "run_seed6.csv"]
    assert read_csv(out / "run_seed5.csv")["epoch"] == [1, 2]


def test_malformed_spec_exits_2_without_artifacts(tmp_path, capsys):
    out = tmp_path / "never"
    bad = tmp_path / "bad.ini"
    bad.write_text(f"[model]\nhidden = lots\n[run]\noutput_dir = {out}\n")
    assert main(["train", "--config", str(bad)]) == 2
    assert not out.exists()
    assert "error" in capsys.readouterr().err
    assert main(["train", "--config", str(tmp_path / "missing.ini")]) == 2


def test_missing_dataset_fails(tmp_path, capsys):
    spec = tmp_path / "cora.ini"
    spec.write_text(f"[dataset]\ndata_dir = {tmp_path / 'nowhere'}\n[run]\noutput_dir = {tmp_path / 'out'}\n")
    assert main(["train", "--config", str(spec)]) == 1
    assert not (tmp_path / "out").exists()
    assert "cora" in capsys.readouterr().err


def test_train_gcn_on_cora_format_reports_count(tmp_path, fake_cora, capsys):
    spec = tmp_path / "gcn.ini"
    spec.write_text(
        f"[dataset]\ndata_dir = {fake_cora}\nfeatures = 100\n"
        f"[model]\narchitecture = GCN\nhidden = 100\n"
        f"[train]\nepochs = 3\n[run]\noutput_dir = {tmp_path / 'gcn'}\n"
    )
    assert main(["train", "--config", str(spec)]) == 0
    assert "10,807" in capsys.readouterr().out
    assert json.loads((tmp_path / "gcn" / "summary.json").read_text())["num_parameters"] == 10807


def test_table_parameter_columns():
    assert table_parameter_counts(1) == [22147, 22279, 22279, 22279, 22279]
    assert table_parameter_counts(2) == [21639, 21138, 21138, 20727, 20727]
    assert [r.reported_params for r in TABLES[1]["rows"]] == table_parameter_counts(1)
    assert [r.reported_params for r in TABLES[2]["rows"]] == table_parameter_counts(2)


def test_report_format():
    rows = [
        {"model": r.model.label(), "num_parameters": r.reported_params, "test_acc_mean": 0.5, "test_acc_std": 0.01,
         "reported_params": r.reported_params, "reported_test": r.reported_test}
        for r in TABLES[1]["rows"]
    ]
    report = format_table_report(1, rows)
    assert "paper-reported" in report
    assert "61.76" in report and "53.50" in report
    assert report.count("22,279") == 8


@pytest.mark.parametrize("table, counts", [(1, ["22,147", "22,279"]), (2, ["21,639", "21,138", "20,727"])])
def test_table_command_on_cora_format(tmp_path, fake_cora, capsys, table, counts):
    out = tmp_path / f"table{table}"
    rc = main(["table", str(table), "--data-dir", str(fake_cora), "--out", str(out), "--epochs", "2", "--repeats", "1"])
    assert rc == 0
    report = (out / "report.txt").read_text()
    assert report == capsys.readouterr().out
    lines = report.splitlines()[2:]
    assert len(lines) == 5
    for c in counts:
        assert c in report
    assert len(list(out.glob("row*/run_seed0.csv"))) == 5
    if table == 1:
        assert "61.76" in report


def test_table_without_data(tmp_path, capsys):
    assert main(["table", "1", "--data-dir", str(tmp_path / "nowhere"), "--out", str(tmp_path / "t")]) == 1
    assert "missing dataset" in capsys.readouterr().err


@pytest.mark.parametrize("axis, values, fixed", [("g", [3, 7, 11], {"k": 1, "hidden": 16}), ("k", [1, 2, 3], {"g": 3, "hidden": 16}), ("h", [8, 12, 16], {"g": 3, "k": 1})])
def test_sweep_axes(tmp_path, capsys, axis, values, fixed):
    out = tmp_path / f"sweep_{axis}"
    spec = spec_file(tmp_path, epochs=4)
    assert main(["sweep", "--axis", axis, "--config", str(spec), "--repeats", "1", "--out", str(out)]) == 0
    for v in values:
        manifest = json.loads((out / f"{axis}={v}" / "run_seed0.manifest.json").read_text())
        mc = manifest["model_config"]
        for key, want in fixed.items():
            got = mc["hidden"] if key == "hidden" else mc["spline"][0 if key == "g" else 1]
            assert got == want
        epochs = read_csv(out / f"{axis}={v}" / "run_seed0.csv")["epoch"]
        assert epochs == sorted(epochs)
    overlay = (out / f"sweep_{axis}.csv").read_text().splitlines()
    assert len(overlay) == 1 + len(values)
    text = capsys.readouterr().out
    assert f"best {axis}" in text and "paper-reported" in text


def test_sweep_rejects_bad_values(tmp_path):
    spec = spec_file(tmp_path)
    assert main(["sweep", "--axis", "g", "--values", "0", "--config", str(spec), "--out", str(tmp_path / "s")]) == 2
    with pytest.raises(SystemExit):
        main(["sweep", "--axis", "depth"])


@pytest.mark.parametrize(
    "argv",
    [["gradcheck"], ["gradcheck", "--arch", "GCN"], ["gradcheck", "--arch", "gkan1", "-k", "3", "-g", "7", "--h", "3"]],
)
def test_gradcheck_passes(argv, capsys):
    assert main(argv) == 0
    assert "PASS" in capsys.readouterr().out


def test_gradcheck_degree_zero(capsys):
    assert main(["gradcheck", "-k", "0"]) == 0
    out = capsys.readouterr().out
    assert "spline input grad    max |value| 0.000e+00" in out


def test_gradcheck_bad_settings():
    assert main(["gradcheck", "-g", "0"]) == 2


def test_synth_round_trip(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path), "--nodes", "50", "--classes", "2", "--dim", "3", "--name", "toy", "--seed", "4"]) == 0
    assert (tmp_path / "toy.content").exists() and (tmp_path / "toy.cites").exists()
    rows = (tmp_path / "toy.content").read_text().splitlines()
    assert len(rows) == 50 and len(rows[0].split("\t")) == 5
    assert main(["synth", "--p-in", "0.1", "--p-out", "0.5", "--out", str(tmp_path)]) == 2


def test_default_spec_is_valid():
    spec = ExperimentSpec()
    assert spec.model.label() == "GKAN2(k=1,g=3,h=16)"
