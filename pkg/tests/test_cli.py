import json
import pathlib
import subprocess
import sys

import pytest

from minmetric import cli
from minmetric.config import parse_config
from minmetric.errors import ConfigError
from minmetric.report import (
    Report,
    ReportSchemaError,
    deterministic_bytes,
    emit_machine,
    emit_text,
    parse_report,
)

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"

D16_BAD = """seed: 0
budget: 8
group: {kind: finite_table, name: D16}
metric:
  type: kakutani
  filtration:
    levels:
      0: [0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15]
      1: [0, 1, 2, 6, 7]
      2: [0, 1]
"""

FAILING_TASK = """seed: 0
budget: 8
group: {kind: free_group, rank: 2}
tasks:
  - oneparam: {f: ab}
"""


def write(tmp_path, text, name="exp.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# config errors --------------------------------------------------------------


@pytest.mark.parametrize(
    "text, field, line",
    [
        ("seed: 0\nbudget: 8\ngroup: {kind: banana}\n", "group.kind", 3),
        ("seed: 0\nbudget: 8\ngroup: {kind: unitary, n: 2}\nbogus: 1\n", "bogus", 4),
        ("seed: 0\nbudget: 8\ngroup: {kind: unitary, n: 2}\nmetric: {type: wobbly}\n", "metric.type", 4),
        ("seed: 0\nbudget: 8\ngroup: {kind: unitary, n: 2}\ntasks:\n  - certify: {condition: cond2}\n",
         "tasks.0.certify.U", 5),
        ("seed: 0\nbudget: 8\ngroup: {kind: unitary, n: 2}\ntasks:\n  - certify: {condition: cond9, U: 1}\n",
         "tasks.0.certify.condition", 5),
        ("seed: 0\nbudget: 0\ngroup: {kind: unitary, n: 2}\n", "budget", 2),
        ("schema_version: 2\nseed: 0\nbudget: 1\ngroup: {kind: unitary, n: 2}\n", "schema_version", 1),
    ],
)
def test_config_errors_name_field_and_line(text, field, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.field == field
    assert exc.value.line == line
    assert f"[field {field}]" in str(exc.value)


@pytest.mark.parametrize("missing", ["seed", "budget", "group"])
def test_missing_mandatory_fields(missing):
    lines = {"seed": "seed: 0", "budget": "budget: 8", "group": "group: {kind: unitary, n: 2}"}
    text = "\n".join(v for k, v in lines.items() if k != missing) + "\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.field == missing


def test_yaml_syntax_error_has_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("seed: 0\nbudget: [8\n")
    assert exc.value.line is not None
    assert "YAML syntax error" in str(exc.value)


def test_malformed_filtration_names_level():
    with pytest.raises(ConfigError) as exc:
        parse_config(D16_BAD)
    assert exc.value.field == "metric.filtration.levels.2"
    assert exc.value.line == 10
    assert "not symmetric" in str(exc.value)


def test_overrides_replace_seed_and_budget():
    cfg = parse_config("seed: 0\nbudget: 8\ngroup: {kind: unitary, n: 2}\n", {"seed": 5, "budget": None})
    assert (cfg.seed, cfg.budget) == (5, 8)


# exit codes -----------------------------------------------------------------


@pytest.mark.parametrize(
    "config, code",
    [("integer_lattice.yaml", 0), ("empty.yaml", 0), ("involutions.yaml", 1), ("euclidean.yaml", 1)],
)
def test_exit_codes_of_example_configs(config, code, capsys):
    assert cli.main(["report", "--config", str(CONFIGS / config)]) == code
    assert f"exit code: {code}" in capsys.readouterr().out


def test_failed_task_exits_2_and_run_continues(tmp_path, capsys):
    text = FAILING_TASK + "  - construct: {}\n"
    assert cli.main(["report", "--config", write(tmp_path, text), "--format", "machine"]) == 2
    rep = json.loads(capsys.readouterr().out)
    assert [t["status"] for t in rep["tasks"]] == ["failed", "constructed"]
    assert rep["tasks"][0]["error"]["type"] == "NoRootError"


def test_refuted_outranks_failed(tmp_path):
    text = """seed: 0
budget: 64
group: {kind: finite_product_of_involutions, depth: 6}
tasks:
  - nss: {U: 0.25}
  - oneparam: {f: 1}
"""
    assert cli.main(["report", "--config", write(tmp_path, text)]) == 1


def test_config_error_exits_3(tmp_path, capsys):
    assert cli.main(["certify", "--config", write(tmp_path, D16_BAD)]) == 3
    assert "levels.2" in capsys.readouterr().err
    assert cli.main(["certify", "--config", str(tmp_path / "absent.yaml")]) == 3
    assert cli.main(["certify"]) == 3


def test_subcommand_filters_tasks(capsys):
    assert cli.main(["construct", "--config", str(CONFIGS / "integer_lattice.yaml"), "--format", "machine"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert [t["task"] for t in rep["tasks"]] == ["construct"]
    assert rep["tasks"][0]["index"] == 2


# reports --------------------------------------------------------------------


def test_empty_task_list_echoes_config():
    r = cli.run(parse_config((CONFIGS / "empty.yaml").read_text()))
    assert r.tasks == []
    assert r.config == {"seed": 0, "budget": 1, "group": {"kind": "euclidean", "m": 1}, "tasks": []}
    assert r.exit_code == 0
    assert "no tasks" in emit_text(r)


def test_round_trip():
    r = cli.run(parse_config((CONFIGS / "involutions.yaml").read_text()))
    data = emit_machine(r)
    back = parse_report(data)
    assert back.to_dict() == r.to_dict()
    assert emit_machine(back) == data


def test_unknown_major_version_rejected():
    r = cli.run(parse_config((CONFIGS / "empty.yaml").read_text()))
    obj = r.to_dict()
    obj["schema_version"] = "2.0"
    with pytest.raises(ReportSchemaError):
        parse_report(json.dumps(obj))
    obj["schema_version"] = "1.7"
    assert isinstance(parse_report(json.dumps(obj)), Report)


def test_report_input_rerenders_and_bad_schema_exits_3(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert cli.main(["report", "--config", str(CONFIGS / "involutions.yaml"), "--out", str(out)]) == 1
    first = capsys.readouterr().out
    assert cli.main(["report", "--input", str(out)]) == 1
    assert capsys.readouterr().out == first
    obj = json.loads(out.read_text())
    obj["schema_version"] = "9.0"
    out.write_text(json.dumps(obj))
    assert cli.main(["report", "--input", str(out)]) == 3


def test_deterministic_bytes_across_runs():
    cfg = parse_config((CONFIGS / "cyclic_tower.yaml").read_text())
    a, b = cli.run(cfg), cli.run(cfg)
    assert deterministic_bytes(a) == deterministic_bytes(b)
    assert "wall_clock" not in json.loads(deterministic_bytes(a))


def test_parallel_matches_sequential():
    cfg = parse_config((CONFIGS / "involutions.yaml").read_text())
    assert deterministic_bytes(cli.run(cfg, parallel=True)) == deterministic_bytes(cli.run(cfg))


def test_seed_changes_sampled_results():
    text = (CONFIGS / "unitary2.yaml").read_text()
    a = cli.run(parse_config(text))
    b = cli.run(parse_config(text, {"seed": 11}))
    assert a.tasks[0]["status"] == b.tasks[0]["status"]
    assert deterministic_bytes(a) != deterministic_bytes(b)


def test_text_report_shows_witness_trace():
    text = emit_text(cli.run(parse_config((CONFIGS / "involutions.yaml").read_text())))
    assert "exponent  distance" in text
    assert "rows omitted" in text
    assert "cyclic subgroup of order 2" in text


def test_integer_lattice_cond3_exhaustive():
    text = "seed: 0\nbudget: 8\ngroup: {kind: integer_lattice, d: 1}\ntruncation: {radius: 64}\n" \
           "metric: {type: native}\ntasks:\n  - certify: {condition: cond3, K: 1, eps: 8}\n"
    r = cli.run(parse_config(text))
    assert r.tasks[0]["status"] == "holds_exhaustively"


def test_unitary_cond2_holds():
    text = "seed: 0\nbudget: 64\ngroup: {kind: unitary, n: 2}\n" \
           "tasks:\n  - certify: {condition: cond2, U: 1.0, bound_constant: 2.0}\n"
    r = cli.run(parse_config(text))
    assert r.tasks[0]["status"] == "holds_on_budget"
    assert r.exit_code == 0


def test_all_example_configs_run():
    for path in sorted(CONFIGS.glob("*.yaml")):
        r = cli.run(parse_config(path.read_text()))
        assert all(t["status"] != "failed" for t in r.tasks), path.name


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "minmetric.cli", "report", "--config", str(CONFIGS / "empty.yaml"),
                           "--format", "machine"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["schema_version"] == "1.0"


def test_oneparam_tolerance_sets_depth():
    base = "seed: 0\nbudget: 8\ngroup: {kind: unitary, n: 2}\ntasks:\n"
    task = "  - oneparam: {metric: geodesic, tangent_norm: 0.1, tol: 1.0e-8%s}\n"
    ok = cli.run(parse_config(base + task % ""))
    assert ok.tasks[0]["status"] == "constructed"
    assert ok.tasks[0]["result"]["chain"]["depth"] == 28
    assert ok.tasks[0]["result"]["max_error"] <= 1e-8
    short = cli.run(parse_config(base + task % ", depth: 20"))
    assert short.tasks[0]["status"] == "failed"
    assert short.tasks[0]["error"]["type"] == "InsufficientDepth"
    with pytest.raises(ConfigError):
        parse_config(base + task % ", tol: -1")
