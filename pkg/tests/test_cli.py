"""End-to-end command-line checks: every subcommand, exit codes,
deterministic output, and the parse diagnostics."""

import json

import numpy as np
import pytest

from qlll import bench, cli
from qlll.instance import QlllInstance, basis_projector, instance_to_dict

P1 = np.array([[0.0, 0.0], [0.0, 1.0]])


def disjoint_pair():
    return QlllInstance.build(2, 2, [((0,), P1), ((1,), P1)])


def diag3():
    return QlllInstance.build(
        3, 2, [((0,), P1), ((1,), P1), ((1, 2), basis_projector(4, [3]))]
    )


def write_instance(tmp_path, inst, name="inst.json"):
    path = tmp_path / name
    path.write_text(json.dumps(instance_to_dict(inst)))
    return str(path)


def run_cli(args, capsys):
    code = cli.main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def last_json(out):
    return json.loads(out)


def test_counterexample_at_one(capsys):
    code, out, _ = run_cli(["counterexample", "--a", "1.0", "--seed", "3"], capsys)
    assert code == 0
    data = last_json(out)
    assert data["subcommand"] == "counterexample"
    assert data["seed"] == 3
    assert "tolerances" in data and "instance" in data
    result = data["result"]
    assert abs(result["pr_tau"] - 1.0 / 9.0) < 1e-12
    assert abs(result["exact"] - 1.0 / 9.0) < 1e-8
    assert result["bound"] == pytest.approx(0.25)
    assert not result["violates_bound"]
    assert "0.1111111" in out


def test_counterexample_audit_exit_codes(capsys):
    code, out, _ = run_cli(
        ["counterexample", "--a", "0.5", "--trajectories", "2000", "--seed", "9"],
        capsys,
    )
    assert code == 0
    result = last_json(out)["result"]
    assert result["mc_pass"] and result["exact_pass"]
    # the audit needs an interior parameter when trajectories are requested
    code, _, err = run_cli(
        ["counterexample", "--a", "1.0", "--trajectories", "10"], capsys
    )
    assert code == 1
    assert "error" in err


def test_check_feasible_pair(tmp_path, capsys):
    path = write_instance(tmp_path, disjoint_pair())
    code, out, _ = run_cli(["check", "--instance", path], capsys)
    assert code == 0
    result = last_json(out)["result"]
    assert result["feasible"]
    assert result["x"] == pytest.approx([0.5, 0.5])


def test_check_infeasible_exit_two(tmp_path, capsys):
    # two maximal-overlap events sharing one qubit cannot be certified
    plus = np.full((2, 2), 0.5)
    inst = QlllInstance.build(1, 2, [((0,), plus), ((0,), P1)])
    path = write_instance(tmp_path, inst)
    code, out, _ = run_cli(["check", "--instance", path], capsys)
    assert code == 2
    assert not last_json(out)["result"]["feasible"]


def test_gap_subcommand(tmp_path, capsys):
    inst = QlllInstance.build(1, 2, [((0,), P1)])
    path = write_instance(tmp_path, inst)
    code, out, _ = run_cli(["gap", "--instance", path], capsys)
    assert code == 0
    result = last_json(out)["result"]
    assert result["delta"] == pytest.approx(1.0)
    assert result["ground_dim"] == 1
    assert result["eigenvalues"] == pytest.approx([0.0, 1.0])


def test_solve_classical_dimacs(tmp_path, capsys):
    path = tmp_path / "chain.cnf"
    path.write_text(bench.chain_cnf(4, seed=8))
    args = ["solve-classical", "--cnf", str(path), "--seed", "21"]
    code, out, _ = run_cli(args, capsys)
    assert code == 0
    data = last_json(out)
    assert data["result"]["satisfied"]
    assert len(data["result"]["assignment"]) == 9
    code2, out2, _ = run_cli(args, capsys)
    assert code2 == 0 and out2 == out  # byte-identical rerun


def test_solve_quantum_deterministic(tmp_path, capsys):
    path = write_instance(tmp_path, disjoint_pair())
    args = [
        "solve-quantum", "--instance", path, "--seed", "7",
        "--trajectories", "3", "--max-steps", "40",
    ]
    code, out, _ = run_cli(args, capsys)
    assert code == 0
    data = last_json(out)
    assert data["seed"] == 7 and not data["seed_was_random"]
    assert len(data["result"]["violations"]) == 3
    code2, out2, _ = run_cli(args, capsys)
    assert out2 == out


def test_solve_quantum_jobs_match(tmp_path, capsys):
    path = write_instance(tmp_path, disjoint_pair())
    base = [
        "solve-quantum", "--instance", path, "--seed", "11",
        "--trajectories", "4", "--max-steps", "30",
    ]
    _, serial, _ = run_cli(base + ["--jobs", "1"], capsys)
    _, threaded, _ = run_cli(base + ["--jobs", "3"], capsys)
    assert serial == threaded


def test_save_log_then_witness(tmp_path, capsys):
    inst_path = write_instance(tmp_path, diag3())
    log_path = str(tmp_path / "runs.json")
    code, out, _ = run_cli(
        [
            "solve-quantum", "--instance", inst_path, "--seed", "13",
            "--trajectories", "2", "--max-steps", "60", "--save-log", log_path,
        ],
        capsys,
    )
    assert code == 0
    saved = json.loads(open(log_path).read())
    assert len(saved["logs"]) == 2
    picked = next(
        i for i, log in enumerate(saved["logs"]) if log["entries"]
    )
    code, out, _ = run_cli(
        [
            "witness", "--instance", inst_path, "--log", log_path,
            "--log-index", str(picked),
        ],
        capsys,
    )
    assert code == 0
    result = last_json(out)["result"]
    assert result["tree"]["labels"]
    assert 0.0 <= result["dag_sequence_probability"] <= 1.0


def test_witness_on_handwritten_log(tmp_path, capsys):
    inst_path = write_instance(tmp_path, diag3())
    log_path = tmp_path / "log.json"
    log_path.write_text(
        json.dumps({"entries": [[0, 1], [1, 2]], "total_steps": 4, "seed": 7})
    )
    code, out, _ = run_cli(
        ["witness", "--instance", inst_path, "--log", str(log_path)], capsys
    )
    assert code == 0
    result = last_json(out)["result"]
    assert result["tree"]["labels"] == [2, 1]
    assert result["tree"]["parents"] == [-1, 0]
    assert result["tree_proper"]
    assert result["dag"]["labels"] == [1, 2]
    assert result["galton_watson"] is None  # this family has no certificate


def test_witness_galton_watson_value(tmp_path, capsys):
    inst_path = write_instance(tmp_path, disjoint_pair())
    log_path = tmp_path / "log.json"
    log_path.write_text(
        json.dumps({"entries": [[2, 0]], "total_steps": 5, "seed": None})
    )
    code, out, _ = run_cli(
        ["witness", "--instance", inst_path, "--log", str(log_path)], capsys
    )
    assert code == 0
    result = last_json(out)["result"]
    assert result["galton_watson"] == pytest.approx(0.5)


def test_converge_subcommand(tmp_path, capsys):
    path = write_instance(tmp_path, disjoint_pair())
    code, out, _ = run_cli(
        [
            "converge", "--instance", path, "--seed", "17",
            "--epsilon", "0.25", "--samples", "600",
        ],
        capsys,
    )
    assert code == 0
    result = last_json(out)["result"]
    assert result["t"] == 16  # ceil(2 * 2.0 / 0.25)
    assert len(result["mean_violation_prob"]) == 2
    assert 0.0 <= result["ground_overlap"] <= 1.0
    assert all(result["within_epsilon"])


def test_exact_solve_subcommand(tmp_path, capsys):
    path = write_instance(tmp_path, disjoint_pair())
    code, out, _ = run_cli(
        ["exact-solve", "--instance", path, "--seed", "23", "--p", "4",
         "--runs", "20"],
        capsys,
    )
    assert code == 0
    result = last_json(out)["result"]
    assert result["runs"] == 20
    assert result["successes"] >= 15  # target is at least 3/4
    assert result["min_success_overlap"] >= 1.0 - 1e-8


def test_oracle_halting_and_suites(tmp_path, capsys):
    path = write_instance(tmp_path, disjoint_pair())
    code, out, _ = run_cli(
        ["oracle", "--instance", path, "--halting", "0", "--cp-identities",
         "--shortclaim", "0,1", "--sequence", "0,1"],
        capsys,
    )
    assert code == 0
    result = last_json(out)["result"]
    assert abs(result["halting"]["probability"] - 0.375) < 1e-9
    assert result["halting"]["dimension_bound"]["pass"]
    assert result["halting"]["route_residual"] < 1e-9
    assert result["cp_identities"]["pass"]
    assert result["shortclaim"]["pass"]
    assert 0.0 <= result["sequence"]["probability"] <= 1.0


def test_oracle_requires_a_request(tmp_path, capsys):
    path = write_instance(tmp_path, disjoint_pair())
    code, _, err = run_cli(["oracle", "--instance", path], capsys)
    assert code == 1
    assert "error" in err


def test_conjecture_subcommand(tmp_path, capsys):
    inst_path = write_instance(tmp_path, diag3())
    code, out, _ = run_cli(
        [
            "conjecture", "--instance", inst_path,
            "--tree", '{"labels": [0], "parents": [-1]}',
            "--mode", "exact", "--budget", "10",
        ],
        capsys,
    )
    assert code == 0
    result = last_json(out)["result"]
    assert result["ratio"] <= 1.0 + 1e-9
    assert result["sense"] == "first-window"

    cx_path = write_instance(
        tmp_path, bench.make_counterexample(0.97).instance, "cx.json"
    )
    code, out, _ = run_cli(
        [
            "conjecture", "--instance", cx_path,
            "--tree", '{"labels": [0, 1], "edges": [], "partial": false}',
            "--mode", "exact", "--budget", "16",
        ],
        capsys,
    )
    assert code == 0
    assert last_json(out)["result"]["ratio"] > 1.0


def test_cpmap_json_and_csv(tmp_path, capsys):
    inst = QlllInstance.build(1, 2, [((0,), P1)])
    path = write_instance(tmp_path, inst)
    code, out, _ = run_cli(["cpmap", "--instance", path, "--t", "2"], capsys)
    assert code == 0
    result = last_json(out)["result"]
    assert result["final_ground_overlap"] == pytest.approx(0.875, abs=1e-12)
    assert result["series"]["ground_overlap"][1] == pytest.approx(0.75)

    code, out, _ = run_cli(
        ["cpmap", "--instance", path, "--t", "2", "--format", "csv"], capsys
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "t,ground_overlap,worst_violation_prob"
    assert len(lines) == 4


def test_cpmap_epsilon_horizon(tmp_path, capsys):
    path = write_instance(tmp_path, disjoint_pair())
    code, out, _ = run_cli(
        ["cpmap", "--instance", path, "--epsilon", "0.1"], capsys
    )
    assert code == 0
    result = last_json(out)["result"]
    assert result["t_max"] == 27  # ceil(2 / (0.5 * 1.5 * 0.1))
    assert result["reached"]
    assert result["final_ground_overlap"] >= 0.9


def test_output_file_and_random_seed(tmp_path, capsys):
    inst = QlllInstance.build(1, 2, [((0,), P1)])
    path = write_instance(tmp_path, inst)
    out_path = tmp_path / "report.json"
    code, out, _ = run_cli(
        ["gap", "--instance", path, "--output", str(out_path)], capsys
    )
    assert code == 0
    assert out == ""
    data = json.loads(out_path.read_text())
    assert isinstance(data["seed"], int)
    assert data["seed_was_random"]


def test_json_parse_diagnostic(tmp_path, capsys):
    bad = tmp_path / "broken.json"
    bad.write_text('{"n": 2,\n "d": }')
    code, _, err = run_cli(["gap", "--instance", str(bad)], capsys)
    assert code == 1
    assert "line 2" in err and "column" in err


def test_dimacs_parse_diagnostic(tmp_path, capsys):
    bad = tmp_path / "broken.cnf"
    bad.write_text("p cnf 3 1\n1 two 3 0\n")
    code, _, err = run_cli(["solve-classical", "--cnf", str(bad)], capsys)
    assert code == 1
    assert "line 2" in err and "column" in err


def test_missing_file_and_bad_usage(tmp_path, capsys):
    code, _, err = run_cli(["gap", "--instance", str(tmp_path / "no.json")], capsys)
    assert code == 1 and "error" in err
    code, _, err = run_cli(["frobnicate"], capsys)
    assert code == 1
    code, _, err = run_cli(["converge", "--instance", "x.json"], capsys)
    assert code == 1  # missing file and missing --epsilon/--t both land here
