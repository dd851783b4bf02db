from safeik.cli import main


def test_rollout_command(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("scene: dynamic\nduration: 0.5\n")
    csv = tmp_path / "ticks.csv"
    rc = main(["rollout", "--config", str(cfg), "--solver", "B", "--seed", "1",
               "--csv", str(csv)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "solver=B" in out and "violation=" in out
    assert csv.exists()
    header = csv.read_text().splitlines()[0]
    assert header.startswith("tick,t,q0")


def test_compare_command(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("scene: dynamic\nduration: 0.5\nseeds: [0]\n")
    csv = tmp_path / "summary.csv"
    rc = main(["compare", "--config", str(cfg), "--csv", str(csv)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "solver" in out and "violation time" in out
    lines = csv.read_text().splitlines()
    assert lines[0].startswith("kind,seed,collisions")
    kinds = {line.split(",")[0] for line in lines[1:]}
    assert kinds == {"N", "P", "B"}


def test_check_gradients_command(capsys):
    rc = main(["check-gradients", "--samples", "3"])
    assert rc == 0
    out = capsys.readouterr().out
    for name in ("fk_jacobian", "distance", "tracking", "smoothness",
                  "self_collision", "penalty", "cbf"):
        assert name in out
    assert "FAIL" not in out
