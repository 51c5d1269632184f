import json

import pytest
from click.testing import CliRunner

from liplive.cli import EXIT_ACCEPT, EXIT_ERROR, EXIT_REJECT, main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    r = CliRunner().invoke(main, ["gen-dataset", "--out", str(root / "ds"), "--speakers", "2",
                                  "--attempts", "2", "--enroll", "5", "--seed", "4"])
    assert r.exit_code == 0, r.output
    man = json.loads((root / "ds" / "manifest.json").read_text())
    enroll = [root / "ds" / e["file"] for e in man["recordings"]
              if e["role"] == "enroll" and e["user_id"] == "user000"]
    for p in enroll:
        (root / "enr").mkdir(exist_ok=True)
        for suffix in (".wav", ".json"):
            (root / "enr" / p.with_suffix(suffix).name).write_bytes(p.with_suffix(suffix).read_bytes())
    r = CliRunner().invoke(main, ["enroll", "--user", "user000", "--recordings",
                                  str(root / "enr" / "*.wav"), "--profile-dir", str(root / "prof")])
    assert r.exit_code == 0, r.output
    return root, man


def run(*args, env=None):
    return CliRunner().invoke(main, [str(a) for a in args], env=env)


def test_detect_genuine(workspace):
    root, man = workspace
    e = next(e for e in man["recordings"] if e["role"] == "test" and e["user_id"] == "user000")
    r = run("detect", "--user", "user000", "--recording", root / "ds" / e["file"],
            "--profile-dir", root / "prof", "--json")
    assert r.exit_code == EXIT_ACCEPT, r.output
    assert json.loads(r.output)["final"] is True


def test_detect_dumps(workspace, tmp_path):
    root, man = workspace
    e = next(e for e in man["recordings"] if e["role"] == "test")
    r = run("detect", "--user", "user000", "--recording", root / "ds" / e["file"],
            "--profile-dir", root / "prof", "--dump-fragments", tmp_path / "f.csv",
            "--dump-motion", tmp_path / "m.csv")
    assert r.exit_code in (EXIT_ACCEPT, EXIT_REJECT)
    assert (tmp_path / "f.csv").exists() and (tmp_path / "m.csv").exists()


def test_detect_unknown_user(workspace):
    root, man = workspace
    r = run("detect", "--user", "ghost", "--recording", root / "ds" / man["recordings"][0]["file"],
            "--profile-dir", root / "prof")
    assert r.exit_code == EXIT_ERROR


@pytest.mark.parametrize("kind", ["visual", "replay"])
def test_attack_rejected(workspace, kind, tmp_path):
    root, _ = workspace
    r = run("attack", "--kind", kind, "--user", "user000", "--seed", "31", "--profile-dir",
            root / "prof", "--out", tmp_path / "a.wav")
    assert r.exit_code == EXIT_REJECT, r.output
    assert (tmp_path / "a.wav").exists()


def test_eval_writes_report(workspace, tmp_path):
    root, _ = workspace
    r = run("eval", "--dataset", root / "ds", "--report", tmp_path / "rep.json",
            "--outcomes", tmp_path / "o.jsonl")
    # an all-genuine dataset has no attack scores
    assert r.exit_code == EXIT_ERROR
    ds = tmp_path / "mixed"
    assert run("gen-dataset", "--out", ds, "--speakers", "1", "--attempts", "4", "--enroll", "5",
               "--mix", "genuine=0.5,visual=0.5", "--seed", "2").exit_code == 0
    r = run("eval", "--dataset", ds, "--report", tmp_path / "rep.json", "--outcomes",
            tmp_path / "o.jsonl")
    assert r.exit_code == 0, r.output
    rep = json.loads((tmp_path / "rep.json").read_text())
    assert rep["counts"] == {"genuine": 2, "visual-only": 2}
    assert (tmp_path / "rep.roc.csv").read_text().startswith("far,tar")
    assert len((tmp_path / "o.jsonl").read_text().splitlines()) == 4


def test_simulate_and_export(tmp_path):
    r = run("simulate", "--out", tmp_path / "s.wav", "--seed", "3", "--save-scene", tmp_path / "sc.json")
    assert r.exit_code == 0, r.output
    side = json.loads((tmp_path / "s.json").read_text())
    assert side["passcode_len"] == 4
    assert run("simulate", tmp_path / "sc.json", "--out", tmp_path / "t.wav").exit_code == 0
    assert (tmp_path / "t.wav").read_bytes() == (tmp_path / "s.wav").read_bytes()
    assert run("export-baseband", "--recording", tmp_path / "s.wav", "--out",
               tmp_path / "b.csv").exit_code == 0
    assert (tmp_path / "b.csv").read_text().splitlines()[1].startswith("t,I_1")
    assert run("export-baseband", "--recording", tmp_path / "s.wav", "--out", tmp_path / "m.csv",
               "--motion", "--demod-downsample-factor", "50").exit_code == 0


def test_challenge_and_env(tmp_path):
    a = run("challenge", "--seed", "9")
    assert a.exit_code == 0
    carriers = json.loads(a.output)["frequencies_hz"]
    assert len(carriers) == 3
    b = run("challenge", env={"LIPLIVE_CHALLENGE_SEED": "9"})
    assert b.exit_code == 0 and json.loads(b.output)["frequencies_hz"] == carriers


def test_config_flags_present():
    r = run("detect", "--help")
    for flag in ("--demod-downsample-factor", "--seg-min-gap-s", "--stft-window-s", "--snr-gate-db",
                 "--carrier-gate-db", "--fusion", "--motion-threshold"):
        assert flag in r.output
