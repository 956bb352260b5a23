import csv
import socket
import threading

from dcollab import dataio
from dcollab.cli import dispatch, parse_config_file

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def free_port():
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def test_synth_is_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert dispatch(["synth", "--kind", "hospital", "--n", "50", "--seed", "7",
                     "--out", str(a)]) == 0
    assert dispatch(["synth", "--kind", "hospital", "--n", "50", "--seed", "7",
                     "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    schema = dataio.parse_schema_file(a.with_suffix(".schema"))
    D = dataio.load_csv(a, schema)
    assert D.n == 50 and D.m == 4


def test_unknown_flag_is_usage_error(capsys):
    assert dispatch(["run", "--frobnicate"]) == 2
    assert dispatch(["no-such-command"]) == 2
    capsys.readouterr()


def test_missing_data_file_is_runtime_error(tmp_path, capsys):
    code = dispatch(["run", "--data", str(tmp_path / "nope.csv"),
                     "--schema", str(tmp_path / "nope.schema")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_run_writes_report_and_figure(tmp_path):
    out = tmp_path / "out"
    code = dispatch(["run", "--mode", "dc_proposed", "--parties", "2",
                     "--party-size", "12", "--test-size", "16", "--seed", "5",
                     "--m-tilde", "2", "--r", "60", "--out-dir", str(out)])
    assert code == 0
    rows = read_rows(out / "report.csv")
    assert rows[0] == ["mode", "dataset", "party", "auc"]
    assert len(rows) == 3  # header + one row per party
    assert rows[1][0] == "dc_proposed" and rows[1][1] == "hospital"
    assert 0.0 <= float(rows[1][3]) <= 1.0
    assert (out / "report.png").read_bytes().startswith(PNG_MAGIC)


def test_identical_invocations_give_identical_bytes(tmp_path):
    argv = ["run", "--mode", "dc_naive", "--parties", "2", "--party-size", "12",
            "--test-size", "16", "--seed", "9", "--m-tilde", "2", "--r", "60"]
    out1, out2 = tmp_path / "one", tmp_path / "two"
    assert dispatch(argv + ["--out-dir", str(out1)]) == 0
    assert dispatch(argv + ["--out-dir", str(out2)]) == 0
    assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()
    assert (out1 / "report.png").read_bytes() == (out2 / "report.png").read_bytes()


def test_experiment_report_shape(tmp_path):
    out = tmp_path / "out"
    code = dispatch(["experiment", "--modes", "local,centralized", "--trials", "2",
                     "--parties", "2", "--party-size", "12", "--test-size", "16",
                     "--seed", "3", "--r", "60", "--out-dir", str(out)])
    assert code == 0
    rows = read_rows(out / "report.csv")
    assert rows[0] == ["mode", "dataset", "trials", "mean_auc", "stderr"]
    assert [r[0] for r in rows[1:]] == ["local", "centralized"]
    assert all(r[2] == "2" for r in rows[1:])
    assert (out / "report.png").exists()


def test_flags_override_defaults_and_config_overrides_flags(tmp_path):
    cfg = tmp_path / "settings.cfg"
    cfg.write_text("trials = 1\nparty_size = 10\n")
    out = tmp_path / "out"
    code = dispatch(["experiment", "--modes", "local", "--trials", "5",
                     "--parties", "2", "--party-size", "12", "--test-size", "16",
                     "--seed", "3", "--r", "60", "--config", str(cfg),
                     "--out-dir", str(out)])
    assert code == 0
    rows = read_rows(out / "report.csv")
    assert rows[1][2] == "1"  # config file beat the --trials flag


def test_config_file_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no_such_setting = 1\n")
    assert dispatch(["experiment", "--config", str(cfg)]) == 1
    assert "no_such_setting" in capsys.readouterr().err


def test_parse_config_file_types(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(
        "# comment\n"
        "party_sizes = 8, 9\n"
        "modes = local, dc_proposed\n"
        "permute = false\n"
        "delta = 0.1\n"
        "seed = 4\n"
    )
    s = parse_config_file(cfg)
    assert s == {
        "party_sizes": (8, 9),
        "modes": ("local", "dc_proposed"),
        "permute": False,
        "delta": 0.1,
        "seed": 4,
    }


def test_experiment_party_sweep(tmp_path):
    out = tmp_path / "out"
    code = dispatch(["experiment", "--sweep-parties", "1,2", "--modes", "local",
                     "--trials", "1", "--party-size", "10", "--test-size", "16",
                     "--seed", "8", "--r", "60", "--out-dir", str(out)])
    assert code == 0
    rows = read_rows(out / "auc_by_parties.csv")
    assert rows[0] == ["parties", "mode", "dataset", "trials", "mean_auc", "stderr"]
    assert [(r[0], r[1]) for r in rows[1:]] == [("1", "local"), ("2", "local")]
    assert (out / "auc_by_parties.png").read_bytes().startswith(PNG_MAGIC)


def test_split_writes_loadable_party_files(tmp_path):
    data = tmp_path / "h.csv"
    assert dispatch(["synth", "--kind", "hospital", "--n", "60", "--seed", "2",
                     "--out", str(data)]) == 0
    out = tmp_path / "parts"
    code = dispatch(["split", "--data", str(data), "--schema", str(data.with_suffix(".schema")),
                     "--parties", "2", "--party-size", "15", "--test-size", "10",
                     "--seed", "4", "--out-dir", str(out)])
    assert code == 0
    schema = dataio.parse_schema_file(out / "split.schema")
    for name, rows in (("party_0.csv", 15), ("party_1.csv", 15), ("test.csv", 10)):
        D = dataio.load_csv(out / name, schema)
        assert D.n == rows


def test_audit_outputs(tmp_path):
    out = tmp_path / "out"
    code = dispatch(["audit", "--seed", "1", "--m-tilde", "2", "--parties", "2",
                     "--party-size", "25", "--test-size", "10",
                     "--distinctness-trials", "2", "--out-dir", str(out)])
    assert code == 0
    text = (out / "audit.txt").read_text()
    assert "verdict = " in text
    assert "linkage.row_index" in text
    corr = dataio.read_matrix_csv(out / "audit_correlation.csv")
    assert corr.shape[0] == 4  # hospital features
    assert (out / "audit_correlation.png").read_bytes().startswith(PNG_MAGIC)


def test_serve_and_join_complete_a_session(tmp_path):
    data = tmp_path / "h.csv"
    assert dispatch(["synth", "--kind", "hospital", "--n", "60", "--seed", "6",
                     "--out", str(data)]) == 0
    parts = tmp_path / "parts"
    assert dispatch(["split", "--data", str(data),
                     "--schema", str(data.with_suffix(".schema")),
                     "--parties", "2", "--party-size", "12", "--test-size", "10",
                     "--seed", "4", "--out-dir", str(parts)]) == 0
    cfg = tmp_path / "session.cfg"
    cfg.write_text(
        "parties = 2\nparty_sizes = 12, 12\ntest_size = 10\nm_tilde = 2\n"
        "r = 60\nseed = 11\ntimeout = 15\n"
    )
    port = free_port()
    codes = {}

    def serve():
        codes["serve"] = dispatch(["serve", "--bind", f"127.0.0.1:{port}",
                                   "--config", str(cfg)])

    def join(k):
        codes[f"join{k}"] = dispatch([
            "join", "--master", f"127.0.0.1:{port}", "--party-id", str(k),
            "--data", str(parts / f"party_{k}.csv"),
            "--schema", str(parts / "split.schema"),
            "--config", str(cfg),
        ])

    server = threading.Thread(target=serve)
    server.start()
    import time

    deadline = time.time() + 5.0
    while time.time() < deadline:
        probe = socket.socket()
        probe.settimeout(0.2)
        try:
            probe.connect(("127.0.0.1", port))
            probe.close()
            break
        except OSError:
            time.sleep(0.05)
        finally:
            probe.close()
    # the probe connection is rejected by the master (bad handshake) and
    # the session keeps waiting for genuine parties
    workers = [threading.Thread(target=join, args=(k,)) for k in range(2)]
    for w in workers:
        w.start()
    for w in workers:
        w.join(20.0)
    server.join(20.0)
    assert codes == {"serve": 0, "join0": 0, "join1": 0}
