import json
import socket
import threading

import pytest

from metersim.cli import SIM_HEADER, SWEEP_HEADER, main

MINI_SCENARIO = {
    "duration_s": 7200.0,
    "seed": 13,
    "channel": {"airtime_ms": 10.0, "policy": "pure-aloha"},
    "meters": [
        {"kind": "electricity", "interval_min": 0.5},
        {"kind": "gas", "interval_min": 1.0},
    ],
    "muc": {"dedup": True},
}


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "mini.json"
    path.write_text(json.dumps(MINI_SCENARIO))
    return str(path)


def test_analytic_single_point(capsys):
    assert main(["analytic", "--policy", "slotted-aloha", "--g", "1.0"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines() == [
        "policy,g,s_analytic",
        "slotted-aloha,1.000000,0.367879",
    ]


def test_analytic_grid(capsys):
    assert main(["analytic", "--policy", "csma-ca", "--g", "0.5:1.5:3",
                 "--a", "0.1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4
    assert lines[2] == f"csma-ca,1.000000,{0.4298847076180689:.6f}"


def test_encode_decode_roundtrip(capsys):
    telegram_json = ('{"control":"data-unsolicited","address":{"mfr":"ABC",'
                     '"id":12345678,"version":1,"device_type":"electricity"},'
                     '"access_number":7,"records":[{"coding":"int32",'
                     '"quantity":"energy","scale_exp":0,"value":150}]}')
    assert main(["encode", telegram_json]) == 0
    hex_text = capsys.readouterr().out.strip()
    assert main(["decode", hex_text]) == 0
    decoded = capsys.readouterr().out.strip()
    assert decoded == telegram_json
    # and the canonical text re-encodes to identical bytes
    assert main(["encode", decoded]) == 0
    assert capsys.readouterr().out.strip() == hex_text


def test_decode_rejects_garbage(capsys):
    assert main(["decode", "zz"]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["decode", "00"]) == 1


def test_encode_rejects_bad_telegram(capsys):
    assert main(["encode", '{"control":"ack"}']) == 1
    assert main(["encode", "not json"]) == 1


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--policy", "pure-aloha", "--g", "nope"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--policy", "warp", "--g", "0.1:1:5"])
    assert exc.value.code == 2


def test_sweep_single_step_is_precondition_error(capsys):
    assert main(["sweep", "--policy", "pure-aloha", "--g", "0.5"]) == 1
    assert "steps" in capsys.readouterr().err


def test_sweep_csv_and_determinism(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["sweep", "--policy", "slotted-aloha", "--g", "0.3:0.9:3",
            "--frames", "2000", "--seed", "5"]
    assert main(argv + ["--out", str(out1)]) == 0
    assert main(argv + ["--out", str(out2)]) == 0
    text = out1.read_text()
    assert out2.read_text() == text  # byte-identical rerun
    lines = text.splitlines()
    assert lines[0] == SWEEP_HEADER
    assert len(lines) == 4
    first = lines[1].split(",")
    assert first[0] == "slotted-aloha"
    assert first[1] == "0.300000"
    assert first[4] != ""  # analytic value present
    assert first[9] == "5"


def test_simulate_csv(scenario_file, tmp_path, capsys):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--scenario", scenario_file, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == SIM_HEADER
    row = dict(zip(SIM_HEADER.split(","), lines[1].split(",")))
    assert row["policy"] == "pure-aloha"
    assert row["pdr"] == "1.000000"
    assert row["s_analytic"] == ""  # jittered-periodic traffic has no closed form
    assert int(row["accepted"]) > 0
    assert int(row["readings"]) == int(row["accepted"])
    assert row["outage_max"] == "0.000000"
    assert row["seed"] == "13"


def test_simulate_seed_flag_overrides_file(scenario_file, tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["simulate", "--scenario", scenario_file, "--seed", "99", "--out", str(out1)])
    main(["simulate", "--scenario", scenario_file, "--out", str(out2)])
    row1 = out1.read_text().splitlines()[1].split(",")
    row2 = out2.read_text().splitlines()[1].split(",")
    assert row1[9] == "99" and row2[9] == "13"


def test_simulate_event_log(scenario_file, tmp_path):
    log = tmp_path / "events.csv"
    main(["simulate", "--scenario", scenario_file, "--out", str(tmp_path / "o.csv"),
          "--event-log", str(log)])
    lines = log.read_text().splitlines()
    assert lines[0] == "time_s,meter,attempt_no,event"
    events = {line.split(",")[3] for line in lines[1:]}
    assert events == {"tx_start", "tx_end"}  # uncontended run, no collisions


def test_simulate_missing_scenario_file(tmp_path, capsys):
    assert main(["simulate", "--scenario", str(tmp_path / "absent.json")]) == 1
    assert "error" in capsys.readouterr().err


def test_simulate_invalid_scenario(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"duration_s": -1, "seed": 1, "meters": []}')
    assert main(["simulate", "--scenario", str(path)]) == 1
    assert "duration" in capsys.readouterr().err


class LineServer:
    """Collects newline-terminated lines from a single TCP client."""

    def __init__(self):
        self.sock = socket.socket()
        self.sock.bind(("127.0.0.1", 0))
        self.sock.listen(1)
        self.port = self.sock.getsockname()[1]
        self.lines = []
        self.thread = threading.Thread(target=self._serve, daemon=True)
        self.thread.start()

    def _serve(self):
        conn, _ = self.sock.accept()
        buf = b""
        while True:
            chunk = conn.recv(4096)
            if not chunk:
                break
            buf += chunk
        conn.close()
        self.lines = buf.decode("utf-8").splitlines()

    def join(self):
        self.thread.join(timeout=10)
        self.sock.close()


def test_simulate_emit_tcp(scenario_file, tmp_path):
    server = LineServer()
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--scenario", scenario_file, "--out", str(out),
                 "--emit-tcp", f"127.0.0.1:{server.port}"]) == 0
    server.join()
    row = dict(zip(SIM_HEADER.split(","), out.read_text().splitlines()[1].split(",")))
    assert len(server.lines) == int(row["readings"]) > 0
    for line in server.lines:
        doc = json.loads(line)
        assert doc["kind"] == "reading"
        assert doc["muc"] == "MUC-1"
