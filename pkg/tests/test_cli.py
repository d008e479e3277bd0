import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from gateleak.cli import main, protocol_for
from gateleak.config import ConfigError, config_from_dict, load_config
from gateleak.designs import toy

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

TOY = {
    "seed": 2,
    "design": {"generator": "toy", "bit_selector": 1},
    "stimuli": {"source": "random", "n": 128},
    "simulation": {"clock_period": 1024},
    "frames": {"frames_per_cycle": 8},
    "test": {"kind": "specific", "confidence": 0.99},
}


def _write(tmp_path: Path, cfg: dict, name="c.yaml") -> Path:
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return p


def test_toy_pipeline_ranks_planted_cell_first(tmp_path):
    cfg = _write(tmp_path, TOY)
    out = tmp_path / "run"
    assert main(["pipeline", "--config", str(cfg), "--out", str(out)]) == 0
    ranking = json.loads((out / "aca" / "ranking.json").read_text())
    design = json.loads((out / "design" / "design.json").read_text())
    assert ranking["entries"][0]["cell"] == design["designated_cell"]
    report = json.loads((out / "report.json").read_text())
    assert report["aca"]["top_cells"][0] == design["designated_cell"]
    for phase in ("gen-design", "simulate", "power", "aca"):
        assert phase in json.loads((out / "timing.json").read_text())
    assert (out / "power" / "power.csv").exists()


def test_subcommands_match_pipeline(tmp_path):
    cfg = _write(tmp_path, TOY)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["pipeline", "--config", str(cfg), "--out", str(a)]) == 0
    for cmd in ("gen-design", "simulate", "power", "aca", "verify", "report"):
        assert main([cmd, "--config", str(cfg), "--out", str(b)]) == 0
    for rel in ("aca/ranking.json", "aca/ranking.csv", "aca/lti.json", "power/power.csv", "traces/traces.bin"):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_binary_power_format(tmp_path):
    cfg = _write(tmp_path, TOY)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["pipeline", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["pipeline", "--config", str(cfg), "--out", str(b), "--format", "bin"]) == 0
    assert (b / "power" / "power.bin").exists() and not (b / "power" / "power.csv").exists()
    assert (a / "aca" / "ranking.json").read_bytes() == (b / "aca" / "ranking.json").read_bytes()


def test_seed_override_changes_vectors(tmp_path):
    cfg = _write(tmp_path, TOY)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["gen-design", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["gen-design", "--config", str(cfg), "--out", str(b), "--seed", "9"]) == 0
    assert (a / "stimuli" / "vectors.jsonl").read_text() != (b / "stimuli" / "vectors.jsonl").read_text()


def test_netlist_file_design(tmp_path):
    gen = tmp_path / "gen"
    assert main(["gen-design", "--config", str(_write(tmp_path, TOY)), "--out", str(gen)]) == 0
    cfg = dict(TOY, design={"netlist": str(gen / "design" / "netlist.net"), "protocol": "toy", "bit_selector": 1})
    out = tmp_path / "run"
    assert main(["pipeline", "--config", str(_write(tmp_path, cfg, "n.yaml")), "--out", str(out)]) == 0
    ranking = json.loads((out / "aca" / "ranking.json").read_text())
    nl_text = (gen / "design" / "netlist.net").read_text()
    top = ranking["entries"][0]["cell"]
    assert any(line.split()[1] == top and line.split()[3] == toy.LEAK_OUT
               for line in nl_text.splitlines() if line.startswith("cell "))


def test_missing_netlist_exits_2_naming_key(tmp_path, capsys):
    cfg = dict(TOY, design={"netlist": "nope.net", "protocol": "toy"})
    assert main(["pipeline", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "r")]) == 2
    assert "design.netlist" in capsys.readouterr().err


def test_missing_config_and_unknown_key(tmp_path, capsys):
    assert main(["pipeline", "--config", str(tmp_path / "none.yaml")]) == 2
    assert "--config" in capsys.readouterr().err
    bad = dict(TOY, frames={"frames_per_cycle": 8, "width": 3})
    assert main(["pipeline", "--config", str(_write(tmp_path, bad)), "--out", str(tmp_path / "r")]) == 2
    assert "frames.width" in capsys.readouterr().err


def test_missing_artifact_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, TOY)
    assert main(["aca", "--config", str(cfg), "--out", str(tmp_path / "empty")]) == 2
    assert "missing artifact" in capsys.readouterr().err


def test_bad_netlist_file_exits_1(tmp_path, capsys):
    net = tmp_path / "bad.net"
    net.write_text("input a\noutput y\ncell u1 NAND2 y a y\n")
    cfg = dict(TOY, design={"netlist": str(net), "protocol": "toy"})
    assert main(["gen-design", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "r")]) == 1
    assert "combinational cycle" in capsys.readouterr().err


def test_usage_errors():
    assert main([]) == 2
    assert main(["frobnicate", "--config", "x"]) == 2


@pytest.mark.parametrize("raw,key", [
    ({"design": {"generator": "rsa"}}, "design.generator"),
    ({"design": {"generator": "aes", "sboxes_per_cycle": 8}}, "design.sboxes_per_cycle"),
    ({"design": {"generator": "aes"}, "test": {"confidence": 1.5}}, "test.confidence"),
    ({"design": {"generator": "aes"}, "test": {"kind": "nonspecific"}}, "test.kind"),
    ({"design": {"generator": "aes"}, "simulation": {"window_cycles": [5, 2]}}, "simulation.window_cycles"),
    ({"design": {"generator": "aes"}, "stimuli": {"bias": {"rnd": 6}}}, "stimuli.bias.rnd"),
    ({"stimuli": {}}, "design"),
])
def test_config_validation(raw, key):
    with pytest.raises(ConfigError) as exc:
        config_from_dict(raw)
    assert exc.value.key == key


@pytest.mark.parametrize("name", ["toy.yaml", "aes_specific.yaml", "aes_nonspecific.yaml", "bus.yaml"])
def test_shipped_configs_parse(name):
    protocol_for(load_config(CONFIGS / name))


def test_console_entry_point(tmp_path):
    cfg = _write(tmp_path, TOY)
    res = subprocess.run([sys.executable, "-m", "gateleak.cli", "gen-design", "--config", str(cfg),
                          "--out", str(tmp_path / "r")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
