from pathlib import Path

import pytest
import scipy.io

from cuthho.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from cuthho.config import ConfigError, MissingKeyError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SOLVE_CFG = """
[mesh]
nx = 8
[interface]
levelset = circle(0, 0, 0.71)
kappa1 = 1
kappa2 = 100
[discretization]
k = 1
[case]
name = radial_circle
[output]
matrix = true
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_check_mesh_uncut(capsys):
    assert main(["check-mesh", "--config", str(CONFIGS / "uncut.ini")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "0 cut cells" in out and "check-mesh: PASS" in out


def test_check_mesh_sliver_merges(capsys):
    assert main(["check-mesh", "--config", str(CONFIGS / "sliver.ini")]) == EXIT_OK
    out = capsys.readouterr().out
    pre = next(line for line in out.splitlines() if line.startswith("pre-merge"))
    assert "KO1 0," not in pre
    assert "KO1 0, KO2 0" in next(line for line in out.splitlines() if line.startswith("post-merge"))


def test_check_mesh_underresolved(capsys):
    assert main(["check-mesh", "--config", str(CONFIGS / "underresolved.ini")]) == EXIT_FAIL
    out = capsys.readouterr().out
    assert "advice:" in out and "[FAIL]" in out


def test_solve_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["solve", "--config", write(tmp_path, SOLVE_CFG), "--out", str(out)]) == EXIT_OK
    rows = (out / "errors.csv").read_text().splitlines()
    assert len(rows) == 2 and rows[0].startswith("level,mesh,h")
    assert (out / "field.vtk").read_text().startswith("# vtk DataFile")
    assert (out / "field.csv").stat().st_size > 0
    K = scipy.io.mmread(str(out / "matrix.mtx"))
    assert K.shape[0] == K.shape[1] and abs(K - K.T).max() == 0


def test_solve_threads_do_not_change_output(tmp_path):
    cfg = write(tmp_path, SOLVE_CFG)
    texts = []
    for n in ("1", "3", "0"):
        d = tmp_path / f"t{n}"
        assert main(["solve", "--config", cfg, "--out", str(d), "--threads", n]) == EXIT_OK
        texts.append([(d / f).read_bytes() for f in ("errors.csv", "field.csv", "field.vtk", "matrix.mtx")])
    assert texts[0] == texts[1] == texts[2]


def test_k_flag_overrides_config(tmp_path):
    cfg = write(tmp_path, SOLVE_CFG)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o"), "--k", "0"]) == EXIT_OK
    assert (tmp_path / "o" / "errors.csv").read_text().splitlines()[1].split(",")[5] == "0"


def test_missing_key_is_named(tmp_path, capsys):
    text = SOLVE_CFG.replace("kappa2 = 100\n", "")
    assert main(["solve", "--config", write(tmp_path, text), "--out", str(tmp_path)]) == EXIT_USAGE
    assert "interface.kappa2" in capsys.readouterr().err


def test_missing_degree_is_named(tmp_path, capsys):
    text = SOLVE_CFG.replace("k = 1\n", "")
    assert main(["solve", "--config", write(tmp_path, text), "--out", str(tmp_path)]) == EXIT_USAGE
    assert "discretization.k" in capsys.readouterr().err


def test_bad_value_and_usage_errors(tmp_path, capsys):
    assert main(["solve", "--config", write(tmp_path, SOLVE_CFG.replace("nx = 8", "nx = eight"))]) == EXIT_USAGE
    assert "mesh.nx" in capsys.readouterr().err
    assert main(["solve", "--config", write(tmp_path, SOLVE_CFG), "--threads", "-1",
                 "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["solve", "--config", write(tmp_path, SOLVE_CFG), "--k", "-1"]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["solve"]) == EXIT_USAGE
    assert main(["solve", "--config", str(tmp_path / "absent.ini")]) == EXIT_USAGE


def test_convergence_needs_three_meshes(tmp_path, capsys):
    text = SOLVE_CFG.replace("nx = 8", "sizes = 4 8")
    assert main(["convergence", "--config", write(tmp_path, text), "--out", str(tmp_path)]) == EXIT_USAGE
    assert "at least 3" in capsys.readouterr().err


def test_convergence_pass_and_missed_threshold(tmp_path):
    base = SOLVE_CFG.replace("nx = 8", "sizes = 8 16 32").replace("k = 1", "k = 0")
    out = tmp_path / "ok"
    assert main(["convergence", "--config", write(tmp_path, base), "--out", str(out)]) == EXIT_OK
    lines = (out / "eoc.csv").read_text().splitlines()
    assert len(lines) == 4 and lines[1].endswith(",n/a")
    strict = base.replace("matrix = true", "matrix = true\neoc_min = 5")
    assert main(["convergence", "--config", write(tmp_path, strict, "strict.ini"),
                 "--out", str(tmp_path / "bad")]) == EXIT_FAIL


def test_seed_environment_override(tmp_path):
    text = "[mesh]\nnx = 4\nperturbation = 0.2\nseed = 3\n[interface]\nlevelset = circle(0,0,0.5)\n"
    p = write(tmp_path, text)
    assert load_config(p, env={}).seed == 3
    assert load_config(p, env={"CUT_HHO_SEED": "11"}).seed == 11
    with pytest.raises(ConfigError):
        load_config(p, env={"CUT_HHO_SEED": "x"})


def test_parse_config_errors():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[bogus]\na = 1\n", env={})
    with pytest.raises(ConfigError, match="mesh.colour"):
        parse_config("[mesh]\ncolour = red\n", env={})
    with pytest.raises(ConfigError, match="kappa1"):
        parse_config("[interface]\nkappa1 = -1\n", env={})
    with pytest.raises(MissingKeyError, match="interface.levelset"):
        parse_config("[mesh]\nnx = 2\n", env={}).require("levelset")


def test_shipped_configs_parse():
    for p in sorted(CONFIGS.glob("*.ini")):
        cfg = load_config(p, env={})
        assert cfg.levelset is not None, p.name
