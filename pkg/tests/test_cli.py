import pytest

from wavefront import cli
from wavefront.config import SCHEMA, parse_config, parse_text
from wavefront.errors import ConfigParseError, ConfigValidationError

EMPTY_SECTION = """\
kernel.family = dirac
[g]
family = nicholson
p = 6
delta = 1
[]
"""


def _minimal(tmp_path, text=None):
    path = tmp_path / "run.cfg"
    path.write_text(text if text is not None else "kernel.family = dirac\ng.family = nicholson\ng.p = 6\n"
                    "g.delta = 1\nh = 0.2\nc = 5\n")
    return path


def test_minimal_file_gets_defaults(tmp_path):
    cfg = parse_config(_minimal(tmp_path))
    assert cfg["h"] == 0.2 and cfg["c"] == 5.0
    assert cfg["numerics.tol_iter"] == 1e-10 and cfg["numerics.max_iter"] == 5000
    assert set(cfg.values) == set(SCHEMA)
    assert cfg.sources["g.p"] == "file" and cfg.sources["numerics.L"] == "default"


def test_section_headers():
    entries = parse_text("[g]\np = 6\n[numerics]\ndt = 0.02\n")
    assert [(k, v) for _, k, v in entries] == [("g.p", "6"), ("numerics.dt", "0.02")]


def test_empty_section_header_rejected():
    with pytest.raises(ConfigParseError):
        parse_text(EMPTY_SECTION)


def test_unknown_key_names_key(tmp_path):
    path = _minimal(tmp_path, "kernel.width = 1\n")
    with pytest.raises(ConfigParseError) as err:
        parse_config(path)
    assert err.value.key == "kernel.width" and err.value.line == 1


def test_inline_beats_file(tmp_path):
    cfg = parse_config(_minimal(tmp_path), ["c=5.5"])
    assert cfg["c"] == 5.5 and cfg.sources["c"] == "inline"


def test_validation_lists_every_problem():
    with pytest.raises(ConfigValidationError) as err:
        parse_config(None, ["numerics.dt=-1", "g.p=abc", "kernel.family=box"])
    assert len(err.value.problems) == 3


def test_hash_depends_on_values_only(tmp_path):
    a = parse_config(_minimal(tmp_path))
    b = parse_config(None, [])
    assert a.digest == b.digest
    assert parse_config(None, ["c=5.1"]).digest != a.digest


def test_solve_exit_zero_and_outputs(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["solve", "--config", str(_minimal(tmp_path)), "--out", str(out)]) == 0
    for name in ("profile.csv", "kernelN.csv", "report.txt", "front_report.csv"):
        assert (out / name).exists()
    report = (out / "report.txt").read_text()
    assert "config_sha256 = " in report and "(tol <= 0.0001: ok)" in report


def test_solve_outputs_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["solve", "--out", str(a)]) == 0
    assert cli.main(["solve", "--out", str(b)]) == 0
    for name in ("profile.csv", "kernelN.csv", "report.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_solve_outside_domain_exit_2(tmp_path):
    assert cli.main(["solve", "--set", "c=4", "--set", "h=0", "--out", str(tmp_path)]) == 2


def test_solve_convergence_failure_exit_3(tmp_path):
    assert cli.main(["solve", "--set", "numerics.max_iter=2", "--out", str(tmp_path)]) == 3


def test_check_model_st_failure(tmp_path, capsys):
    assert cli.main(["check-model", "--set", "g.p=20", "--out", str(tmp_path)]) == 1
    assert "ST: g(s) - g'(kappa) s nondecreasing" in capsys.readouterr().out
    assert "failed: ST" in (tmp_path / "report.txt").read_text()


def test_io_error_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["xi-star", "--out", str(blocker / "sub")]) == 4
    assert cli.main(["xi-star", "--config", str(tmp_path / "missing.cfg")]) == 4


@pytest.mark.parametrize("cmd", ["check-model", "charfun", "xi-star", "c-sharp"])
def test_light_commands(cmd, tmp_path):
    assert cli.main([cmd, "--out", str(tmp_path)]) == 0


def test_domain_map_command(tmp_path):
    code = cli.main(["domain-map", "--set", "map.h_max=0.25", "--set", "map.c_min=4", "--set", "map.c_max=5",
                     "--out", str(tmp_path)])
    assert code == 0
    rows = (tmp_path / "domain_map.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 3


def test_fundsol_command(tmp_path):
    code = cli.main(["fundsol", "--set", "c=1", "--set", "h=1", "--set", "fundsol.xi=0.5",
                     "--set", "fundsol.L=20", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "fundsol.csv").read_text().startswith("t,v\n")
    assert "convexity violation on t <= 0" in (tmp_path / "report.txt").read_text()


def test_at_c_sharp_sets_speed(tmp_path):
    code = cli.main(["c-sharp", "--at-c-sharp", "--out", str(tmp_path)])
    assert code == 0
    text = (tmp_path / "report.txt").read_text()
    assert "c = 2.5647398476647" in text
