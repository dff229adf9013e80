import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elax.config import KINDS, SCHEMA, load_config, parse_config
from elax.errors import ConfigurationError


def _errors(text, kind=None):
    with pytest.raises(ConfigurationError) as info:
        parse_config(text, kind)
    return info.value.errors


class TestDefaults:
    def test_minimal_simulate2d(self):
        cfg = parse_config("kind = simulate2d\n")
        assert cfg.dt == 1e-3
        assert cfg.sobolev == [0.0, 1.0, 2.0]
        assert cfg.n == 64 and cfg.seed == 0 and cfg.t_end == 1.0
        assert cfg.initial["name"] == "shear"
        assert cfg.caps["dense"] == 4096

    def test_3d_default_initial_condition(self):
        cfg = parse_config("", kind="laxcheck3d")
        assert cfg.dim == 3 and cfg.initial["name"] == "taylor_green"

    def test_sections_and_comments(self):
        text = """
        # comment line
        kind = spectrum   # trailing comment
        n = 32
        [initial]
        name = cellular
        [spectrum]
        m = 6
        s = 1
        sector = none
        """
        cfg = parse_config(text)
        assert cfg.n == 32
        assert cfg.initial["name"] == "cellular"
        assert cfg.spectrum == {"m": 6, "sector": None, "s": 1.0, "band": [-0.9, 0.9]}

    def test_defaults_are_not_shared(self):
        a = parse_config("kind = simulate2d")
        a.sobolev.append(9.0)
        assert parse_config("kind = simulate2d").sobolev == [0.0, 1.0, 2.0]

    def test_lyapunov_points(self):
        cfg = parse_config("kind = lyapunov\n[lyapunov]\nstarts = 3.14, 0; 0, 3.14\n")
        assert cfg.lyapunov["starts"] == [[3.14, 0.0], [0.0, 3.14]]


class TestRejections:
    @pytest.mark.parametrize("n", ["63", "6", "-8"])
    def test_bad_n_cites_even_rule(self, n):
        (err,) = _errors(f"kind = simulate2d\nn = {n}\n")
        assert "line 2" in err and "even" in err

    def test_viscosity_is_unknown(self):
        (err,) = _errors("kind = simulate2d\nviscosity = 0.01\n")
        assert "line 2" in err and "viscosity" in err

    def test_all_errors_reported(self):
        text = "kind = simulate2d\nn = 7\ndt = -1\nfoo = 1\n[bogus]\nx = 1\n[initial]\ndecay = abc\n"
        errs = _errors(text)
        assert [e.split(":")[0] for e in errs] == ["line 2", "line 3", "line 4", "line 5", "line 8"]

    def test_duplicate_key(self):
        (err,) = _errors("kind = simulate2d\ndt = 0.1\ndt = 0.2\n")
        assert "duplicate" in err and "line 3" in err

    def test_missing_and_conflicting_kind(self):
        assert _errors("n = 16") == ["missing required key 'kind'"]
        (err,) = _errors("kind = spectrum", kind="simulate2d")
        assert "conflicts" in err

    def test_malformed_lines(self):
        errs = _errors("kind = simulate2d\njust words\n[initial\n")
        assert len(errs) == 2

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "missing.cfg")

    @settings(max_examples=40, deadline=None)
    @given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=12))
    def test_any_unknown_run_key_rejected(self, key):
        if key in SCHEMA["run"]:
            return
        with pytest.raises(ConfigurationError):
            parse_config(f"kind = {KINDS[0]}\n{key} = 1\n")


def test_load_config_from_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("kind = expand\n[expand]\nm = 4\n", encoding="utf-8")
    cfg = load_config(path)
    assert cfg.kind == "expand" and cfg.expand == {"m": 4, "sector": 0}
