import pytest

from chflow.config import ConfigError, default_config_text, parse_config
from chflow.grid import mean


class TestParsing:
    def test_minimal_config_gets_defaults(self):
        cfg = parse_config("run.T = 0.5\n")
        assert cfg.T == 0.5
        assert cfg.nx == cfg.ny == 64
        assert cfg.newton_tol == 1e-10
        assert cfg.newton_max == 30
        assert cfg.dt == 1e-4
        assert cfg.mobility_form == "constant"

    def test_default_text_parses(self):
        cfg = parse_config(default_config_text())
        assert cfg.theta0 > cfg.theta

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# header\n\nrun.T = 2.0  # trailing\n")
        assert cfg.T == 2.0

    def test_unknown_key_rejected_with_line_number(self):
        with pytest.raises(ConfigError) as ei:
            parse_config("grid.nx = 16\nbogus.key = 1\n")
        assert any("line 2" in v and "unknown key" in v for v in ei.value.violations)

    def test_syntax_error_reported(self):
        with pytest.raises(ConfigError) as ei:
            parse_config("grid.nx 16\n")
        assert any("line 1" in v for v in ei.value.violations)

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError) as ei:
            parse_config("run.T = 1\nrun.T = 2\n")
        assert any("duplicate" in v for v in ei.value.violations)

    def test_all_violations_collected(self):
        text = "grid.nx = 2\npotential.theta0 = 0.5\ninit.mean = 1.5\n"
        with pytest.raises(ConfigError) as ei:
            parse_config(text)
        assert len(ei.value.violations) >= 3

    def test_theta_ordering_enforced(self):
        with pytest.raises(ConfigError) as ei:
            parse_config("potential.theta = 2.0\npotential.theta0 = 2.0\n")
        assert any("theta0 must exceed theta" in v for v in ei.value.violations)

    def test_interior_mean_enforced(self):
        with pytest.raises(ConfigError) as ei:
            parse_config("init.mean = 1.0\n")
        assert any("interior" in v for v in ei.value.violations)

    def test_mobility_bounds_validated(self):
        text = ("mobility.form = nondegenerate\nmobility.coeffs = 1.0, 0.9\n"
                "mobility.b_min = 0.5\nmobility.b_max = 1.5\n")
        with pytest.raises(ConfigError) as ei:
            parse_config(text)
        assert any("violates declared bounds" in v for v in ei.value.violations)

    def test_bool_values(self):
        assert parse_config("output.pgm = yes\n").pgm is True
        assert parse_config("output.pgm = off\n").pgm is False
        with pytest.raises(ConfigError):
            parse_config("output.pgm = maybe\n")

    def test_adaptive_window_checked(self):
        text = "stepper.adaptive = true\nstepper.dt = 1.0\nstepper.dt_max = 0.5\n"
        with pytest.raises(ConfigError) as ei:
            parse_config(text)
        assert any("dt_min <= dt <= dt_max" in v for v in ei.value.violations)


class TestBuilders:
    def test_builds_are_consistent(self):
        text = ("grid.nx = 16\ngrid.ny = 16\nmobility.form = nondegenerate\n"
                "mobility.coeffs = 1.0, 0.5\nmobility.b_min = 0.5\n"
                "mobility.b_max = 1.5\ninit.kind = constant_noise\n"
                "init.mean = 0.1\ninit.noise = 0.05\ninit.seed = 3\n")
        cfg = parse_config(text)
        g = cfg.build_grid()
        assert g.nx == 16
        mob = cfg.build_mobility()
        assert mob.bounds == (0.5, 1.5)
        phi0 = cfg.build_initial_field(g)
        assert mean(phi0) == pytest.approx(0.1, abs=1e-12)
        st = cfg.build_stepper()
        assert st.dt == cfg.dt

    def test_file_kind_requires_path(self):
        with pytest.raises(ConfigError) as ei:
            parse_config("init.kind = file\n")
        assert any("init.path" in v for v in ei.value.violations)

    def test_tanh_stripe_mean_tracks_target(self):
        text = "init.kind = tanh_stripe\ninit.mean = 0.25\ngrid.nx = 128\ngrid.ny = 16\n"
        cfg = parse_config(text)
        phi0 = cfg.build_initial_field()
        assert mean(phi0) == pytest.approx(0.25, abs=0.02)

    def test_checkerboard_mean_exact(self):
        text = "init.kind = checkerboard\ninit.mean = -0.2\ninit.band_limit = 4\n"
        cfg = parse_config(text)
        phi0 = cfg.build_initial_field()
        assert mean(phi0) == pytest.approx(-0.2, abs=1e-13)
