import pytest

from ntk_convergence.config import (
    DERIVED_DEFAULTS,
    PINN_CHECKS,
    THREADS_ENV,
    parse_config,
    parse_document,
)
from ntk_convergence.exceptions import ConfigError
from ntk_convergence.interfaces import ActivationKind

REGRESSION = """
# small regression run
mode = regression-gd
n = 8
d = 2
m = 256
seed = 1
"""

PINN = """
mode = pinn-ngd
n1 = 16
n2 = 16
d = 1
m = 512
seed = 0
activation = tanh
eta_mode = fixed
eta = 0.5
"""


@pytest.fixture(autouse=True)
def no_threads_env(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)


def test_minimal_regression_defaults():
    """Test the defaults filled in for a minimal regression config."""
    config = parse_document(REGRESSION)
    assert config.problem == "regression"
    assert config.activation_kind is ActivationKind.RELU
    assert config.iters == 500
    assert config.eta_setting == "auto"
    assert config.checks == DERIVED_DEFAULTS["regression"]["checks"]
    assert config.instance is None
    assert config.threads == 1


def test_pinn_defaults_and_fixed_eta():
    """Test the PINN defaults and a fixed learning rate."""
    config = parse_document(PINN)
    assert config.problem == "pinn"
    assert config.instance == "poly-sine"
    assert config.eta_setting == 0.5
    assert config.iters == 200
    assert config.checks == list(PINN_CHECKS)


def test_fixed_eta_requires_eta():
    """Test that eta_mode = fixed without eta is rejected."""
    with pytest.raises(ConfigError) as exc:
        parse_document(REGRESSION + "eta_mode = fixed\n")
    assert exc.value.key == "eta"


def test_eta_rejected_in_auto_mode():
    with pytest.raises(ConfigError) as exc:
        parse_document(REGRESSION + "eta = 0.1\n")
    assert exc.value.key == "eta"


def test_ngd_eta_range():
    """Test that the NGD learning rate must lie in (0, 1]."""
    with pytest.raises(ConfigError) as exc:
        parse_document(PINN.replace("eta = 0.5", "eta = 1.5"))
    assert exc.value.key == "eta"
    assert parse_document(PINN.replace("eta = 0.5", "eta = 1.0")).eta == 1.0


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError) as exc:
        parse_document("mode = regression-gd\nwidth = 3\n")
    assert exc.value.key == "width"
    assert exc.value.line == 2


def test_duplicate_key():
    """Test that a key set twice is rejected."""
    with pytest.raises(ConfigError) as exc:
        parse_document(REGRESSION + "m = 512\n")
    assert exc.value.key == "m"


def test_type_error_names_key():
    with pytest.raises(ConfigError) as exc:
        parse_document(REGRESSION.replace("m = 256", "m = wide"))
    assert exc.value.key == "m"
    assert exc.value.details["line"] == 6


@pytest.mark.parametrize("missing", ["n", "d", "m", "seed"])
def test_missing_required_key(missing):
    """Test that each required key is named when missing."""
    text = "\n".join(line for line in REGRESSION.splitlines() if not line.startswith(missing + " "))
    with pytest.raises(ConfigError) as exc:
        parse_document(text)
    assert exc.value.key == missing


def test_problem_specific_keys_are_rejected():
    """Test that PINN keys are rejected for regression."""
    with pytest.raises(ConfigError) as exc:
        parse_document(REGRESSION + "n1 = 4\n")
    assert exc.value.key == "n1"


def test_activation_must_fit_problem():
    """Test ReLU for regression and a smooth activation for PINNs."""
    with pytest.raises(ConfigError):
        parse_document(REGRESSION + "activation = tanh\n")
    with pytest.raises(ConfigError):
        parse_document(PINN.replace("activation = tanh", "activation = relu"))


def test_generic_modes_need_problem():
    text = REGRESSION.replace("regression-gd", "check-suite")
    with pytest.raises(ConfigError) as exc:
        parse_document(text)
    assert exc.value.key == "problem"
    assert parse_document(text + "problem = regression\n").mode == "check-suite"


def test_gd_convergence_check_needs_fifty_iterations():
    """Test that a check suite running gd_convergence rejects iters below 50 at load time."""
    text = REGRESSION.replace("regression-gd", "check-suite") + "problem = regression\niters = 20\n"
    with pytest.raises(ConfigError) as exc:
        parse_document(text + "checks = gd_convergence\n")
    assert exc.value.key == "iters"
    assert exc.value.line == 9
    assert parse_document(text + "checks = gram_concentration\n").iters == 20


def test_pinn_sweep_defaults():
    """Test the PINN width grids reach 2^14."""
    config = parse_document(PINN)
    assert config.m_grid == [2 ** k for k in range(7, 15)]
    assert config.drift_widths == [1024, 4096, 16384]


def test_mode_problem_conflict():
    with pytest.raises(ConfigError):
        parse_document(REGRESSION + "problem = pinn\n")


def test_grid_validation():
    """Test that width and radius grids are validated."""
    with pytest.raises(ConfigError):
        parse_document(REGRESSION + "m_grid = 64, 32, 128, 256\n")
    with pytest.raises(ConfigError):
        parse_document(REGRESSION + "r_grid = 0.1, 1.5\n")
    with pytest.raises(ConfigError):
        parse_document(REGRESSION + "checks = gram_concentration, ngd_linear\n")


def test_lists_and_booleans():
    config = parse_document(REGRESSION + "m_grid = 16, 32, 64, 128\ndiag_gram = true\n")
    assert config.m_grid == [16, 32, 64, 128]
    assert config.diag_gram is True
    with pytest.raises(ConfigError):
        parse_document(REGRESSION + "diag_gram = yes\n")


def test_overrides_win():
    """Test that command-line overrides beat the file."""
    config = parse_document(REGRESSION, {"seed": 9, "out_dir": "elsewhere", "mode": None})
    assert config.seed == 9
    assert config.out_dir == "elsewhere"
    assert config.mode == "regression-gd"


def test_threads_from_environment(monkeypatch):
    """Test the worker count read from the environment."""
    monkeypatch.setenv(THREADS_ENV, "4")
    assert parse_document(REGRESSION).threads == 4
    monkeypatch.setenv(THREADS_ENV, "0")
    with pytest.raises(ConfigError):
        parse_document(REGRESSION)


def test_resolved_document_reparses():
    """Test that the echoed document parses to the same config."""
    for text in (REGRESSION, PINN):
        config = parse_document(text)
        assert parse_document(config.to_document()) == config


def test_parse_config_file(config_file):
    path = config_file(REGRESSION)
    assert parse_config(path).m == 256
    with pytest.raises(ConfigError):
        parse_config(path.parent / "missing.conf")
