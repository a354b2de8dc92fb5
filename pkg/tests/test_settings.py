import pytest

from permlab.common.errors import ConfigError
from permlab.common.settings import load_settings


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv("PERM_CONFIG", raising=False)
    monkeypatch.delenv("PERM_THREADS", raising=False)


def test_packaged_defaults():
    settings = load_settings()
    assert settings.m == 60
    assert settings.continuation == "recentred"
    assert settings.strategy == "first_clear"
    assert settings.points == 21
    assert settings.rate == "1/8"
    assert settings.threads >= 1


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("PERM_THREADS", "3")
    assert load_settings().threads == 3


def test_override_file(tmp_path, monkeypatch):
    path = tmp_path / "local.cfg"
    path.write_text("[cac]\nm = 120\ncontinuation = truncated\n")
    monkeypatch.setenv("PERM_CONFIG", str(path))
    settings = load_settings()
    assert settings.m == 120
    assert settings.continuation == "truncated"
    assert settings.beta == pytest.approx(2.718281828459045)


def test_explicit_file_wins(tmp_path, monkeypatch):
    env_file = tmp_path / "env.cfg"
    env_file.write_text("[cac]\nm = 80\n")
    explicit = tmp_path / "explicit.cfg"
    explicit.write_text("[cac]\nm = 90\n")
    monkeypatch.setenv("PERM_CONFIG", str(env_file))
    assert load_settings(str(explicit)).m == 90


def test_missing_file():
    with pytest.raises(ConfigError):
        load_settings("/nonexistent/perm.cfg")


def test_invalid_value(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[cac]\nm = lots\n")
    with pytest.raises(ConfigError):
        load_settings(str(path))
