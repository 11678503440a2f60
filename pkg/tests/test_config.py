"""Tests for the defaults manifest and run configuration."""

from __future__ import annotations

import typing as typ

import pytest

from bamlab.config import (
    NODE_CAP_ENV,
    Defaults,
    RunConfig,
    load_defaults,
    resolve_node_cap,
)
from bamlab.errors import ConfigError

if typ.TYPE_CHECKING:
    from pathlib import Path


def test_missing_implicit_manifest_uses_builtins(
    tmp_path: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    """Without ``bamlab.toml`` the built-in defaults apply."""
    monkeypatch.chdir(tmp_path)
    assert load_defaults() == Defaults(), "built-in defaults expected"


def test_manifest_overrides_builtins(tmp_path: Path) -> None:
    """Keys under ``[defaults]`` replace the built-in values."""
    path = tmp_path / "bamlab.toml"
    path.write_text("[defaults]\nepsilon = 0.1\nsamples = 500\n", encoding="utf-8")
    defaults = load_defaults(path)
    assert defaults.epsilon == 0.1, "epsilon comes from the manifest"
    assert defaults.samples == 500, "samples comes from the manifest"
    assert defaults.seed == 0, "unset keys keep their defaults"


@pytest.mark.parametrize(
    "body",
    [
        "[defaults]\nunknown = 1\n",
        "[defaults]\nsamples = 1.5\n",
        "[defaults]\nepsilon = 2.0\n",
        "[defaults]\nseed = true\n",
        "defaults = 3\n",
        "[defaults\n",
    ],
)
def test_bad_manifests_are_config_errors(tmp_path: Path, body: str) -> None:
    """Unknown keys, wrong types, bad ranges and broken TOML are rejected."""
    path = tmp_path / "bamlab.toml"
    path.write_text(body, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_defaults(path)


def test_explicit_manifest_must_exist(tmp_path: Path) -> None:
    """A named manifest that is missing is an error."""
    with pytest.raises(ConfigError):
        load_defaults(tmp_path / "absent.toml")


def test_node_cap_precedence(monkeypatch: pytest.MonkeyPatch) -> None:
    """Explicit caps beat the environment, which beats the defaults."""
    monkeypatch.setenv(NODE_CAP_ENV, "42")
    assert resolve_node_cap(7) == 7, "explicit cap wins"
    assert resolve_node_cap(None, Defaults()) == 42, "environment beats defaults"
    monkeypatch.delenv(NODE_CAP_ENV)
    assert resolve_node_cap(None, Defaults(node_cap=9)) == 9, "defaults apply last"
    monkeypatch.setenv(NODE_CAP_ENV, "many")
    with pytest.raises(ConfigError):
        resolve_node_cap()


def test_run_config_merges_flags_over_defaults(
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    """Unset flags fall back to the defaults."""
    monkeypatch.delenv(NODE_CAP_ENV, raising=False)
    cfg = RunConfig.merge(
        "simulate", Defaults(samples=10), {"seed": 4, "samples": None}
    )
    assert cfg.seed == 4, "flag overrides the default"
    assert cfg.samples == 10, "unset flag keeps the default"
    assert cfg.node_cap == 5000, "node cap comes from the defaults"


def test_run_config_rejects_bad_epsilon() -> None:
    """ε = 0 is a configuration error."""
    with pytest.raises(ConfigError):
        RunConfig("solve", epsilon=0.0)
