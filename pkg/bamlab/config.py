"""Run settings: the ``bamlab.toml`` defaults manifest and per-command config."""

from __future__ import annotations

import dataclasses as dc
import os
import tomllib
import typing as typ
from pathlib import Path

from bamlab.errors import ConfigError

if typ.TYPE_CHECKING:
    import collections.abc as cabc

DEFAULTS_FILE = "bamlab.toml"
NODE_CAP_ENV = "BAMLAB_NODE_CAP"


def _check_ranges(epsilon: float, samples: int, alpha: float) -> None:
    if not 0.0 < epsilon < 1.0:
        msg = f"epsilon must lie in (0, 1); got {epsilon}."
        raise ConfigError(msg)
    if samples < 1:
        msg = f"samples must be at least 1; got {samples}."
        raise ConfigError(msg)
    if not 0.0 < alpha <= 1.0:
        msg = f"alpha must lie in (0, 1]; got {alpha}."
        raise ConfigError(msg)


@dc.dataclass(frozen=True)
class Defaults:
    """Built-in settings, overridden by the manifest and then by flags."""

    epsilon: float = 0.05
    samples: int = 100_000
    seed: int = 0
    alpha: float = 1.0
    node_cap: int = 5000
    tolerance: float = 1e-7
    workers: int = 1

    def __post_init__(self) -> None:
        """Reject out-of-range defaults."""
        _check_ranges(self.epsilon, self.samples, self.alpha)
        if self.node_cap < 1 or self.workers < 1:
            msg = "node_cap and workers must be positive."
            raise ConfigError(msg)
        if not self.tolerance >= 0.0:
            msg = f"tolerance must be non-negative; got {self.tolerance}."
            raise ConfigError(msg)


def _coerce(name: str, raw: object, kind: type) -> int | float:
    if isinstance(raw, bool) or not isinstance(raw, int | float):
        msg = f"[defaults] {name} must be a number; got {raw!r}."
        raise ConfigError(msg)
    if kind is int and not isinstance(raw, int):
        msg = f"[defaults] {name} must be an integer; got {raw!r}."
        raise ConfigError(msg)
    return kind(raw)


def _from_table(table: cabc.Mapping[str, object], source: Path) -> Defaults:
    fields = {field.name: field for field in dc.fields(Defaults)}
    unknown = sorted(set(table) - set(fields))
    if unknown:
        msg = f"Unknown keys in {source}: {', '.join(unknown)}."
        raise ConfigError(msg)
    kinds = {"samples": int, "seed": int, "node_cap": int, "workers": int}
    values = {
        name: _coerce(name, raw, kinds.get(name, float)) for name, raw in table.items()
    }
    return Defaults(**values)


def load_defaults(path: Path | None = None) -> Defaults:
    """Read ``[defaults]`` from ``path`` or from ``./bamlab.toml`` when present.

    An explicit ``path`` must exist; the implicit one is optional.
    """
    source = path if path is not None else Path.cwd() / DEFAULTS_FILE
    if not source.exists():
        if path is not None:
            msg = f"Missing configuration file {source}."
            raise ConfigError(msg)
        return Defaults()
    try:
        document = tomllib.loads(source.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        msg = f"Cannot parse {source}: {exc}"
        raise ConfigError(msg) from exc
    table = document.get("defaults", {})
    if not isinstance(table, dict):
        msg = f"[defaults] in {source} must be a table."
        raise ConfigError(msg)
    return _from_table(table, source)


def resolve_node_cap(
    explicit: int | None = None, defaults: Defaults | None = None
) -> int:
    """Brute-force tree cap: explicit value, then ``BAMLAB_NODE_CAP``, then defaults."""
    if explicit is not None:
        return explicit
    raw = os.environ.get(NODE_CAP_ENV)
    if raw is not None:
        try:
            cap = int(raw)
        except ValueError:
            msg = f"{NODE_CAP_ENV} must be an integer; got {raw!r}."
            raise ConfigError(msg) from None
        if cap < 1:
            msg = f"{NODE_CAP_ENV} must be positive; got {cap}."
            raise ConfigError(msg)
        return cap
    return (defaults if defaults is not None else load_defaults()).node_cap


@dc.dataclass(frozen=True)
class RunConfig:
    """Validated settings of one command-line run."""

    command: str
    instance_path: Path | None = None
    mechanism_path: Path | None = None
    epsilon: float = 0.05
    samples: int = 100_000
    seed: int = 0
    alpha: float = 1.0
    output_path: Path | None = None
    mech: str | None = None
    workers: int = 1
    tolerance: float = 1e-7
    node_cap: int = 5000

    def __post_init__(self) -> None:
        """Reject out-of-range settings."""
        _check_ranges(self.epsilon, self.samples, self.alpha)
        if self.workers < 1:
            msg = f"workers must be positive; got {self.workers}."
            raise ConfigError(msg)

    @classmethod
    def merge(
        cls, command: str, defaults: Defaults, overrides: cabc.Mapping[str, object]
    ) -> RunConfig:
        """Apply flag ``overrides`` (``None`` meaning unset) over ``defaults``."""
        names = {field.name for field in dc.fields(cls)}
        base = {
            field.name: getattr(defaults, field.name) for field in dc.fields(Defaults)
        }
        base["node_cap"] = resolve_node_cap(defaults=defaults)
        chosen = {key: value for key, value in overrides.items() if value is not None}
        merged = {k: v for k, v in {**base, **chosen}.items() if k in names}
        return cls(command=command, **merged)


__all__ = [
    "DEFAULTS_FILE",
    "NODE_CAP_ENV",
    "Defaults",
    "RunConfig",
    "load_defaults",
    "resolve_node_cap",
]
