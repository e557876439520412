"""Plain-text run configuration: ``key = value`` lines with ``#`` comments."""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigurationError


class RunConfig(dict):
    """Mapping of normalized keys (``kl-weight`` -> ``kl_weight``) to raw strings."""

    def __init__(self, values=None, source: str | None = None):
        super().__init__(values or {})
        self.source = source


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{source}:{lineno}: empty key")
        key = key.replace("-", "_")
        if key in values:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return RunConfig(values, source)


def read_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
