from __future__ import annotations

import dataclasses
import re
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Type, TypeVar, Union

try:
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - Python < 3.11
    import tomli as _toml

from src.errors import ConfigError


T = TypeVar("T")


@dataclass
class ConfigSource:
    """Raw TOML text kept around so that field errors can point at a line."""

    path: Optional[str] = None
    text: str = ""
    _lines: List[str] = field(default_factory=list, repr=False)

    def line_of(self, dotted: str) -> Optional[int]:
        if not self.text:
            return None
        if not self._lines:
            self._lines = self.text.splitlines()
        key = dotted.split(".")[-1]
        key = re.sub(r"\[\d+\]$", "", key)
        pat = re.compile(rf"^\s*(\[\[?\s*)?([\w.]*\.)?{re.escape(key)}\s*(=|\]\]?)")
        for i, ln in enumerate(self._lines, start=1):
            if pat.match(ln):
                return i
        return None

    def error(self, dotted: str, message: str) -> ConfigError:
        return ConfigError(message, field=dotted, line=self.line_of(dotted), path=self.path)


def load_toml(path: str | Path) -> Tuple[Dict[str, Any], ConfigSource]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config ({e})", path=str(p)) from e
    return parse_toml(text, str(p))


def parse_toml(text: str, path: Optional[str] = None) -> Tuple[Dict[str, Any], ConfigSource]:
    try:
        data = _toml.loads(text)
    except _toml.TOMLDecodeError as e:
        m = re.search(r"line (\d+)", str(e))
        raise ConfigError(f"malformed TOML ({e})", line=int(m.group(1)) if m else None, path=path) from e
    return data, ConfigSource(path=path, text=text)


def _is_optional(tp: Any) -> Tuple[bool, Any]:
    if typing.get_origin(tp) is Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1 and len(typing.get_args(tp)) == 2:
            return True, args[0]
    return False, tp


def _coerce(value: Any, tp: Any, dotted: str, src: ConfigSource) -> Any:
    optional, tp = _is_optional(tp)
    if value is None:
        if optional:
            return None
        raise src.error(dotted, "value is required")
    origin = typing.get_origin(tp)
    if tp is Any:
        return value
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, Mapping):
            raise src.error(dotted, f"expected a table, got {type(value).__name__}")
        return build_dataclass(tp, value, src, dotted)
    if tp is bool:
        if not isinstance(value, bool):
            raise src.error(dotted, f"expected a boolean, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise src.error(dotted, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise src.error(dotted, f"expected a number, got {value!r}")
        return float(value)
    if tp is complex:
        # [re, im] pairs or plain reals
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return complex(float(value), 0.0)
        if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
            return complex(float(value[0]), float(value[1]))
        raise src.error(dotted, f"expected a complex number as [re, im], got {value!r}")
    if tp is str:
        if not isinstance(value, str):
            raise src.error(dotted, f"expected a string, got {value!r}")
        return value
    if origin in (list, List):
        (inner,) = typing.get_args(tp) or (Any,)
        if not isinstance(value, list):
            raise src.error(dotted, f"expected a list, got {type(value).__name__}")
        return [_coerce(v, inner, f"{dotted}[{i}]", src) for i, v in enumerate(value)]
    if origin in (tuple, Tuple):
        args = typing.get_args(tp)
        if not isinstance(value, list) or len(value) != len(args):
            raise src.error(dotted, f"expected a list of length {len(args)}, got {value!r}")
        return tuple(_coerce(v, a, f"{dotted}[{i}]", src) for i, (v, a) in enumerate(zip(value, args)))
    if origin in (dict, Dict):
        if not isinstance(value, Mapping):
            raise src.error(dotted, "expected a table")
        return dict(value)
    return value


def build_dataclass(cls: Type[T], table: Mapping[str, Any], src: Optional[ConfigSource] = None, prefix: str = "") -> T:
    """Instantiate `cls` from a TOML table, rejecting unknown keys and bad types."""
    src = src or ConfigSource()
    hints = typing.get_type_hints(cls)
    known = {f.name: f for f in dataclasses.fields(cls) if f.init}
    for key in table:
        if key not in known:
            dotted = f"{prefix}.{key}" if prefix else key
            raise src.error(dotted, f"unknown key (allowed: {', '.join(sorted(known))})")
    kwargs: Dict[str, Any] = {}
    for name, f in known.items():
        dotted = f"{prefix}.{name}" if prefix else name
        if name in table:
            kwargs[name] = _coerce(table[name], hints[name], dotted, src)
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:  # type: ignore[misc]
            raise src.error(dotted, "missing required key")
    try:
        obj = cls(**kwargs)
    except ValueError as e:
        raise src.error(prefix or cls.__name__, str(e)) from e
    return obj
