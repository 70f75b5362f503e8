"""Flat ``key = value`` configuration files.

One assignment per line, ``#`` starts a comment. Values are parsed with the
type of the dataclass field they target; unknown keys are rejected so typos
surface early.
"""
from __future__ import annotations

import dataclasses
import hashlib
import typing

from .errors import ConfigError, ParseError


def parse_kv(text, source="<config>"):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{source}: line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError(f"{source}: line {lineno}: empty key")
        out[key] = value
    return out


def _coerce(value, typ, key):
    try:
        if typ is bool:
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if typ is int:
            return int(value)
        if typ is float:
            return float(value)
        if typ is str:
            return value
        if typing.get_origin(typ) is tuple:
            args = typing.get_args(typ)
            parts = [p.strip() for p in value.strip("()").split(",") if p.strip()]
            return tuple(_coerce(p, args[0], key) for p in parts)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {getattr(typ, '__name__', typ)}") from None
    raise ConfigError(f"{key}: unsupported field type {typ}")


def apply_kv(cls, values, prefix=""):
    """Instantiate dataclass ``cls`` from string values (keys optionally prefixed)."""
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = prefix + f.name
        if key in values:
            kwargs[f.name] = _coerce(values[key], hints[f.name], key)
    return cls(**kwargs)


def format_kv(*objs):
    lines = []
    for obj in objs:
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def config_hash(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def check_known_keys(values, *classes):
    known = {f.name for cls in classes for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
