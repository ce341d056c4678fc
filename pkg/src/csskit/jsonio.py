"""Deterministic JSON for wire lines and document files.

Numbers are kept exact: Decimal values are emitted as plain decimal literals
and every fractional literal is decoded back into Decimal, so a value like
4.50 survives a round trip digit for digit. Keys are always sorted, which
makes encoded output byte-stable for identical inputs.
"""

from __future__ import annotations

import json
import math
from decimal import Decimal
from fractions import Fraction

from .errors import ParseError
from .values import fraction_to_number


def dumps(value, indent: int | None = None) -> str:
    out: list[str] = []
    _emit(value, out, indent, 0)
    return "".join(out)


def loads(text: str):
    try:
        return json.loads(text, parse_float=Decimal, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(exc.msg, offset) from exc
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def _reject_constant(name: str):
    raise ValueError(f"non-finite number {name} is not allowed")


def _emit(value, out: list[str], indent: int | None, depth: int) -> None:
    if value is None or value is True or value is False:
        out.append("null" if value is None else ("true" if value else "false"))
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, Decimal):
        if not value.is_finite():
            raise ValueError(f"non-finite Decimal {value} is not serializable")
        out.append(str(value))
    elif isinstance(value, Fraction):
        _emit(fraction_to_number(value), out, indent, depth)
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite float {value} is not serializable")
        out.append(repr(value))
    elif isinstance(value, (list, tuple)):
        _emit_seq(value, out, indent, depth)
    elif isinstance(value, dict):
        _emit_map(value, out, indent, depth)
    else:
        raise ValueError(f"value of type {type(value).__name__} is not serializable")


def _emit_seq(value, out: list[str], indent: int | None, depth: int) -> None:
    if not value:
        out.append("[]")
        return
    out.append("[")
    for i, item in enumerate(value):
        if i:
            out.append("," if indent is None else ",")
        _newline(out, indent, depth + 1)
        _emit(item, out, indent, depth + 1)
    _newline(out, indent, depth)
    out.append("]")


def _emit_map(value: dict, out: list[str], indent: int | None, depth: int) -> None:
    if not value:
        out.append("{}")
        return
    out.append("{")
    for i, key in enumerate(sorted(value)):
        if not isinstance(key, str):
            raise ValueError("object keys must be strings")
        if i:
            out.append(",")
        _newline(out, indent, depth + 1)
        out.append(json.dumps(key, ensure_ascii=False))
        out.append(": " if indent is not None else ":")
        _emit(value[key], out, indent, depth + 1)
    _newline(out, indent, depth)
    out.append("}")


def _newline(out: list[str], indent: int | None, depth: int) -> None:
    if indent is not None:
        out.append("\n" + " " * indent * depth)
