import logging
import os
import tempfile
from enum import Enum
from typing import TYPE_CHECKING, Union

if TYPE_CHECKING:
    from argparse import Namespace
    from typing import Any, Dict, Mapping, Optional, Type, TypeVar

    T = TypeVar("T")


class InvalidFieldsError(Exception):
    """A mapping does not describe a value of the requested type."""

    pass


def get_loglevel(args, base=None):
    # type: (Namespace, Optional[int]) -> int
    if base is None:
        base = logging.getLogger().level
    verbose = args.verbose * 10
    quiet = args.quiet * 10
    return base - verbose + quiet


def namedtuple_to_dict(value):
    # type: (Any) -> Dict[str, Any]
    """Convert a NamedTuple of plain values and enums into a YAML-safe dict."""
    result = {}
    for key, item in value._asdict().items():
        result[key] = item.value if isinstance(item, Enum) else item
    return result


def _coerce(name, kind, value):
    # type: (str, Any, Any) -> Any
    if getattr(kind, "__origin__", None) is Union:
        if value is None:
            return None
        kind = [k for k in kind.__args__ if k is not type(None)][0]  # noqa: E721
    if isinstance(kind, type) and issubclass(kind, Enum):
        try:
            return kind(value)
        except ValueError:
            choices = ", ".join(str(member.value) for member in kind)
            msg = "{} must be one of {}, got {}".format(name, choices, value)
            raise InvalidFieldsError(msg)
    if kind is bool:
        if not isinstance(value, bool):
            raise InvalidFieldsError("{} must be true or false, got {}".format(name, value))
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise InvalidFieldsError("{} must be an integer, got {}".format(name, value))
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidFieldsError("{} must be a number, got {}".format(name, value))
        return float(value)
    return value


def namedtuple_from_dict(cls, data, defaults):
    # type: (Type[T], Mapping[str, Any], T) -> T
    """Build a NamedTuple from defaults overridden by data.

    Keys of data must name fields of cls, and values are checked against the field types.
    """
    fields = cls.__annotations__  # type: ignore
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise InvalidFieldsError("unknown keys: {}".format(", ".join(unknown)))
    updates = {key: _coerce(key, fields[key], value) for key, value in data.items()}
    return defaults._replace(**updates)  # type: ignore


def atomic_write(path, data):
    # type: (str, bytes) -> None
    """Write data to path through a temporary file in the same directory and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, temporary = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.unlink(temporary)
        raise
