"""
JSON codec for the kcoherence dataclasses.

Complex numbers are written as ``[re, im]`` pairs. Numpy arrays are written
row-major as nested lists of such pairs, so a state vector becomes
``[[re, im], ...]`` and a matrix ``[[[re, im], ...], ...]``.
"""

import json
from dataclasses import MISSING, Field, field, fields, is_dataclass
from types import NoneType, UnionType
from typing import (
    Any, Type, TypeVar, Dict, Mapping, Callable, List,
    cast, Optional, get_origin, get_args, get_type_hints, Union, final
)

import numpy as np

from ..core import Codec
from ..errors import CodecError

_T = TypeVar("_T")

JSON_FIELD_NAME = "json_name"
JSON_SERIALIZER = "json_serializer"
JSON_DESERIALIZER = "json_deserializer"


class JSONCodec(Codec):
    """JSON serialization codec for dataclasses holding numpy data."""

    def __init__(self, sort_keys: bool = False):
        self.sort_keys = sort_keys

    def encode(self, obj: Any, **kwargs: Any) -> Any:
        return self.to_json(obj, **kwargs)

    def decode(self, cls: Type[_T], data: Any, **kwargs: Any) -> _T:
        return self.from_json(cls, data, **kwargs)

    def to_dict(self, obj: Any, **_: Any) -> Any:
        """Encode dataclass to a JSON-compatible dictionary."""
        if not is_dataclass(obj):
            raise CodecError(f"obj is not a dataclass, found: '{obj}'")
        try:
            return _encode(obj)
        except Exception as e:
            raise CodecError(f"Error encoding object: {e}") from e

    def from_dict(self, cls: Type[_T], data: Any, **_: Any) -> _T:
        """Decode a JSON-compatible dictionary to a dataclass.

        Dataclasses validate in ``__post_init__``, so validation failures
        surface here as `CodecError` chained to the validation error.
        """
        if not is_dataclass(cls):
            raise CodecError(f"cls is not a dataclass, found: '{cls}'")
        if not isinstance(data, Mapping):
            raise CodecError(f"expected a JSON object for {cls.__name__}, got: {type(data).__name__}")
        try:
            return _decode_dataclass(cls, data)
        except Exception as e:
            raise CodecError(f"Error decoding data: {e}") from e

    def to_json(self, obj: Any, **dump_kwargs: Any) -> str:
        """Serialize dataclass to JSON string.

        Args:
            obj: The dataclass instance to serialize.
            dump_kwargs: Additional keyword arguments to pass to `json.dumps`.
        """
        dump_kwargs.setdefault("sort_keys", self.sort_keys)
        try:
            return json.dumps(self.to_dict(obj), **dump_kwargs)
        except CodecError:
            raise
        except Exception as e:
            raise CodecError(f"Error serializing object: {e}") from e

    def from_json(self, cls: Type[_T], json_str: str, **load_kwargs: Any) -> _T:
        """Deserialize JSON string to dataclass.

        Args:
            cls: The dataclass type to deserialize to.
            json_str: The JSON string to deserialize.
            load_kwargs: Additional keyword arguments to pass to `json.loads`.
        """
        try:
            data = json.loads(json_str, **load_kwargs)
        except Exception as e:
            raise CodecError(f"Error deserializing JSON: {e}") from e
        return self.from_dict(cls, data)

json_codec = JSONCodec()


class JSONSerializable:
    """Gives states, certificates, maps and reports ``to_dict`` / ``to_json``.

    ``codec`` defaults to the module-level `json_codec`.
    """

    def to_dict(self, *, codec: JSONCodec | None = None, **kwargs: Any) -> Dict[str, Any]:
        return (codec or json_codec).to_dict(self, **kwargs)

    def to_json(self, *, codec: JSONCodec | None = None, **kwargs: Any) -> str:
        return (codec or json_codec).to_json(self, **kwargs)


class JSONDeserializable:
    """Gives ``from_dict`` / ``from_json`` constructors that validate through ``__post_init__``."""

    @classmethod
    def from_dict(cls: Type[_T], data: Mapping[str, Any], *, codec: JSONCodec | None = None, **kwargs: Any) -> _T:
        return (codec or json_codec).from_dict(cls, data, **kwargs)

    @classmethod
    def from_json(cls: Type[_T], json_str: str, *, codec: JSONCodec | None = None, **kwargs: Any) -> _T:
        return (codec or json_codec).from_json(cls, json_str, **kwargs)


def json_field(
    *,
    json_name: str | None = None,
    serializer: Callable[[Any], Any] | None = None,
    deserializer: Callable[[Any], Any] | None = None,
    **kwargs: Any,
) -> Any:
    """Create a dataclass field with custom JSON handling.

    Args:
        json_name: The name of the field in the JSON output.
        serializer: A callable applied to the value before encoding. Its result is
            encoded normally, so it may return numpy arrays.
        deserializer: A callable applied to the raw JSON value instead of the
            type-driven decoding.
        kwargs: Additional keyword arguments to pass to the field.
    """
    metadata = dict(kwargs.pop("metadata", {}))
    if json_name is not None:
        metadata[JSON_FIELD_NAME] = json_name
    if serializer is not None:
        metadata[JSON_SERIALIZER] = serializer
    if deserializer is not None:
        metadata[JSON_DESERIALIZER] = deserializer
    return field(metadata=metadata, **kwargs)


@final
class JSONOptional:
    """Special value to indicate missing fields in JSON serialization."""
    def __bool__(self):
        return False

    def __repr__(self):
        return "JSON_MISSING"


JSON_MISSING = JSONOptional()


def encode_complex(value: complex) -> List[float]:
    value = complex(value)
    return [float(value.real), float(value.imag)]


def decode_complex(raw: Any) -> complex:
    if isinstance(raw, bool):
        raise ValueError(f"expected [re, im] pair, got: {raw!r}")
    if isinstance(raw, (int, float)):
        return complex(float(raw), 0.0)
    if isinstance(raw, (list, tuple)) and len(raw) == 2:
        return complex(float(raw[0]), float(raw[1]))
    raise ValueError(f"expected [re, im] pair, got: {raw!r}")


def encode_complex_array(array: np.ndarray) -> Any:
    """Row-major nested lists of ``[re, im]`` pairs."""
    array = np.asarray(array, dtype=np.complex128)
    stacked = np.stack([array.real, array.imag], axis=-1)
    return stacked.tolist()


def decode_complex_array(raw: Any) -> np.ndarray:
    """Inverse of `encode_complex_array`; the innermost axis must hold ``[re, im]``."""
    try:
        pairs = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ValueError(f"expected nested [re, im] pairs: {e}") from e
    if pairs.ndim < 2 or pairs.shape[-1] != 2:
        raise ValueError(f"expected nested [re, im] pairs, got shape {pairs.shape}")
    return pairs[..., 0] + 1j * pairs[..., 1]


def _get_json_field_name(field_obj: Optional[Field[Any]], field_name: str) -> str:
    if (
        field_obj
        and field_obj.metadata
        and JSON_FIELD_NAME in field_obj.metadata
    ):
        return field_obj.metadata[JSON_FIELD_NAME]
    return field_name


def _encode(obj: Any) -> Any:
    if is_dataclass(obj):
        result: Dict[str, Any] = {}
        for field_ in fields(obj):
            value = getattr(obj, field_.name)
            if value is JSON_MISSING:
                continue
            json_field_name = _get_json_field_name(field_, field_.name)
            if (
                field_.metadata
                and JSON_SERIALIZER in field_.metadata
                and value is not None
            ):
                value = field_.metadata[JSON_SERIALIZER](value)
            result[json_field_name] = _encode(value)
        return result

    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return encode_complex_array(obj)
        return obj.tolist()

    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)

    if isinstance(obj, np.integer):
        return int(obj)

    if isinstance(obj, np.floating):
        return float(obj)

    if isinstance(obj, (complex, np.complexfloating)):
        return encode_complex(obj)

    if isinstance(obj, (list, tuple)):
        return [_encode(item) for item in cast(List[Any], obj)]

    if isinstance(obj, dict):
        return {key: _encode(value) for key, value in obj.items()}  # type: ignore

    return obj


def _type_hints(cls: Any) -> Dict[str, Any]:
    try:
        return get_type_hints(cls)
    except Exception:
        return {field_.name: field_.type for field_ in fields(cls)}


def _decode_dataclass(cls: Type[_T] | Any, raw: Mapping[str, Any]) -> _T:
    if not is_dataclass(cls):
        raise ValueError(f"cls is not a dataclass, found: '{cls}'")
    if not isinstance(raw, Mapping):
        raise ValueError(f"expected a JSON object for {cls.__name__}, got: {raw!r}")

    hints = _type_hints(cls)
    kwargs: Dict[str, Any] = {}
    for field_ in fields(cls):
        if not field_.init:
            continue
        json_name = _get_json_field_name(field_, field_.name)

        if json_name not in raw:
            if field_.default is not MISSING:
                kwargs[field_.name] = field_.default
            elif field_.default_factory is not MISSING:
                kwargs[field_.name] = field_.default_factory()
            else:
                raise ValueError(f"missing field {json_name!r}")
            continue

        val = raw[json_name]
        if val is None:
            kwargs[field_.name] = None
            continue

        kwargs[field_.name] = _decode_field(
            hints.get(field_.name, field_.type), val, field_obj=field_
        )

    return cast(_T, cls(**kwargs))


def _decode_field(typ: Any, val: Any, *, field_obj: Field[Any] | None = None) -> Any:

    if (
        field_obj
        and field_obj.metadata
        and JSON_DESERIALIZER in field_obj.metadata
        and val is not None
    ):
        return field_obj.metadata[JSON_DESERIALIZER](val)

    if is_dataclass(typ):
        val = _decode_dataclass(typ, val)
    elif typ is np.ndarray:
        val = decode_complex_array(val)
    elif typ is complex:
        val = decode_complex(val)
    elif typ is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ValueError(f"expected a number, got: {val!r}")
        val = float(val)
    elif typ is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ValueError(f"expected an integer, got: {val!r}")
    elif typ is bool:
        if not isinstance(val, bool):
            raise ValueError(f"expected a boolean, got: {val!r}")
    elif get_origin(typ) is tuple:
        val = tuple(
            _decode_field(get_args(typ)[i], v)
            for i, v in enumerate(val)
        )
    elif get_origin(typ) is list:
        inner = get_args(typ)[0]
        val = [_decode_field(inner, v) for v in val]
    elif typ is NoneType:
        if val is not None:
            raise ValueError(f"expected None got: {val!r}")
    elif get_origin(typ) in (Union, UnionType):
        union_decoded = False
        for union_typ in get_args(typ):
            if union_typ is JSONOptional:
                continue
            try:
                val = _decode_field(union_typ, val)
                union_decoded = True
                break
            except ValueError:
                ...
        if not union_decoded:
            raise ValueError(
                f"expected '{val!r}' to be of type '{typ!r}', got: {type(val)!r}"
            )
    elif val is None:
        raise ValueError(f"expected type {typ!r} got: None")
    return val
