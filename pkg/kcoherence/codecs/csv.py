"""
CSV codec for flat dataclasses (every field a bool, int, float or str).
"""

import csv
from dataclasses import fields, is_dataclass
from typing import Any, Iterable, List, Sequence, TextIO, Type, TypeVar, cast, get_type_hints

import numpy as np

from ..core import Codec
from ..errors import CodecError

_T = TypeVar("_T")


class CSVCodec(Codec):
    """Rows of string cells, one column per dataclass field.

    Floats use `repr` so that identical inputs give byte-identical files.
    """

    def header(self, cls: Type[Any]) -> List[str]:
        if not is_dataclass(cls):
            raise CodecError(f"cls is not a dataclass, found: '{cls}'")
        return [field_.name for field_ in fields(cls)]

    def encode(self, obj: Any, **_: Any) -> List[str]:
        if not is_dataclass(obj):
            raise CodecError(f"obj is not a dataclass, found: '{obj}'")
        return [_encode_cell(getattr(obj, field_.name)) for field_ in fields(obj)]

    def decode(self, cls: Type[_T], data: Sequence[str], **_: Any) -> _T:
        if not is_dataclass(cls):
            raise CodecError(f"cls is not a dataclass, found: '{cls}'")
        hints = get_type_hints(cls)
        names = [field_.name for field_ in fields(cls)]
        if len(data) != len(names):
            raise CodecError(f"expected {len(names)} cells, got {len(data)}")
        try:
            kwargs = {name: _decode_cell(hints[name], cell) for name, cell in zip(names, data)}
            return cast(_T, cls(**kwargs))
        except Exception as e:
            raise CodecError(f"Error decoding row: {e}") from e

    def write(self, cls: Type[Any], rows: Iterable[Any], stream: TextIO) -> None:
        """Write the header and one line per row, CRLF-terminated."""
        writer = csv.writer(stream, lineterminator="\r\n")
        writer.writerow(self.header(cls))
        for row in rows:
            writer.writerow(self.encode(row))


csv_codec = CSVCodec()


def _encode_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, str):
        return value
    raise ValueError(f"unsupported CSV cell value: {value!r}")


def _decode_cell(typ: Any, cell: str) -> Any:
    if typ is bool:
        if cell not in ("true", "false"):
            raise ValueError(f"expected true/false, got: {cell!r}")
        return cell == "true"
    if typ is int:
        return int(cell)
    if typ is float:
        return float(cell)
    if typ is str:
        return cell
    raise ValueError(f"unsupported CSV column type: {typ!r}")
