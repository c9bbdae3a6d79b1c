from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Type, TypeVar, Union

from .errors import CodecError

_T = TypeVar("_T")

PathLike = Union[str, Path]


class Codec(ABC):
    """Base interface for the wire formats of states, certificates, maps and reports."""

    @abstractmethod
    def encode(self, obj: Any, **kwargs: Any) -> Any:
        """Encode a dataclass instance to the target format."""
        pass

    @abstractmethod
    def decode(self, cls: Type[_T], data: Any, **kwargs: Any) -> _T:
        """Decode data to a dataclass instance."""
        pass

    def load(self, cls: Type[_T], path: PathLike, **kwargs: Any) -> _T:
        """Decode the UTF-8 text of ``path``; an unreadable file raises `CodecError`."""
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise CodecError(f"cannot read {str(path)!r}: {e}") from e
        return self.decode(cls, text, **kwargs)

    def dump(self, obj: Any, path: PathLike, **kwargs: Any) -> None:
        """Write the encoded text of ``obj`` to ``path``; I/O errors propagate as `OSError`."""
        text = self.encode(obj, **kwargs)
        if not isinstance(text, str):
            raise CodecError(f"{type(self).__name__} does not encode to text")
        Path(path).write_text(text, encoding="utf-8")
