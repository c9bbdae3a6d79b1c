"""
Tests for the codec layer: the Codec interface, JSONCodec, the mixins and CSVCodec.
"""

import io
import os
import tempfile
import unittest
from dataclasses import dataclass
from typing import Any, List, Optional, Type, TypeVar, Union

import numpy as np
import numpy.testing as npt

from kcoherence import Codec, JSONCodec, JSONSerializable, JSONDeserializable, json_field, JSON_MISSING
from kcoherence.codecs.csv import CSVCodec
from kcoherence.codecs.json import JSONOptional, decode_complex_array, encode_complex_array
from kcoherence.errors import CodecError

_T = TypeVar("_T")


@dataclass
class Level:
    name: str
    k: int


@dataclass
class Tagged:
    level: Level
    active: bool


@dataclass
class WithDefaults:
    name: str
    k: int = 1
    note: str = ""


@dataclass
class Renamed:
    source_seed: int = json_field(json_name="source")
    target_seed: int = json_field(json_name="target")


@dataclass
class Scaled:
    name: str
    value: float = json_field(serializer=lambda v: v * 2, deserializer=lambda v: v / 2)


@dataclass(eq=False)
class Amplitudes:
    coeffs: np.ndarray
    weight: complex = 1j


@dataclass
class WithOptional:
    name: str
    k: Optional[int] = None


@dataclass
class WithList:
    name: str
    levels: List[int]


@dataclass
class Row:
    dim: int
    p_max: float
    feasible: bool
    label: str


class PassThroughCodec(Codec):

    def encode(self, obj: Any, **kwargs: Any) -> Any:
        return obj

    def decode(self, cls: Type[_T], data: Any, **kwargs: Any) -> _T:
        return cls(**data)


class TestCodecInterface(unittest.TestCase):

    def test_codec_is_abstract(self):
        with self.assertRaises(TypeError):
            Codec()

    def test_codec_implementation(self):
        codec = PassThroughCodec()
        self.assertEqual(codec.encode("state"), "state")
        instance = codec.decode(Level, {"name": "I_2", "k": 2}, extra_param="value")
        self.assertEqual(instance, Level("I_2", 2))

    def test_load_and_dump(self):
        codec = JSONCodec()
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "level.json")
            codec.dump(Level("I_2", 2), path)
            self.assertEqual(codec.load(Level, path), Level("I_2", 2))
            with self.assertRaises(CodecError):
                codec.load(Level, os.path.join(tmp, "missing.json"))

    def test_dump_requires_text(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(CodecError):
                CSVCodec().dump(Row(3, 0.5, True, "a"), os.path.join(tmp, "row.csv"))


class TestJSONCodec(unittest.TestCase):

    def setUp(self):
        self.codec = JSONCodec()

    def test_simple_round_trip(self):
        obj = Level("I_2", 2)
        self.assertEqual(self.codec.to_dict(obj), {"name": "I_2", "k": 2})
        self.assertEqual(self.codec.from_dict(Level, {"name": "I_2", "k": 2}), obj)

    def test_nested(self):
        obj = Tagged(Level("I_3", 3), True)
        data = {"level": {"name": "I_3", "k": 3}, "active": True}
        self.assertEqual(self.codec.to_dict(obj), data)
        self.assertEqual(self.codec.from_dict(Tagged, data), obj)

    def test_defaults_decoding(self):
        self.assertEqual(self.codec.from_dict(WithDefaults, {"name": "x"}), WithDefaults("x", 1, ""))

    def test_custom_field_names(self):
        obj = Renamed(3, 4)
        self.assertEqual(self.codec.to_dict(obj), {"source": 3, "target": 4})
        self.assertEqual(self.codec.from_dict(Renamed, {"source": 3, "target": 4}), obj)

    def test_custom_serializers(self):
        self.assertEqual(self.codec.to_dict(Scaled("x", 1.5)), {"name": "x", "value": 3.0})
        self.assertEqual(self.codec.from_dict(Scaled, {"name": "x", "value": 3.0}), Scaled("x", 1.5))

    def test_complex_array_encoding(self):
        obj = Amplitudes(np.array([0.6, 0.8j]), 0.5 - 0.25j)
        self.assertEqual(
            self.codec.to_dict(obj),
            {"coeffs": [[0.6, 0.0], [0.0, 0.8]], "weight": [0.5, -0.25]},
        )

    def test_complex_array_decoding(self):
        decoded = self.codec.from_dict(Amplitudes, {"coeffs": [[0.6, 0.0], [0.0, 0.8]], "weight": [0.0, 1.0]})
        npt.assert_array_equal(decoded.coeffs, np.array([0.6, 0.8j]))
        self.assertEqual(decoded.weight, 1j)

    def test_complex_matrix_layout_is_row_major(self):
        matrix = np.array([[1, 2j], [3, 4]])
        encoded = encode_complex_array(matrix)
        self.assertEqual(encoded[0][1], [0.0, 2.0])
        self.assertEqual(encoded[1][0], [3.0, 0.0])
        npt.assert_array_equal(decode_complex_array(encoded), matrix)

    def test_complex_array_rejects_bad_pairs(self):
        with self.assertRaises(CodecError):
            self.codec.from_dict(Amplitudes, {"coeffs": [[0.6, 0.0, 1.0]]})
        with self.assertRaises(CodecError):
            self.codec.from_dict(Amplitudes, {"coeffs": "0.6"})

    def test_optional_fields(self):
        self.assertEqual(self.codec.to_dict(WithOptional("x")), {"name": "x", "k": None})
        self.assertEqual(self.codec.from_dict(WithOptional, {"name": "x", "k": None}), WithOptional("x"))
        self.assertEqual(self.codec.from_dict(WithOptional, {"name": "x", "k": 2}), WithOptional("x", 2))

    def test_list_fields(self):
        obj = WithList("x", [1, 2, 3])
        self.assertEqual(self.codec.from_dict(WithList, self.codec.to_dict(obj)), obj)

    def test_number_types_are_checked(self):
        with self.assertRaises(CodecError):
            self.codec.from_dict(Level, {"name": "x", "k": "2"})
        with self.assertRaises(CodecError):
            self.codec.from_dict(Level, {"name": "x", "k": True})
        with self.assertRaises(CodecError):
            self.codec.from_dict(Row, {"dim": 3, "p_max": "1", "feasible": True, "label": ""})

    def test_float_accepts_integers(self):
        decoded = self.codec.from_dict(Row, {"dim": 3, "p_max": 1, "feasible": True, "label": ""})
        self.assertIsInstance(decoded.p_max, float)

    def test_to_json(self):
        self.assertEqual(self.codec.to_json(Level("I_2", 2)), '{"name": "I_2", "k": 2}')

    def test_sort_keys(self):
        self.assertEqual(JSONCodec(sort_keys=True).to_json(Level("I_2", 2)), '{"k": 2, "name": "I_2"}')

    def test_from_json(self):
        self.assertEqual(self.codec.from_json(Level, '{"name": "I_2", "k": 2}'), Level("I_2", 2))

    def test_malformed_json(self):
        with self.assertRaises(CodecError):
            self.codec.from_json(Level, '{"name": ')

    def test_non_object_json(self):
        with self.assertRaises(CodecError) as context:
            self.codec.from_json(Level, '[1, 2]')
        self.assertIn("expected a JSON object", str(context.exception))

    def test_missing_required_field(self):
        with self.assertRaises(CodecError) as context:
            self.codec.from_dict(Level, {"name": "x"})
        self.assertIn("missing field", str(context.exception))

    def test_invalid_dataclass(self):
        with self.assertRaises(CodecError) as context:
            self.codec.from_dict(str, {"test": "value"})
        self.assertIn("not a dataclass", str(context.exception))
        with self.assertRaises(CodecError):
            self.codec.to_dict("not a dataclass")

    def test_json_missing_handling(self):
        @dataclass
        class WithMissing:
            name: str
            extra: Union[int, JSONOptional] = JSON_MISSING

        self.assertEqual(self.codec.to_dict(WithMissing("x")), {"name": "x"})
        self.assertIs(self.codec.from_dict(WithMissing, {"name": "x"}).extra, JSON_MISSING)
        self.assertEqual(self.codec.from_dict(WithMissing, {"name": "x", "extra": 4}).extra, 4)

    def test_validation_errors_are_chained(self):
        @dataclass
        class Positive:
            value: int

            def __post_init__(self):
                if self.value <= 0:
                    raise ValueError("value must be positive")

        with self.assertRaises(CodecError) as context:
            self.codec.from_dict(Positive, {"value": -1})
        self.assertIsInstance(context.exception.__cause__, ValueError)


@dataclass
class SerializableLevel(JSONSerializable, JSONDeserializable):
    name: str
    k: int


class PrefixCodec(JSONCodec):
    """Adds a 'test_' prefix to string values."""

    def to_dict(self, obj: Any, **kwargs: Any) -> Any:
        result = super().to_dict(obj, **kwargs)
        return {k: f"test_{v}" if isinstance(v, str) else v for k, v in result.items()}

    def from_dict(self, cls: Type[_T], data: Any, **kwargs: Any) -> _T:
        data = {k: v[5:] if isinstance(v, str) and v.startswith("test_") else v for k, v in data.items()}
        return super().from_dict(cls, data, **kwargs)


class TestMixins(unittest.TestCase):

    def test_default_codec(self):
        obj = SerializableLevel("I_2", 2)
        self.assertEqual(obj.to_dict(), {"name": "I_2", "k": 2})
        self.assertEqual(SerializableLevel.from_json(obj.to_json()), obj)

    def test_custom_codec(self):
        codec = PrefixCodec()
        obj = SerializableLevel("I_2", 2)
        self.assertEqual(obj.to_dict(codec=codec), {"name": "test_I_2", "k": 2})
        self.assertEqual(SerializableLevel.from_dict({"name": "test_I_2", "k": 2}, codec=codec), obj)


class TestCSVCodec(unittest.TestCase):

    def setUp(self):
        self.codec = CSVCodec()

    def test_header(self):
        self.assertEqual(self.codec.header(Row), ["dim", "p_max", "feasible", "label"])

    def test_encode(self):
        self.assertEqual(self.codec.encode(Row(3, 0.25, True, "a")), ["3", "0.25", "true", "a"])

    def test_encode_numpy_scalars(self):
        row = Row(np.int64(3), np.float64(1 / 3), np.bool_(False), "b")
        self.assertEqual(self.codec.encode(row), ["3", repr(1 / 3), "false", "b"])

    def test_decode(self):
        self.assertEqual(self.codec.decode(Row, ["3", "0.25", "false", "a"]), Row(3, 0.25, False, "a"))

    def test_decode_errors(self):
        with self.assertRaises(CodecError):
            self.codec.decode(Row, ["3", "0.25", "yes", "a"])
        with self.assertRaises(CodecError):
            self.codec.decode(Row, ["3", "0.25"])

    def test_write(self):
        stream = io.StringIO()
        self.codec.write(Row, [Row(3, 0.5, True, "a"), Row(4, 1.0, False, "b,c")], stream)
        self.assertEqual(
            stream.getvalue(),
            'dim,p_max,feasible,label\r\n3,0.5,true,a\r\n4,1.0,false,"b,c"\r\n',
        )


if __name__ == "__main__":
    unittest.main()
