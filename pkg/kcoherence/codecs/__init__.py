from .json import JSONCodec, json_codec, JSONSerializable, JSONDeserializable
from .csv import CSVCodec, csv_codec

__all__ = ['JSONCodec', 'json_codec', 'JSONSerializable', 'JSONDeserializable', 'CSVCodec', 'csv_codec']
