from .files import (
    CsvParseError,
    EmptyInputError,
    ModelFormatError,
    decode_model,
    encode_model,
    format_matrix,
    load_matrix,
    load_model,
    save_matrix,
    save_model,
)
from .idx import (
    IdxDimensionError,
    IdxError,
    IdxMagicError,
    IdxTruncatedError,
    encode_idx,
    parse_idx,
    read_idx,
    write_idx,
)
from .mnist import ImageSet, TiledModalities, load_images, pool, tile

__all__ = [
    "CsvParseError",
    "EmptyInputError",
    "ModelFormatError",
    "decode_model",
    "encode_model",
    "format_matrix",
    "load_matrix",
    "load_model",
    "save_matrix",
    "save_model",
    "IdxDimensionError",
    "IdxError",
    "IdxMagicError",
    "IdxTruncatedError",
    "encode_idx",
    "parse_idx",
    "read_idx",
    "write_idx",
    "ImageSet",
    "TiledModalities",
    "load_images",
    "pool",
    "tile",
]
