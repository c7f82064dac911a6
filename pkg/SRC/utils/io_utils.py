"""
File formats: CSV samples, the portable binary null table, JSON reports and plot CSV.

Null table layout (all little-endian):
    b"L1NT" | uint16 format version | uint32 header length | header JSON | N float64 draws
"""

import logging
import struct
import sys
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import orjson
import pandas as pd
from pydantic import BaseModel

from SRC.exception import RejectedInputError, TableFormatError
from SRC.pipeline.calibration import NullTable
from SRC.pipeline.partition import PairedSample
from SRC.utils.config import FORMAT_VERSION

logger = logging.getLogger(__name__)

TABLE_MAGIC = b"L1NT"
_PREAMBLE = struct.Struct("<4sHI")
HEADER_KEYS = ("statistic_id", "n", "N", "generator_id", "seed")

PathLike = Union[str, Path]


# -------------------------------------------------------------------- samples


def sample_columns(d: int, d_prime: int) -> List[str]:
    return [f"x{i}" for i in range(1, d + 1)] + [f"y{i}" for i in range(1, d_prime + 1)]


def _parse_float(text) -> float:
    # float() rounds correctly, so 17-digit output reads back bit for bit
    try:
        return float(text)
    except (TypeError, ValueError):
        return float("nan")


def read_sample_csv(path: PathLike, d: int = 1, d_prime: int = 1) -> PairedSample:
    """
    Load a paired sample: header row, then d X columns followed by d' Y columns.

    Args:
        path: CSV file.
        d (int): Number of X columns.
        d_prime (int): Number of Y columns.

    Returns:
        PairedSample: The parsed sample.
    """
    # header read as row 0: a data row wider than the header is a ParserError naming its line.
    # blank lines are dropped after parsing, so row label + 1 stays the physical line
    try:
        raw = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise RejectedInputError("no data rows") from None
    except pd.errors.ParserError as e:
        raise RejectedInputError(f"malformed CSV: {e}") from None
    except OSError as e:
        raise RejectedInputError(f"cannot read {path}: {e}") from None

    columns = raw.iloc[0].tolist()
    frame = raw.iloc[1:].dropna(how="all")
    if raw.shape[1] != d + d_prime:
        raise RejectedInputError(
            f"header has {raw.shape[1]} columns but d + d' = {d} + {d_prime} = {d + d_prime}"
        )
    if frame.empty:
        raise RejectedInputError("no data rows")

    values = frame.map(_parse_float).to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise RejectedInputError(
            f"line {frame.index[row] + 1}: non-numeric or non-finite value {frame.iat[row, col]!r} in column '{columns[col]}'"
        )
    logger.info(f"read {values.shape[0]} pairs from {path}")
    return PairedSample(values[:, :d], values[:, d:])


def write_sample_csv(sample: PairedSample, path: Optional[PathLike] = None) -> None:
    """Write a sample in the CSV sample format with 17 significant digits (stdout when path is None)."""
    frame = pd.DataFrame(np.hstack([sample.x, sample.y]), columns=sample_columns(sample.d, sample.d_prime))
    text = frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")
    _emit(text.encode("utf-8"), path)


# ----------------------------------------------------------------- null table


def write_null_table(table: NullTable, path: PathLike) -> None:
    header = orjson.dumps(
        {
            "statistic_id": table.statistic_id,
            "n": table.n,
            "N": table.N,
            "generator_id": table.generator_id,
            "seed": table.seed,
        },
        option=orjson.OPT_SORT_KEYS,
    )
    payload = table.draws.astype("<f8").tobytes()
    Path(path).write_bytes(_PREAMBLE.pack(TABLE_MAGIC, FORMAT_VERSION, len(header)) + header + payload)
    logger.info(f"wrote null table {table.statistic_id} n={table.n} N={table.N} to {path}")


def read_null_table(path: PathLike) -> NullTable:
    """Read a binary null table, validating magic, version, header and payload length."""
    raw = Path(path).read_bytes()
    if len(raw) < _PREAMBLE.size:
        raise TableFormatError(f"{path}: truncated, not a null table of format version {FORMAT_VERSION}")
    magic, version, header_len = _PREAMBLE.unpack_from(raw)
    if magic != TABLE_MAGIC or version != FORMAT_VERSION:
        raise TableFormatError(
            f"{path}: unsupported null table format version {version!r} (magic {magic!r}), expected {FORMAT_VERSION}"
        )
    header_end = _PREAMBLE.size + header_len
    try:
        header = orjson.loads(raw[_PREAMBLE.size : header_end])
    except orjson.JSONDecodeError:
        raise TableFormatError(f"{path}: corrupted header for null table format version {version}") from None
    if not isinstance(header, dict) or any(key not in header for key in HEADER_KEYS):
        raise TableFormatError(f"{path}: header misses fields for null table format version {version}")
    payload = raw[header_end:]
    if len(payload) != 8 * int(header["N"]):
        raise TableFormatError(f"{path}: header declares N={header['N']} draws, file holds {len(payload) / 8:g}")
    return NullTable(
        statistic_id=header["statistic_id"],
        n=int(header["n"]),
        draws=np.frombuffer(payload, dtype="<f8").astype(np.float64),
        generator_id=header["generator_id"],
        seed=int(header["seed"]),
    )


def export_null_table_csv(table: NullTable, path: Optional[PathLike] = None) -> None:
    frame = pd.DataFrame({"draw": table.draws})
    _emit(frame.to_csv(index=False, float_format="%.17g", lineterminator="\n").encode("utf-8"), path)


def null_table_filename(statistic_id: str, n: int) -> str:
    return f"{statistic_id}_n{n}.nt"


# -------------------------------------------------------------------- reports


def dumps_json(document: Union[BaseModel, List[BaseModel], Dict]) -> bytes:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline; NaN becomes null."""
    if isinstance(document, BaseModel):
        document = document.model_dump(mode="json")
    elif isinstance(document, list):
        document = [d.model_dump(mode="json") if isinstance(d, BaseModel) else d for d in document]
    return orjson.dumps(document, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_APPEND_NEWLINE)


def write_json(document, path: Optional[PathLike] = None) -> None:
    _emit(dumps_json(document), path)


def read_json(path: PathLike):
    try:
        return orjson.loads(Path(path).read_bytes())
    except orjson.JSONDecodeError as e:
        raise RejectedInputError(f"{path}: not a JSON report ({e})") from None


def write_rows_csv(rows: List[Dict], path: Optional[PathLike] = None) -> None:
    frame = pd.DataFrame(rows)
    _emit(frame.to_csv(index=False, float_format="%.17g", lineterminator="\n").encode("utf-8"), path)


def _emit(data: bytes, path: Optional[PathLike]) -> None:
    if path is None or str(path) == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(path).write_bytes(data)
