# -*- coding: utf-8 -*-
"""
存储模块
二进制快照文件（NLSA 格式）的读写，以及实验报告的 CSV 输出

快照格式（小端）：
    magic "NLSA" (4 字节) | 版本 u32 | n_points u32 | length f64 | t f64 | n_points 组 (实部, 虚部) f64
    文件大小恰为 28 + 16·n_points 字节
"""

import logging
import os
import struct
from typing import Any, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .spectral_core import ComplexField, Grid

logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b"NLSA"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIdd")
HEADER_SIZE = _HEADER.size
CSV_FLOAT_FORMAT = "%.17g"


class SnapshotFormatError(ValueError):
    """快照文件格式错误"""


def write_snapshot(field: ComplexField, t: float, path: Union[str, os.PathLike]) -> None:
    header = _HEADER.pack(
        SNAPSHOT_MAGIC, SNAPSHOT_VERSION, field.grid.n_points, field.grid.length, float(t)
    )
    payload = np.ascontiguousarray(field.values, dtype="<c16").tobytes()
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(payload)
    logger.debug(f"快照已写入: {path} (n={field.grid.n_points}, t={t})")


def read_snapshot(path: Union[str, os.PathLike]) -> Tuple[ComplexField, float]:
    with open(path, "rb") as handle:
        raw = handle.read()
    if len(raw) < HEADER_SIZE:
        raise SnapshotFormatError(f"truncated snapshot {path}: {len(raw)} bytes")
    magic, version, n_points, length, t = _HEADER.unpack_from(raw, 0)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotFormatError("not a NLSA snapshot")
    if version != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version} (expected {SNAPSHOT_VERSION})")
    expected = HEADER_SIZE + 16 * n_points
    if len(raw) != expected:
        raise SnapshotFormatError(f"truncated snapshot {path}: {len(raw)} bytes, expected {expected}")
    values = np.frombuffer(raw, dtype="<c16", offset=HEADER_SIZE, count=n_points).astype(np.complex128)
    grid = Grid(n_points=n_points, length=length)
    return ComplexField(grid=grid, values=values), float(t)


Rows = Union[pd.DataFrame, Sequence[Mapping[str, Any]]]


def to_frame(rows: Rows, columns: Optional[List[str]] = None) -> pd.DataFrame:
    """把报告记录转成 DataFrame；空记录也保留列名"""
    if isinstance(rows, pd.DataFrame):
        return rows if columns is None else rows.reindex(columns=columns)
    records = [dict(row) for row in rows]
    return pd.DataFrame.from_records(records, columns=columns)


def emit_csv(rows: Rows, path: Union[str, os.PathLike], columns: Optional[List[str]] = None) -> None:
    """
    输出 CSV：一行表头，浮点数 17 位有效数字（可精确回读）

    Raises:
        OSError: 路径不可写
    """
    frame = to_frame(rows, columns)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"CSV 已写入: {path} ({len(frame)} 行)")


def read_csv(path: Union[str, os.PathLike]) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def format_number(value: Any) -> str:
    """摘要行与 CSV 使用同一格式"""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return CSV_FLOAT_FORMAT % value
    return str(value)


def summary_rows(summary: Mapping[str, Any]) -> List[dict]:
    return [{"key": key, "value": format_number(value)} for key, value in summary.items()]


def flatten_matrix(matrix: np.ndarray, value_name: str = "dist") -> Iterable[dict]:
    """距离矩阵展开成 (i, j, dist) 记录"""
    n_rows, n_cols = matrix.shape
    return [
        {"i": i, "j": j, value_name: float(matrix[i, j])}
        for i in range(n_rows)
        for j in range(n_cols)
    ]
