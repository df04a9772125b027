import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
from scipy.stats import spearmanr

from graphmarket.utils.errors import DataIOError, GraphFormatError, ShapeError

PathLike = Union[str, Path]

RANK_TOLERANCE = 1e-9


def rank_values(values: Sequence[float], descending: bool = False, tol: float = RANK_TOLERANCE) -> List[float]:
    """1-based ranks, best first. Values within `tol` of their sorted neighbour share the mean rank."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ShapeError(f"expected a non-empty vector, got shape {values.shape}")
    keyed = -values if descending else values
    order = np.argsort(keyed, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    start = 0
    while start < order.size:
        stop = start + 1
        while stop < order.size and keyed[order[stop]] - keyed[order[stop - 1]] <= tol:
            stop += 1
        # positions start..stop-1 hold ranks start+1..stop
        ranks[order[start:stop]] = (start + 1 + stop) / 2.0
        start = stop
    return ranks.tolist()


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    """Spearman correlation of two rank vectors; 1.0 if identical, 0.0 if one is constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ShapeError(f"need two equal-length vectors of at least 2 entries, got {a.shape} and {b.shape}")
    if np.array_equal(a, b):
        return 1.0
    if np.all(a == a[0]) or np.all(b == b[0]):
        return 0.0
    return float(spearmanr(a, b).correlation)


def write_ndjson(records: Iterable[str], path: PathLike) -> Path:
    """Write pre-serialized JSON lines in order."""
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for record in records:
                f.write(record)
                f.write("\n")
    except OSError as err:
        raise DataIOError(f"cannot write ({err.strerror})", path=str(path))
    return path


def read_ndjson(path: PathLike) -> List[Dict[str, Any]]:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    except FileNotFoundError:
        raise DataIOError("file not found", path=str(path))
    except OSError as err:
        raise DataIOError(f"cannot read ({err.strerror})", path=str(path))

    records = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as err:
            raise GraphFormatError(f"invalid JSON ({err.msg})", path=str(path), line=number)
        if not isinstance(record, dict):
            raise GraphFormatError("expected a JSON object", path=str(path), line=number)
        records.append(record)
    return records


def dump_json(obj: Any) -> str:
    """Deterministic JSON text for reports."""
    return json.dumps(obj, indent=2, sort_keys=True)


def write_json(obj: Any, path: PathLike) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(dump_json(obj))
            f.write("\n")
    except OSError as err:
        raise DataIOError(f"cannot write ({err.strerror})", path=str(path))
    return path


def write_text(text: str, path: PathLike) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
            f.write("\n")
    except OSError as err:
        raise DataIOError(f"cannot write ({err.strerror})", path=str(path))
    return path


def read_json(path: PathLike) -> Any:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise DataIOError("file not found", path=str(path))
    except json.JSONDecodeError as err:
        raise GraphFormatError(f"invalid JSON ({err.msg})", path=str(path), line=err.lineno)
    except OSError as err:
        raise DataIOError(f"cannot read ({err.strerror})", path=str(path))


def matrix_csv_rows(names: Sequence[str], matrix: np.ndarray) -> List[List[str]]:
    """Header row of names, then one row per name led by that name."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (len(names), len(names)):
        raise ShapeError(f"matrix shape {matrix.shape} does not match {len(names)} names")
    rows = [[""] + list(names)]
    for name, row in zip(names, matrix):
        rows.append([name] + [repr(float(value)) for value in row])
    return rows


def write_csv(rows: Sequence[Sequence[Any]], path: PathLike) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            csv.writer(f, lineterminator="\n").writerows(rows)
    except OSError as err:
        raise DataIOError(f"cannot write ({err.strerror})", path=str(path))
    return path


def read_matrix_csv(path: PathLike) -> Tuple[List[str], np.ndarray]:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = [row for row in csv.reader(f) if row]
    except FileNotFoundError:
        raise DataIOError("file not found", path=str(path))
    except OSError as err:
        raise DataIOError(f"cannot read ({err.strerror})", path=str(path))

    if not rows:
        raise GraphFormatError("empty matrix file", path=str(path))
    names = rows[0][1:]
    if len(rows) - 1 != len(names):
        raise GraphFormatError(f"expected {len(names)} rows, found {len(rows) - 1}", path=str(path))
    matrix = np.zeros((len(names), len(names)))
    for i, row in enumerate(rows[1:]):
        if row[0] != names[i] or len(row) != len(names) + 1:
            raise GraphFormatError("row does not match the header", path=str(path), line=i + 2)
        try:
            matrix[i] = [float(value) for value in row[1:]]
        except ValueError:
            raise GraphFormatError("non-numeric entry", path=str(path), line=i + 2)
    return names, matrix
