import json
import math
from pathlib import Path
from typing import Any, List, Mapping

import numpy as np

from ..enums import OutputFormat
from ..errors import InvalidConfigError
from ..interfaces import ILogger, IResultWriter


def _sanitize(value: Any) -> Any:
    """JSON-safe copy: numpy scalars and arrays unwrapped, non-finite floats as null."""
    if isinstance(value, Mapping):
        return {str(k): _sanitize(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return [_sanitize(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class ResultWriter(IResultWriter):
    """Writes tables and metadata under one output directory.

    Tables go to CSV (comma separated, header row, UTF-8, LF) or to JSON
    column maps depending on ``fmt``; metadata is always JSON. Every file is
    written to a temporary sibling first and renamed into place.
    """

    def __init__(self, out_dir: Path, fmt: OutputFormat, logger: ILogger):
        self._out_dir = Path(out_dir)
        self._fmt = fmt
        self._logger = logger
        self._written: List[Path] = []

    @property
    def out_dir(self) -> Path:
        return self._out_dir

    @property
    def written(self) -> List[Path]:
        return list(self._written)

    def _target(self, name: str, suffix: str) -> Path:
        if not name or "/" in name or "\\" in name:
            raise InvalidConfigError(f"invalid output name {name!r}")
        self._out_dir.mkdir(parents=True, exist_ok=True)
        return self._out_dir / f"{name}{suffix}"

    def _commit(self, tmp: Path, path: Path) -> Path:
        tmp.replace(path)
        if path not in self._written:
            self._written.append(path)
        self._logger.info(f"Wrote {path}")
        return path

    def write_table(self, name: str, columns: Mapping[str, Any]) -> Path:
        if not columns:
            raise InvalidConfigError(f"table {name!r} has no columns")
        arrays = [np.asarray(v, dtype=float).ravel() for v in columns.values()]
        lengths = {a.size for a in arrays}
        if len(lengths) != 1:
            raise InvalidConfigError(f"table {name!r} has columns of unequal length {sorted(lengths)}")

        if self._fmt is OutputFormat.JSON:
            return self.write_json(name, {key: arr for key, arr in zip(columns, arrays)})

        path = self._target(name, ".csv")
        tmp = path.with_suffix(".csv.tmp")
        np.savetxt(
            tmp, np.column_stack(arrays), delimiter=",", header=",".join(columns), comments="",
            fmt="%.17g", encoding="utf-8",
        )
        return self._commit(tmp, path)

    def write_json(self, name: str, payload: Mapping[str, Any]) -> Path:
        path = self._target(name, ".json")
        tmp = path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8", newline="\n") as f:
            json.dump(_sanitize(payload), f, indent=2, allow_nan=False)
            f.write("\n")
        return self._commit(tmp, path)

    def write_text(self, filename: str, text: str) -> Path:
        path = self._target(Path(filename).stem, Path(filename).suffix)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        return self._commit(tmp, path)
