import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import aiofiles
import numpy as np

from .exceptions import ValidationError
from .interfaces import TrainTrace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArtifactEntry:
    name: str
    size: int
    sha256: str

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "size": self.size, "sha256": self.sha256}


def format_float(value: Optional[float]) -> str:
    """17 significant digits, '.' decimal, empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    return format(float(value), ".17g")


def trace_csv(trace: TrainTrace) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(trace.columns)
    for record in trace.records:
        row = record.to_dict()
        writer.writerow(
            [str(row["iter"])] + [format_float(row[column]) for column in trace.columns[1:]]
        )
    return buffer.getvalue()


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    return value


def to_json(document: Any) -> str:
    return json.dumps(_json_safe(document), sort_keys=True, indent=2, allow_nan=False) + "\n"


class ArtifactWriter:
    """Writes run outputs into one directory and keeps a listing with checksums."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self._entries: Dict[str, ArtifactEntry] = {}

    @property
    def entries(self) -> List[ArtifactEntry]:
        return [self._entries[name] for name in sorted(self._entries)]

    def _target(self, name: str) -> Path:
        target = (self.out_dir / name).resolve()
        if target.parent != self.out_dir.resolve():
            raise ValidationError(f"artifact name {name!r} escapes the output directory")
        return target

    async def write_text(self, name: str, text: str) -> ArtifactEntry:
        """Atomic write: a temporary sibling file is written, then moved into place."""
        target = self._target(name)
        temp_path = target.with_suffix(target.suffix + ".tmp")
        self.out_dir.mkdir(parents=True, exist_ok=True)
        payload = text.encode("utf-8")

        try:
            async with aiofiles.open(temp_path, mode="wb") as f:
                await f.write(payload)
            temp_path.replace(target)
        except Exception as e:
            logger.error(f"Error writing artifact {name}: {e}")
            raise
        finally:
            if temp_path.exists():
                try:
                    temp_path.unlink()
                except Exception as e:
                    logger.warning(f"Could not remove temporary file {temp_path}: {e}")

        entry = ArtifactEntry(name=name, size=len(payload), sha256=hashlib.sha256(payload).hexdigest())
        self._entries[name] = entry
        logger.debug("Wrote %s (%d bytes)", name, entry.size)
        return entry

    async def write_json(self, name: str, document: Any) -> ArtifactEntry:
        return await self.write_text(name, to_json(document))

    async def write_trace(self, trace: TrainTrace, stem: str = "trace") -> Sequence[ArtifactEntry]:
        csv_entry = await self.write_text(f"{stem}.csv", trace_csv(trace))
        json_entry = await self.write_json(f"{stem}.json", trace.to_dict())
        return csv_entry, json_entry

    def listing(self, exclude: Iterable[str] = ()) -> List[Dict[str, Any]]:
        skip = set(exclude)
        return [e.to_dict() for e in self.entries if e.name not in skip]
