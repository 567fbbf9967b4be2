"""
Harness - CSV and JSON Artifacts
Every CSV starts with '#' comment lines (tool version, seed, notes), then a
header row.
"""

import csv
import json
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

TOOL_NAME = "hadaptive"
TOOL_VERSION = "1.0.0"

PathLike = Union[str, Path]


def comment_lines(seed: Optional[int], notes: Sequence[str] = ()) -> List[str]:
    head = f"# {TOOL_NAME} {TOOL_VERSION}"
    if seed is not None:
        head += f" seed={seed}"
    return [head] + [f"# {note}" for note in notes]


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]],
              seed: Optional[int] = None, notes: Sequence[str] = ()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in comment_lines(seed, notes):
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def read_csv(path: PathLike) -> Tuple[List[str], List[str], List[List[str]]]:
    """(comment lines, header, rows) of a file written by write_csv."""
    comments, data = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                comments.append(line.rstrip("\n"))
            else:
                data.append(line)
    rows = list(csv.reader(data))
    if not rows:
        return comments, [], []
    return comments, rows[0], rows[1:]


def write_json(path: PathLike, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path
