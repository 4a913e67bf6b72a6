"""
Timetag text files: one `port time_ps` row per tag, integer picoseconds.

Header comments record the clock resolution and session id:

    # clock_resolution_ps 1
    # session_id pass-0001
    # port time_ps
    H 1000000
"""

import logging
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from core.domain import Origin, Port, TagBatch
from core.errors import ParseError

logger = logging.getLogger(__name__)

PS = 1e-12
PORT_BY_NAME = {p.name: p for p in Port}


def write_timetags(
    path: Union[str, Path],
    tags: TagBatch,
    resolution_s: float = PS,
    session_id: str = "",
) -> Path:
    """Write tags in the shared timetag format."""
    target = Path(path)
    names = np.array([p.name for p in Port])
    time_ps = np.round(tags.times / PS).astype(np.int64)
    resolution_ps = int(round(resolution_s / PS))
    with open(target, "w") as f:
        f.write(f"# clock_resolution_ps {resolution_ps}\n")
        f.write(f"# session_id {session_id or 'none'}\n")
        f.write("# port time_ps\n")
        for name, t in zip(names[tags.ports], time_ps):
            f.write(f"{name} {t}\n")
    logger.debug(f"Wrote {len(tags)} timetags to {target}")
    return target


def read_timetags(path: Union[str, Path]) -> Tuple[TagBatch, Dict[str, str]]:
    """
    Read a timetag file.

    Returns:
        (tags sorted by time, header fields)

    Raises:
        ParseError: Bad port name or time, naming line and column
    """
    source = Path(path)
    header: Dict[str, str] = {}
    ports = []
    times = []
    with open(source) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                parts = stripped[1:].split(None, 1)
                if len(parts) == 2 and parts[0] not in ("port",):
                    header[parts[0]] = parts[1].strip()
                continue
            fields = stripped.split()
            indent = len(line) - len(line.lstrip())
            if len(fields) != 2:
                raise ParseError(
                    f"expected 'port time_ps', got {len(fields)} fields",
                    str(source),
                    lineno,
                    indent + 1,
                )
            name, value = fields
            port = PORT_BY_NAME.get(name)
            if port is None:
                raise ParseError(f"unknown port {name!r}", str(source), lineno, indent + 1)
            try:
                t = int(value)
            except ValueError:
                column = line.index(value, indent + len(name)) + 1
                raise ParseError(f"bad time {value!r}", str(source), lineno, column) from None
            ports.append(port.value)
            times.append(t * PS)

    tags = TagBatch.merge(
        [
            TagBatch(
                np.array(ports, dtype=np.int8),
                np.array(times, dtype=float),
                np.full(len(ports), Origin.SIGNAL.value, dtype=np.int8),
            )
        ]
    )
    logger.info(f"Read {len(tags)} timetags from {source}")
    return tags, header
