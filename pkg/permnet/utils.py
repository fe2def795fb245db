"""Utility functions for permnet."""

import hashlib
import json
import re
from datetime import datetime
from typing import Any, List, Sequence

from dateutil import tz

from .exceptions import SpecParseError

_CYCLE_RE = re.compile(r"\(([^()]*)\)")


def parse_cycles(text: str, degree: int) -> List[int]:
    """Parse cycle notation into an image table.

    Args:
        text: Cycles such as ``"(0 1)(2 3)"``; commas may separate points.
            ``"()"`` or ``"e"`` is the identity.
        degree: Number of points.

    Returns:
        Image table of length ``degree`` (``images[i]`` is the image of ``i``).

    Example:
        >>> parse_cycles("(0 1 2)", 3)
        [1, 2, 0]
    """
    stripped = text.strip()
    images = list(range(degree))
    if stripped in ("", "e", "()"):
        return images

    leftover = _CYCLE_RE.sub("", stripped).strip()
    if leftover:
        raise SpecParseError(f"Invalid cycle notation: {text!r}", code="cycle_syntax")

    seen: set = set()
    for body in _CYCLE_RE.findall(stripped):
        tokens = [t for t in re.split(r"[\s,]+", body.strip()) if t]
        try:
            points = [int(t) for t in tokens]
        except ValueError as e:
            raise SpecParseError(f"Non-integer point in {text!r}", code="cycle_syntax") from e
        for p in points:
            if not 0 <= p < degree:
                raise SpecParseError(
                    f"Point {p} out of range for degree {degree}", code="cycle_range"
                )
            if p in seen:
                raise SpecParseError(
                    f"Point {p} appears in more than one cycle", code="cycle_overlap"
                )
            seen.add(p)
        for k, p in enumerate(points):
            images[p] = points[(k + 1) % len(points)]
    return images


def format_cycles(images: Sequence[int]) -> str:
    """Format an image table in cycle notation, fixed points omitted.

    Returns ``"()"`` for the identity.
    """
    visited = [False] * len(images)
    parts = []
    for start in range(len(images)):
        if visited[start] or images[start] == start:
            visited[start] = True
            continue
        cycle = []
        point = start
        while not visited[point]:
            visited[point] = True
            cycle.append(str(point))
            point = images[point]
        parts.append("(" + " ".join(cycle) + ")")
    return "".join(parts) or "()"


def stable_json_dumps(data: Any) -> str:
    """Serialize to JSON with sorted keys and a trailing newline.

    Identical inputs give byte-identical output, so exported files can be
    compared with ``==``.
    """
    return json.dumps(data, sort_keys=True, indent=2, separators=(",", ": ")) + "\n"


def content_hash(data: Any) -> str:
    """SHA-256 of the stable JSON form of ``data`` (hex, 16 chars)."""
    digest = hashlib.sha256(
        json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
    return digest[:16]


def utc_timestamp() -> str:
    """Current UTC time in ISO-8601 form, for sidecar metadata only."""
    return datetime.now(tz=tz.tzutc()).isoformat()
