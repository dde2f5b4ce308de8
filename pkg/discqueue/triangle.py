"""
triangle.py
Lower-triangular coefficient tables indexed by (series order i, state k) and
their on-disk JSON cache.
"""
import hashlib
import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

from .errors import ParameterDomainError, TriangleCacheError, TriangleIndexError
from .model import format_rational, parse_rational

logger = logging.getLogger(__name__)

Number = Union[int, Fraction]


class TriangleKind(Enum):
    """Family of coefficients stored in a triangle."""
    L = "L"
    M = "M"


@dataclass(frozen=True)
class CoefficientTriangle:
    """
    Exact coefficients entries(i, k) for 0 <= k <= i <= depth, stored row-major.

    Lookups outside the triangle (k > i, k < 0) return 0, matching the zero
    boundary conventions of the recursions; rows beyond the depth raise.
    """

    kind: TriangleKind
    rows: Tuple[Tuple[Number, ...], ...]
    alpha_sq: Optional[Fraction] = None

    @property
    def depth(self) -> int:
        return len(self.rows) - 1

    @property
    def b(self) -> Tuple[Fraction, ...]:
        """b_k = 1/(k+1) + k·α² for k = 0..depth+1 (L triangles only)."""
        if self.kind is not TriangleKind.L or self.alpha_sq is None:
            raise TriangleIndexError("b_k is only defined for L triangles")
        return tuple(Fraction(1, k + 1) + k * self.alpha_sq for k in range(self.depth + 2))

    def entry(self, i: int, k: int) -> Number:
        if i < 0 or i > self.depth:
            raise TriangleIndexError(f"row {i} outside triangle of depth {self.depth}")
        if k < 0 or k > i:
            return 0
        return self.rows[i][k]

    def row(self, i: int) -> Tuple[Number, ...]:
        if i < 0 or i > self.depth:
            raise TriangleIndexError(f"row {i} outside triangle of depth {self.depth}")
        return self.rows[i]

    def column(self, k: int) -> List[Number]:
        """Entries (i, k) for i = k..depth."""
        if k < 0 or k > self.depth:
            raise TriangleIndexError(f"column {k} outside triangle of depth {self.depth}")
        return [self.rows[i][k] for i in range(k, self.depth + 1)]

    def truncated(self, depth: int) -> 'CoefficientTriangle':
        if depth > self.depth:
            raise TriangleIndexError(f"cannot truncate depth {self.depth} to {depth}")
        return CoefficientTriangle(self.kind, self.rows[:depth + 1], self.alpha_sq)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind.value}
        if self.alpha_sq is not None:
            data["alpha_sq"] = format_rational(self.alpha_sq)
        data["depth"] = self.depth
        data["rows"] = [[format_rational(Fraction(v)) for v in row] for row in self.rows]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CoefficientTriangle':
        """Rebuild a triangle and revalidate its shape, diagonal and sign invariants."""
        try:
            kind = TriangleKind(data.get("kind", "L"))
            alpha_sq = parse_rational(data["alpha_sq"], "alpha_sq") if "alpha_sq" in data else None
            raw_rows = data["rows"]
            depth = int(data["depth"])
        except (KeyError, TypeError, ValueError, ParameterDomainError) as e:
            raise TriangleCacheError(f"malformed triangle record: {e}") from None

        if len(raw_rows) != depth + 1:
            raise TriangleCacheError(f"expected {depth + 1} rows, found {len(raw_rows)}")

        rows = []
        for i, raw in enumerate(raw_rows):
            if len(raw) != i + 1:
                raise TriangleCacheError(f"row {i} has {len(raw)} entries, expected {i + 1}")
            try:
                values = [parse_rational(v, f"rows[{i}]") for v in raw]
            except ParameterDomainError as e:
                raise TriangleCacheError(str(e)) from None
            if kind is TriangleKind.M:
                if any(v.denominator != 1 for v in values):
                    raise TriangleCacheError(f"row {i} of an M triangle has non-integer entries")
                values = [int(v) for v in values]
            if values[i] != 1:
                raise TriangleCacheError(f"diagonal entry ({i}, {i}) is {values[i]}, expected 1")
            negative = [k for k, v in enumerate(values) if v < 0]
            if negative:
                raise TriangleCacheError(f"entry ({i}, {negative[0]}) is negative")
            rows.append(tuple(values))

        if kind is TriangleKind.L and alpha_sq is None:
            raise TriangleCacheError("L triangle record without alpha_sq")

        return cls(kind, tuple(rows), alpha_sq)


class TriangleCache:
    """
    Directory of JSON triangle files, one family per α² value.

    Files are named ``L_<sha256 of alpha_sq>_<depth>.json``; the deepest file is
    reused and truncated when a shallower triangle is requested.
    """

    _NAME = re.compile(r"^(?P<kind>[LM])_(?P<key>[0-9a-f]{16})_(?P<depth>\d+)\.json$")

    def __init__(self, cache_dir: str = ".discqueue_cache"):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(alpha_sq: Optional[Fraction]) -> str:
        """Short content hash identifying a triangle family."""
        text = format_rational(alpha_sq) if alpha_sq is not None else "-"
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]

    def _entries(self, kind: TriangleKind, alpha_sq: Optional[Fraction]) -> List[Tuple[int, Path]]:
        key = self.key(alpha_sq)
        found = []
        for path in self.cache_dir.glob(f"{kind.value}_{key}_*.json"):
            match = self._NAME.match(path.name)
            if match:
                found.append((int(match.group("depth")), path))
        return sorted(found)

    def path_for(self, triangle: CoefficientTriangle) -> Path:
        return self.cache_dir / f"{triangle.kind.value}_{self.key(triangle.alpha_sq)}_{triangle.depth}.json"

    def save(self, triangle: CoefficientTriangle) -> Path:
        path = self.path_for(triangle)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(triangle.to_dict(), f)
        logger.debug("Cached %s triangle of depth %d at %s", triangle.kind.value, triangle.depth, path)
        return path

    def load_file(self, path: Union[str, Path], alpha_sq: Optional[Fraction] = None) -> CoefficientTriangle:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise TriangleCacheError(f"cannot read cached triangle {path}: {e}") from None
        triangle = CoefficientTriangle.from_dict(data)
        if alpha_sq is not None and triangle.alpha_sq != alpha_sq:
            raise TriangleCacheError(
                f"cached triangle {path} has alpha_sq={triangle.alpha_sq}, expected {alpha_sq}"
            )
        return triangle

    def deepest(self, kind: TriangleKind, alpha_sq: Optional[Fraction]) -> Optional[CoefficientTriangle]:
        """The deepest valid cached triangle of a family, or None."""
        for depth, path in reversed(self._entries(kind, alpha_sq)):
            try:
                return self.load_file(path, alpha_sq)
            except TriangleCacheError as e:
                logger.warning("Ignoring invalid cache entry: %s", e)
        return None

    def get_or_build(self, kind: TriangleKind, alpha_sq: Optional[Fraction], depth: int,
                     extend: Callable[[Optional[CoefficientTriangle], int], CoefficientTriangle]
                     ) -> CoefficientTriangle:
        """
        Serve a triangle of the given depth from the cache.

        The deepest cached triangle is truncated when deep enough, otherwise it is
        handed to ``extend`` (None when nothing is cached) and the result is saved.
        """
        cached = self.deepest(kind, alpha_sq)
        if cached is not None and cached.depth >= depth:
            logger.info("Triangle cache hit: %s depth %d (cached %d)", kind.value, depth, cached.depth)
            return cached.truncated(depth)
        triangle = extend(cached, depth)
        self.save(triangle)
        return triangle

    def clear(self):
        for path in self.cache_dir.glob("*.json"):
            if self._NAME.match(path.name):
                path.unlink()


def triangle_from_rows(kind: TriangleKind, rows: Sequence[Sequence[Number]],
                       alpha_sq: Optional[Fraction] = None) -> CoefficientTriangle:
    """Freeze nested row lists into a CoefficientTriangle."""
    return CoefficientTriangle(kind, tuple(tuple(r) for r in rows), alpha_sq)
