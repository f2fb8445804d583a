"""Binned samples: data model, validation, census perturbation, file I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Hashable, Iterable, Mapping

import numpy as np

from .errors import (
    DegenerateBin,
    MissingColumn,
    NegativeCount,
    NonContiguousBins,
    OverlappingBins,
    ParseError,
    UnboundedInteriorBin,
)

INF = math.inf

# Year-2000 census household income scheme (sixteen bins, top-coded at $200,000).
CENSUS_2000_EDGES: tuple[float, ...] = (
    0.0, 10_000.0, 15_000.0, 20_000.0, 25_000.0, 30_000.0, 35_000.0, 40_000.0,
    45_000.0, 50_000.0, 60_000.0, 75_000.0, 100_000.0, 125_000.0, 150_000.0,
    200_000.0, INF,
)

DEFAULT_COLUMNS = {"id": "id", "min": "min", "max": "max", "n": "n"}


@dataclass(frozen=True)
class Bin:
    lower: float
    upper: float
    count: int


@dataclass(frozen=True)
class BinnedSample:
    """Counts of units falling in half-open intervals ``[lower, upper)``.

    Construct directly for trusted data; pass through :func:`validate` for
    anything read from outside.
    """

    id: Hashable
    bins: tuple[Bin, ...]

    def __post_init__(self):
        object.__setattr__(self, "bins", tuple(self.bins))

    @property
    def total(self) -> int:
        return sum(b.count for b in self.bins)

    @property
    def lowers(self) -> np.ndarray:
        return np.array([b.lower for b in self.bins], dtype=float)

    @property
    def uppers(self) -> np.ndarray:
        return np.array([b.upper for b in self.bins], dtype=float)

    @property
    def counts(self) -> np.ndarray:
        return np.array([b.count for b in self.bins], dtype=float)

    @property
    def edges(self) -> np.ndarray:
        """The B+1 bin boundaries (requires contiguous bins)."""
        return np.append(self.lowers, self.bins[-1].upper)

    @property
    def nonzero_bins(self) -> int:
        return sum(1 for b in self.bins if b.count > 0)

    def scaled(self, factor: float) -> "BinnedSample":
        """Copy with every bin boundary multiplied by ``factor``."""
        return BinnedSample(
            self.id, tuple(Bin(b.lower * factor, b.upper * factor, b.count) for b in self.bins)
        )

    @classmethod
    def from_edges(cls, id: Hashable, edges: Iterable[float], counts: Iterable[int]) -> "BinnedSample":
        edges = list(edges)
        counts = list(counts)
        if len(edges) != len(counts) + 1:
            raise ValueError("need exactly one more edge than counts")
        return cls(id, tuple(Bin(float(lo), float(hi), int(n)) for lo, hi, n in zip(edges[:-1], edges[1:], counts)))


@dataclass(frozen=True)
class EligibilityRule:
    min_total: int = 40
    min_nonzero_bins: int = 4

    def __post_init__(self):
        if self.min_total <= 0 or self.min_nonzero_bins <= 0:
            raise ValueError("eligibility thresholds must be positive")


def validate(sample: BinnedSample) -> BinnedSample:
    """Check the structural invariants and return the sample in canonical order.

    Bins are sorted by lower bound, then checked for negative counts,
    degenerate intervals, overlaps, gaps (including a first bin that does
    not start at zero) and an unbounded bin anywhere but last.
    """
    bins = sorted(sample.bins, key=lambda b: (b.lower, b.upper))
    last = len(bins) - 1
    for i, b in enumerate(bins):
        if b.count < 0:
            raise NegativeCount(i, f"count {b.count} < 0")
        if b.lower < 0 or not math.isfinite(b.lower) or not b.lower < b.upper:
            raise DegenerateBin(i, f"invalid interval [{b.lower}, {b.upper})")
        if math.isinf(b.upper) and i != last:
            raise UnboundedInteriorBin(i, "only the last bin may be unbounded")
        if i == 0:
            if b.lower != 0:
                raise NonContiguousBins(0, f"first bin starts at {b.lower}, not 0")
            continue
        prev = bins[i - 1]
        if b.lower < prev.upper:
            raise OverlappingBins(i, f"[{b.lower}, {b.upper}) overlaps [{prev.lower}, {prev.upper})")
        if b.lower > prev.upper:
            raise NonContiguousBins(i, f"gap between {prev.upper} and {b.lower}")
    if tuple(bins) == sample.bins:
        return sample
    return BinnedSample(sample.id, tuple(bins))


def census_round(count: int) -> int:
    """Round a count the way published census tables do.

    Zero stays zero, 1 through 4 become 4, anything else goes to the
    nearest multiple of 5.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return 0
    if count < 5:
        return 4
    return 5 * ((count + 2) // 5)


def census_round_sample(sample: BinnedSample) -> BinnedSample:
    return BinnedSample(sample.id, tuple(Bin(b.lower, b.upper, census_round(b.count)) for b in sample.bins))


def is_eligible(sample: BinnedSample, rule: EligibilityRule = EligibilityRule()) -> bool:
    return sample.total >= rule.min_total and sample.nonzero_bins >= rule.min_nonzero_bins


def _parse_bound(text: str, line: int, name: str, allow_inf: bool) -> float:
    text = text.strip()
    if allow_inf and (text == "" or text.lower() in ("inf", "+inf", "infinity")):
        return INF
    try:
        value = float(text)
    except ValueError:
        raise ParseError(line, f"{name}: cannot parse {text!r} as a number") from None
    if math.isnan(value) or value < 0 or (math.isinf(value) and not allow_inf):
        raise ParseError(line, f"{name}: invalid amount {text!r}")
    return value


def _parse_count(text: str, line: int) -> int:
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        raise ParseError(line, f"n: cannot parse {text!r} as a count") from None
    if not value.is_integer():
        raise ParseError(line, f"n: count {text!r} is not an integer")
    return int(value)


def read_samples(path: str | Path, columns: Mapping[str, str | None] | None = None) -> list[BinnedSample]:
    """Read binned samples from a comma-separated file with a header row.

    Parameters
    ----------
    path : str or Path
        Input file (UTF-8).
    columns : mapping, optional
        Maps the roles ``id``, ``min``, ``max`` and ``n`` to header names.
        The ``id`` role may map to ``None`` (or to a column that is absent)
        for single-unit files.

    Returns
    -------
    list of BinnedSample
        One sample per distinct id in order of first appearance, with bins
        sorted by lower bound. Samples are not validated.
    """
    cols = dict(DEFAULT_COLUMNS)
    if columns:
        cols.update(columns)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return []
        header = [h.strip() for h in header]
        index = {}
        for role in ("min", "max", "n"):
            if cols[role] not in header:
                raise MissingColumn(cols[role])
            index[role] = header.index(cols[role])
        id_col = cols.get("id")
        id_idx = header.index(id_col) if id_col and id_col in header else None
        if columns and columns.get("id") and id_idx is None:
            raise MissingColumn(columns["id"])

        groups: dict[Hashable, list[Bin]] = {}
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                row = row + [""] * (len(header) - len(row))
            uid = row[id_idx].strip() if id_idx is not None else "1"
            lo = _parse_bound(row[index["min"]], line, "min", allow_inf=False)
            hi = _parse_bound(row[index["max"]], line, "max", allow_inf=True)
            n = _parse_count(row[index["n"]], line)
            groups.setdefault(uid, []).append(Bin(lo, hi, n))
    return [BinnedSample(uid, tuple(sorted(bins, key=lambda b: b.lower))) for uid, bins in groups.items()]


def _fmt_amount(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return repr(int(x)) if float(x).is_integer() else repr(float(x))


def write_samples(samples: Iterable[BinnedSample], path: str | Path, columns: Mapping[str, str] | None = None) -> None:
    cols = dict(DEFAULT_COLUMNS)
    if columns:
        cols.update(columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([cols["id"], cols["min"], cols["max"], cols["n"]])
        for s in samples:
            for b in s.bins:
                writer.writerow([s.id, _fmt_amount(b.lower), _fmt_amount(b.upper), b.count])


def two_districts_path() -> Path:
    """Location of the bundled two-district example (household income, 2000)."""
    return Path(str(resources.files("binfit") / "data" / "two_districts.csv"))


def load_two_districts() -> list[BinnedSample]:
    samples = read_samples(
        two_districts_path(), {"id": "district", "min": "min", "max": "max", "n": "households"}
    )
    return [validate(s) for s in samples]
