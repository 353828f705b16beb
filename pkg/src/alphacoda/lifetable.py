"""
Reading period life tables and turning them into death-count compositions.

The Human Mortality Database distributes single-year period life tables as
whitespace-delimited text with columns ``Year Age mx qx ax lx dx Lx Tx ex``
after one or two header lines. HMD rounds ``dx`` to integers, which leaves
spurious zeros at the oldest ages; by default the death counts are rebuilt
from ``qx`` and the radix instead.
"""

import csv
import io
import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import DataGapError, DomainError, FormatError, ParseError

log = logging.getLogger(__name__)

DEFAULT_RADIX = 1e5
MAX_AGE = 110
N_AGES = MAX_AGE + 1
HMD_COLUMNS = ("Year", "Age", "mx", "qx", "ax", "lx", "dx", "Lx", "Tx", "ex")
CSV_COLUMNS = ("year", "age", "value")


@dataclass(frozen=True)
class LifeTableRecord:
    year: int
    age: int
    qx: float
    dx: float = float("nan")
    lx: float = float("nan")
    mx: float = float("nan")


@dataclass
class CompositionSeries:
    """Annual death-count compositions, one row per year.

    ``values`` rows sum to 1; ``radix`` only matters when writing counts.
    """

    years: np.ndarray
    ages: np.ndarray
    values: np.ndarray
    radix: float = DEFAULT_RADIX
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.years = np.asarray(self.years, dtype=int)
        self.ages = np.asarray(self.ages, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        n, D = self.values.shape
        if len(self.years) != n or len(self.ages) != D:
            raise FormatError(
                f"labels ({len(self.years)} years, {len(self.ages)} ages) "
                f"do not match values {self.values.shape}"
            )
        if n > 1 and np.any(np.diff(self.years) != 1):
            raise DataGapError("years must be strictly increasing and consecutive")
        if np.any(self.values < 0):
            raise FormatError("negative values in series")
        sums = self.values.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise FormatError("series rows must sum to 1")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def D(self):
        return self.values.shape[1]

    def __len__(self):
        return self.n

    def subset(self, rows):
        """Return the series restricted to a contiguous slice of years."""
        if isinstance(rows, slice):
            idx = np.arange(self.n)[rows]
        else:
            idx = np.asarray(rows)
        return CompositionSeries(
            self.years[idx], self.ages, self.values[idx], self.radix, dict(self.meta)
        )

    def counts(self):
        return self.values * self.radix

    def zero_cells(self):
        return int(np.count_nonzero(self.values == 0))


def _parse_age(token, lineno):
    if token.endswith("+"):
        token = token[:-1]
    if "-" in token:
        raise ParseError(f"abridged age group {token!r} not supported", lineno)
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"bad age token {token!r}", lineno) from None


def _parse_float(token):
    return float("nan") if token == "." else float(token)


def parse_hmd_lifetable(text, sex=None):
    """Parse an HMD period life table.

    Parameters
    ----------
    text : str, bytes or file-like
    sex : str, optional
        Only used when the file carries a ``Sex`` column; rows of other
        sexes are dropped.

    Returns
    -------
    list of LifeTableRecord
    """
    if hasattr(text, "read"):
        text = text.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")

    columns = None
    preamble = 0
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if columns is None:
            if tokens[0] == "Year":
                columns = tokens
                missing = [c for c in ("Year", "Age", "qx") if c not in columns]
                if missing:
                    raise ParseError(f"header lacks columns {missing}", lineno)
            else:
                preamble += 1
                if preamble > 2 or tokens[0].isdigit():
                    raise ParseError("no 'Year Age ...' header line found", lineno)
            continue
        if len(tokens) != len(columns):
            raise ParseError(
                f"expected {len(columns)} columns, found {len(tokens)}", lineno
            )
        row = dict(zip(columns, tokens))
        if sex is not None and "Sex" in row and row["Sex"].lower() != sex.lower():
            continue
        try:
            year = int(row["Year"])
        except ValueError:
            raise ParseError(f"bad year token {row['Year']!r}", lineno) from None
        age = _parse_age(row["Age"], lineno)
        try:
            qx = _parse_float(row["qx"])
            extras = {k: _parse_float(row[k]) for k in ("dx", "lx", "mx") if k in row}
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if np.isnan(qx):
            raise DataGapError(f"line {lineno}: missing qx for year {year}, age {age}")
        records.append(LifeTableRecord(year=year, age=age, qx=qx, **extras))
    if columns is None:
        raise ParseError("empty life table (no header found)")
    return records


def survivors_from_qx(qx, radix=DEFAULT_RADIX):
    """Survivors ``l(x)`` for x = 0..len(qx)-1 from death probabilities."""
    qx = np.asarray(qx, dtype=float)
    if np.any((qx < 0) | (qx > 1)) or not np.all(np.isfinite(qx)):
        raise DomainError("qx must lie in [0, 1]")
    return radix * np.concatenate([[1.0], np.cumprod(1.0 - qx[:-1])])


def rebuild_dx_from_qx(qx, radix=DEFAULT_RADIX):
    """Life-table death counts from ``qx`` and the radix.

    The last age is closed by forcing its ``qx`` to 1, so the counts sum to
    the radix. Uses ``l(0) = radix``, ``d(x) = l(x) q(x)``,
    ``l(x+1) = l(x) (1 - q(x))``.
    """
    qx = np.array(qx, dtype=float)
    if np.any((qx < 0) | (qx > 1)) or not np.all(np.isfinite(qx)):
        raise DomainError("qx must lie in [0, 1]")
    if abs(qx[-1] - 1.0) > 1e-6:
        log.info("closing life table: q at last age %.6g forced to 1", qx[-1])
    qx[-1] = 1.0
    lx = survivors_from_qx(qx, radix)
    return lx * qx


def _grid(records, n_ages):
    by_year = defaultdict(dict)
    for r in records:
        if r.age >= n_ages:
            raise FormatError(f"age {r.age} beyond the 0..{n_ages - 1} grid")
        by_year[r.year][r.age] = r
    if not by_year:
        raise DataGapError("no records")
    years = sorted(by_year)
    for y0, y1 in zip(years, years[1:]):
        if y1 != y0 + 1:
            raise DataGapError(f"missing year(s) between {y0} and {y1}")
    for y in years:
        for a in range(n_ages):
            if a not in by_year[y]:
                raise DataGapError(f"missing cell (year={y}, age={a})")
    return years, by_year


def build_series(records, rebuild_from_qx=True, radix=DEFAULT_RADIX, n_ages=N_AGES):
    """Assemble per-year death-count compositions from life-table records.

    With ``rebuild_from_qx`` (default) counts are recomputed from ``qx``;
    otherwise the file's ``dx`` column is used and closed.
    """
    years, by_year = _grid(records, n_ages)
    rows = []
    for y in years:
        recs = [by_year[y][a] for a in range(n_ages)]
        if rebuild_from_qx:
            d = rebuild_dx_from_qx([r.qx for r in recs], radix)
        else:
            d = np.array([r.dx for r in recs], dtype=float)
            if np.any(~np.isfinite(d)) or np.any(d < 0):
                raise DataGapError(f"year {y}: dx column missing or negative")
        rows.append(d / d.sum())
    meta = {"source": "qx" if rebuild_from_qx else "dx"}
    return CompositionSeries(np.array(years), np.arange(n_ages), np.vstack(rows), radix, meta)


def read_hmd(path, rebuild_from_qx=True, radix=DEFAULT_RADIX, sex=None):
    with open(path, "rb") as fh:
        records = parse_hmd_lifetable(fh.read(), sex=sex)
    return build_series(records, rebuild_from_qx=rebuild_from_qx, radix=radix)


def qx_from_death_composition(values):
    """Invert the life-table recursion: ``q(x) = d(x) / l(x)``, ``l`` the
    reverse cumulative sum of ``d``. The last age gets q = 1."""
    d = np.atleast_2d(np.asarray(values, dtype=float))
    lx = np.cumsum(d[:, ::-1], axis=1)[:, ::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(lx > 0, d / lx, 1.0)
    q[:, -1] = 1.0
    return np.clip(q, 0.0, 1.0)


def write_series_csv(series, fh=None):
    """Write a series in long format ``year,age,value`` (counts at the radix).

    Returns the CSV text when ``fh`` is None.
    """
    out = io.StringIO() if fh is None else fh
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    counts = series.counts()
    for i, y in enumerate(series.years):
        for j, a in enumerate(series.ages):
            w.writerow([int(y), int(a), f"{counts[i, j]:.12g}"])
    if fh is None:
        return out.getvalue()
    return None


def read_series_csv(text):
    """Read a long-format ``year,age,value`` series; rows are re-closed and
    the radix is recovered from the row totals."""
    if hasattr(text, "read"):
        text = text.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    if not text.strip():
        raise FormatError("empty series file")
    reader = csv.reader(io.StringIO(text))
    header = [h.strip() for h in next(reader)]
    if tuple(header) != CSV_COLUMNS:
        raise FormatError(f"expected columns {','.join(CSV_COLUMNS)}, got {','.join(header)}")
    cells = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise FormatError(f"line {lineno}: expected 3 fields, got {len(row)}")
        try:
            y = int(row[0])
            a = int(row[1].strip().rstrip("+"))
            v = float(row[2])
        except ValueError:
            raise FormatError(f"line {lineno}: unparseable row {row!r}") from None
        if not np.isfinite(v) or v < 0:
            raise FormatError(f"line {lineno}: invalid value {row[2]!r}")
        if (y, a) in cells:
            raise FormatError(f"line {lineno}: duplicate cell (year={y}, age={a})")
        cells[(y, a)] = v
    if not cells:
        raise FormatError(f"no data rows; expected columns {','.join(CSV_COLUMNS)}")
    years = sorted({y for y, _ in cells})
    ages = sorted({a for _, a in cells})
    if len(cells) != len(years) * len(ages):
        raise FormatError("inconsistent grid: not every (year, age) cell is present")
    mat = np.array([[cells[(y, a)] for a in ages] for y in years])
    totals = mat.sum(axis=1)
    if np.any(totals <= 0):
        raise FormatError("a year has zero total")
    radix = float(np.median(totals))
    return CompositionSeries(np.array(years), np.array(ages), mat / totals[:, None], radix)
