"""Exact-rational dense matrices with labelled axes.

Every entry is a :class:`fractions.Fraction`; nothing in here ever rounds.
Rows and columns carry opaque hashable labels (ints, strings, tuples, ...)
which are threaded through Kronecker products and multiplication so that
results stay self-describing.
"""

from __future__ import annotations

import ast
import csv
import io
from fractions import Fraction
from numbers import Rational
from os import PathLike
from typing import Any, Hashable, Iterable, Sequence, TextIO, Union

Label = Hashable
Entry = Union[int, Fraction, str]

ZERO = Fraction(0)
ONE = Fraction(1)


def to_rational(value: Any) -> Fraction:
    """Coerce ``value`` to an exact Fraction.

    Strings may be ``"p/q"``, integers or decimal literals; decimals are read
    as the exact decimal fraction (``"0.36"`` is 9/25). Floats are refused
    because their binary expansion is almost never what was meant.
    """
    if type(value) is Fraction:
        return value
    if isinstance(value, bool):
        return ONE if value else ZERO
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return parse_rational(value)
    if isinstance(value, float):
        raise TypeError(f"refusing float {value!r}; pass a string or Fraction")
    raise TypeError(f"cannot interpret {value!r} as a rational")


def parse_rational(text: str) -> Fraction:
    text = text.strip()
    if not text:
        raise ValueError("empty rational literal")
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"invalid rational literal {text!r}") from exc


def format_rational(value: Fraction) -> str:
    return str(value)


class Matrix:
    """Immutable dense matrix over the rationals with labelled rows/columns.

    Subclasses add invariants (see :class:`Channel`). ``closed_under_products``
    marks classes whose products and Kronecker products stay in the class, so
    that e.g. the product of two channels is again a channel.
    """

    __slots__ = ("_rows", "_cols", "_data", "_row_pos", "_col_pos")
    closed_under_products = True

    def __init__(
        self,
        rows: Iterable[Label],
        cols: Iterable[Label],
        data: Iterable[Iterable[Entry]],
    ):
        rows = tuple(rows)
        cols = tuple(cols)
        grid = tuple(tuple(to_rational(v) for v in r) for r in data)
        if len(grid) != len(rows):
            raise ValueError(f"{len(grid)} data rows for {len(rows)} row labels")
        for r in grid:
            if len(r) != len(cols):
                raise ValueError(f"row of length {len(r)} for {len(cols)} column labels")
        row_pos = {lab: i for i, lab in enumerate(rows)}
        col_pos = {lab: j for j, lab in enumerate(cols)}
        if len(row_pos) != len(rows):
            raise ValueError("row labels are not unique")
        if len(col_pos) != len(cols):
            raise ValueError("column labels are not unique")
        object.__setattr__(self, "_rows", rows)
        object.__setattr__(self, "_cols", cols)
        object.__setattr__(self, "_data", grid)
        object.__setattr__(self, "_row_pos", row_pos)
        object.__setattr__(self, "_col_pos", col_pos)
        self._validate()

    def _validate(self) -> None:
        pass

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @classmethod
    def from_matrix(cls, m: "Matrix"):
        """Re-wrap ``m`` in this class, checking the class invariants."""
        return cls(m.rows, m.cols, m.data)

    @property
    def rows(self) -> tuple:
        return self._rows

    @property
    def cols(self) -> tuple:
        return self._cols

    @property
    def data(self) -> tuple[tuple[Fraction, ...], ...]:
        return self._data

    @property
    def shape(self) -> tuple[int, int]:
        return len(self._rows), len(self._cols)

    def __getitem__(self, key: tuple[Label, Label]) -> Fraction:
        r, c = key
        return self._data[self._row_pos[r]][self._col_pos[c]]

    def row(self, label: Label) -> tuple[Fraction, ...]:
        return self._data[self._row_pos[label]]

    def column(self, label: Label) -> tuple[Fraction, ...]:
        j = self._col_pos[label]
        return tuple(r[j] for r in self._data)

    def row_index(self, label: Label) -> int:
        return self._row_pos[label]

    def col_index(self, label: Label) -> int:
        return self._col_pos[label]

    def entries_equal(self, other: "Matrix | Sequence[Sequence[Entry]]") -> bool:
        """Entrywise equality, ignoring labels."""
        grid = other.data if isinstance(other, Matrix) else other
        if len(grid) != len(self._data):
            return False
        return all(
            len(a) == len(b) and all(x == to_rational(y) for x, y in zip(a, b))
            for a, b in zip(self._data, grid)
        )

    def relabel(self, rows: Iterable[Label] | None = None, cols: Iterable[Label] | None = None):
        return type(self)(
            self._rows if rows is None else rows,
            self._cols if cols is None else cols,
            self._data,
        )

    def restrict_rows(self, labels: Iterable[Label]) -> "Matrix":
        labels = tuple(labels)
        cls = type(self)
        rows = [self.row(lab) for lab in labels]
        try:
            return cls(labels, self._cols, rows)
        except ValueError:
            return Matrix(labels, self._cols, rows)

    def transpose(self) -> "Matrix":
        return Matrix(self._cols, self._rows, zip(*self._data) if self._data else [])

    T = property(transpose)

    def as_plain(self) -> "Matrix":
        return Matrix(self._rows, self._cols, self._data)

    def to_floats(self) -> list[list[float]]:
        return [[float(v) for v in r] for r in self._data]

    def __eq__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        return (
            self._rows == other._rows
            and self._cols == other._cols
            and self._data == other._data
        )

    def __hash__(self):
        return hash((self._rows, self._cols, self._data))

    def __matmul__(self, other: "Matrix") -> "Matrix":
        return matmul(self, other)

    def __add__(self, other: "Matrix") -> "Matrix":
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        return Matrix(
            self._rows,
            self._cols,
            [[x + y for x, y in zip(a, b)] for a, b in zip(self._data, other._data)],
        )

    def __sub__(self, other: "Matrix") -> "Matrix":
        return self + other.scale(-1)

    def scale(self, factor: Entry) -> "Matrix":
        f = to_rational(factor)
        return Matrix(self._rows, self._cols, [[f * x for x in r] for r in self._data])

    def __repr__(self):
        body = "; ".join(" ".join(str(v) for v in r) for r in self._data)
        return f"{type(self).__name__}({len(self._rows)}x{len(self._cols)}: [{body}])"


class Channel(Matrix):
    """Row-stochastic matrix: nonnegative entries, every row sums to exactly 1."""

    __slots__ = ()

    def _validate(self) -> None:
        for lab, r in zip(self.rows, self.data):
            if any(v < 0 for v in r):
                raise ValueError(f"negative entry in channel row {lab!r}")
            if sum(r, ZERO) != ONE:
                raise ValueError(f"channel row {lab!r} sums to {sum(r, ZERO)}, not 1")


def _result_type(a: Matrix, b: Matrix) -> type:
    for cls in type(a).__mro__:
        if not issubclass(cls, Matrix):
            break
        if cls.__dict__.get("closed_under_products", True) and isinstance(b, cls):
            return cls
    return Matrix


def identity(labels: Iterable[Label]) -> Channel:
    labels = tuple(labels)
    n = len(labels)
    return Channel(labels, labels, [[ONE if i == j else ZERO for j in range(n)] for i in range(n)])


def kronecker(a: Matrix, b: Matrix) -> Matrix:
    """Kronecker product; entry ((x,x'),(y,y')) is a[x,y]*b[x',y']."""
    rows = [(x, xp) for x in a.rows for xp in b.rows]
    cols = [(y, yp) for y in a.cols for yp in b.cols]
    data = []
    for ar in a.data:
        for br in b.data:
            data.append([u * v for u in ar for v in br])
    return _result_type(a, b)(rows, cols, data)


def kron_power(a: Matrix, n: int) -> Matrix:
    """N-fold Kronecker power of ``a``.

    Labels of the result are flat n-tuples of ``a``'s labels (so n=1 gives
    1-tuples); ``kron_power(a, 0)`` is the 1x1 identity labelled ``()``.
    """
    if n < 0:
        raise ValueError("Kronecker power must be >= 0")
    rows: list[tuple] = [()]
    cols: list[tuple] = [()]
    grid: list[list[Fraction]] = [[ONE]]
    for _ in range(n):
        grid = [[u * v for u in gr for v in ar] for gr in grid for ar in a.data]
        rows = [r + (x,) for r in rows for x in a.rows]
        cols = [c + (y,) for c in cols for y in a.cols]
    cls = _result_type(a, a) if n > 0 else Channel
    return cls(rows, cols, grid)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Exact product; a's column labels are matched positionally to b's rows."""
    if len(a.cols) != len(b.rows):
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    ncols = len(b.cols)
    b_sparse = [[(j, v) for j, v in enumerate(r) if v] for r in b.data]
    out = []
    for ar in a.data:
        acc = [ZERO] * ncols
        for k, u in enumerate(ar):
            if u:
                for j, v in b_sparse[k]:
                    acc[j] += u * v
        out.append(acc)
    return _result_type(a, b)(a.rows, b.cols, out)


def is_stochastic(a: Matrix) -> bool:
    return all(
        all(v >= 0 for v in r) and sum(r, ZERO) == ONE for r in a.data
    )


def is_deterministic(a: Matrix) -> bool:
    """0/1 entries, exactly one 1 per row and no all-zero column."""
    hit = [False] * len(a.cols)
    for r in a.data:
        ones = [j for j, v in enumerate(r) if v == ONE]
        if len(ones) != 1 or any(v != ZERO for j, v in enumerate(r) if j != ones[0]):
            return False
        hit[ones[0]] = True
    return all(hit)


def left_inverse(p: Matrix) -> Channel:
    """Canonical left inverse of a deterministic matrix.

    Row z is the point distribution on the first row label y with p[y,z] = 1.
    """
    if not is_deterministic(p):
        raise ValueError("left_inverse requires a deterministic matrix")
    first: dict[int, int] = {}
    for i, r in enumerate(p.data):
        j = r.index(ONE)
        first.setdefault(j, i)
    m = len(p.rows)
    data = []
    for j in range(len(p.cols)):
        row = [ZERO] * m
        row[first[j]] = ONE
        data.append(row)
    return Channel(p.cols, p.rows, data)


class SingularMatrixError(ValueError):
    pass


def invert(a: Matrix) -> Matrix:
    """Exact inverse by Gauss-Jordan elimination; rows/cols labels swap."""
    n, m = a.shape
    if n != m:
        raise ValueError(f"cannot invert non-square {a.shape} matrix")
    work = [list(r) + [ONE if i == j else ZERO for j in range(n)] for i, r in enumerate(a.data)]
    for col in range(n):
        pivot = next((i for i in range(col, n) if work[i][col] != 0), None)
        if pivot is None:
            raise SingularMatrixError("matrix is singular")
        work[col], work[pivot] = work[pivot], work[col]
        pr = work[col]
        inv = 1 / pr[col]
        pr[:] = [v * inv for v in pr]
        for i in range(n):
            if i != col and work[i][col] != 0:
                f = work[i][col]
                ri = work[i]
                work[i] = [x - f * y for x, y in zip(ri, pr)]
    return Matrix(a.cols, a.rows, [r[n:] for r in work])


# -- CSV text format --------------------------------------------------------


def format_label(label: Label) -> str:
    return label if isinstance(label, str) else repr(label)


def parse_label(text: str) -> Label:
    """Inverse of :func:`format_label` for literals; anything else stays a string."""
    try:
        value = ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text
    if isinstance(value, (int, bool, tuple, str, Fraction)) and not isinstance(value, float):
        return value
    return text


def write_matrix_csv(m: Matrix, dest: Union[str, PathLike, TextIO, None] = None) -> str:
    """Write ``m`` as CSV (header of column labels, leading label column).

    Returns the CSV text; also writes it to ``dest`` when given.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + [format_label(c) for c in m.cols])
    for lab, r in zip(m.rows, m.data):
        w.writerow([format_label(lab)] + [format_rational(v) for v in r])
    text = buf.getvalue()
    if dest is not None:
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            with open(dest, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    return text


def read_matrix_csv(src: Union[str, PathLike, TextIO], cls: type = Matrix) -> Matrix:
    if hasattr(src, "read"):
        text = src.read()
    else:
        with open(src, encoding="utf-8", newline="") as fh:
            text = fh.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows:
        raise ValueError("empty matrix CSV")
    header, body = rows[0], rows[1:]
    cols = [parse_label(c) for c in header[1:]]
    labels = []
    data = []
    for line_no, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ValueError(f"line {line_no}: expected {len(header)} fields, got {len(r)}")
        labels.append(parse_label(r[0]))
        try:
            data.append([parse_rational(v) for v in r[1:]])
        except ValueError as exc:
            raise ValueError(f"line {line_no}: {exc}") from exc
    return cls(labels, cols, data)


def matrix_to_json(m: Matrix) -> dict:
    return {
        "rows": [format_label(r) for r in m.rows],
        "cols": [format_label(c) for c in m.cols],
        "entries": [[format_rational(v) for v in r] for r in m.data],
    }


def matrix_from_json(obj: dict, cls: type = Matrix) -> Matrix:
    return cls(
        [parse_label(str(r)) for r in obj["rows"]],
        [parse_label(str(c)) for c in obj["cols"]],
        [[parse_rational(str(v)) for v in r] for r in obj["entries"]],
    )
