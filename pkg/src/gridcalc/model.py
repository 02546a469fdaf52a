"""Core workbook model: addresses, values, cells, sheets, and workspaces.

Every other module operates on the types defined here. A value is one of:

* number  -- Python ``float``
* text    -- Python ``str``
* boolean -- Python ``bool``
* blank   -- ``None`` (an empty cell; deliberately distinct from ``""``)
* error   -- :class:`Error` (interned, one instance per code)
* array   -- :class:`Array`, a rectangle of the scalar kinds above

A :class:`Workspace` is a plain value with no internal sharing: it may be
moved freely between threads, and all mutation goes through the engine under
a single-writer contract.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Iterator, Union

# Grid limits, enforced when references are parsed.
MAX_COLUMNS = 16_384
MAX_ROWS = 1_048_576

_NAME_FORBIDDEN = set("[]!:")


class AddressError(ValueError):
    """Raised for malformed or out-of-grid reference text."""


# ---------------------------------------------------------------------------
# Error values
# ---------------------------------------------------------------------------


class Error:
    """A spreadsheet error value that propagates through evaluation.

    Instances are interned: ``Error.of(code)`` returns the same object for
    the same code, so identity and equality coincide.
    """

    __slots__ = ("code",)
    _interned: dict[str, "Error"] = {}

    VALUE: "Error"
    REF: "Error"
    NA: "Error"
    NAME: "Error"
    DIV0: "Error"
    NUM: "Error"
    CYCLE: "Error"

    def __init__(self, code: str) -> None:
        self.code = code

    @classmethod
    def of(cls, code: str) -> "Error":
        err = cls._interned.get(code)
        if err is None:
            err = cls._interned[code] = cls(code)
        return err

    def __repr__(self) -> str:
        return self.code

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Error):
            return self.code == other.code
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.code)


Error.VALUE = Error.of("#VALUE!")
Error.REF = Error.of("#REF!")
Error.NA = Error.of("#N/A")
Error.NAME = Error.of("#NAME?")
Error.DIV0 = Error.of("#DIV/0!")
Error.NUM = Error.of("#NUM!")
Error.CYCLE = Error.of("#CYCLE!")

ERROR_CODES = tuple(Error._interned)

# blank, kept as a named constant for readability
BLANK = None

Scalar = Union[float, str, bool, None, Error]


def is_error(v: Any) -> bool:
    return isinstance(v, Error)


# ---------------------------------------------------------------------------
# Arrays
# ---------------------------------------------------------------------------


class Array:
    """A rectangular block of scalar values (never nested arrays)."""

    __slots__ = ("rows",)

    def __init__(self, rows) -> None:
        rows = tuple(tuple(r) for r in rows)
        if not rows or not rows[0]:
            raise ValueError("array must be at least 1x1")
        width = len(rows[0])
        for r in rows:
            if len(r) != width:
                raise ValueError("array rows must all have the same length")
            for v in r:
                if isinstance(v, Array):
                    raise ValueError("arrays cannot contain arrays")
        self.rows = rows

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.rows[0])

    def get(self, row: int, col: int) -> Scalar:
        """Element at 1-based (row, col)."""
        return self.rows[row - 1][col - 1]

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Array):
            return self.rows == other.rows
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.rows)

    def __repr__(self) -> str:
        return f"Array({self.rows!r})"


Value = Union[Scalar, Array]


def top_left(v: Value) -> Scalar:
    """Collapse an array to its top-left element (scalar context rule)."""
    if isinstance(v, Array):
        return v.rows[0][0]
    return v


def values_equal(a: Value, b: Value) -> bool:
    """Type-aware value equality: 0.0, FALSE and blank are all distinct."""
    if a is b:
        return True
    return type(a) is type(b) and a == b


# ---------------------------------------------------------------------------
# Column letters (bijective base 26: A=1, Z=26, AA=27)
# ---------------------------------------------------------------------------


def column_to_letters(col: int) -> str:
    if col < 1:
        raise ValueError(f"column must be >= 1, got {col}")
    out = []
    while col:
        col, rem = divmod(col - 1, 26)
        out.append(chr(ord("A") + rem))
    return "".join(reversed(out))


def letters_to_column(letters: str) -> int:
    col = 0
    for ch in letters.upper():
        if not "A" <= ch <= "Z":
            raise ValueError(f"bad column letters {letters!r}")
        col = col * 26 + (ord(ch) - ord("A") + 1)
    return col


# ---------------------------------------------------------------------------
# Addresses and ranges
# ---------------------------------------------------------------------------


def _check_name(kind: str, name: str) -> None:
    if not name:
        raise AddressError(f"{kind} name must be non-empty")
    if _NAME_FORBIDDEN & set(name):
        raise AddressError(f"{kind} name {name!r} contains a forbidden character")


@dataclass(frozen=True, eq=False)
class CellAddress:
    """A fully qualified cell coordinate: workbook, sheet, column, row.

    Comparison and hashing are case-insensitive on the workbook and sheet
    names; the stored names keep their original case for display.
    """

    workbook: str
    sheet: str
    column: int
    row: int

    def __post_init__(self) -> None:
        _check_name("workbook", self.workbook)
        _check_name("sheet", self.sheet)
        if self.column < 1 or self.row < 1:
            raise AddressError(f"column and row must be >= 1, got {self.column}, {self.row}")
        object.__setattr__(
            self,
            "_key",
            (self.workbook.casefold(), self.sheet.casefold(), self.row, self.column),
        )

    @property
    def sort_key(self) -> tuple:
        return self._key  # type: ignore[attr-defined]

    def __eq__(self, other: object) -> bool:
        if isinstance(other, CellAddress):
            return self._key == other._key  # type: ignore[attr-defined]
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._key)  # type: ignore[attr-defined]

    def local_text(self) -> str:
        return f"{column_to_letters(self.column)}{self.row}"

    def __repr__(self) -> str:
        return f"<[{self.workbook}]{self.sheet}!{self.local_text()}>"


@dataclass(frozen=True, eq=False)
class RangeRef:
    """A rectangular range; both corners share one workbook and sheet."""

    top_left: CellAddress
    bottom_right: CellAddress

    def __post_init__(self) -> None:
        a, b = self.top_left, self.bottom_right
        if (a.workbook.casefold(), a.sheet.casefold()) != (
            b.workbook.casefold(),
            b.sheet.casefold(),
        ):
            raise AddressError("range corners must share workbook and sheet")
        if a.column > b.column or a.row > b.row:
            raise AddressError("range corners out of order")

    @classmethod
    def normalized(cls, a: CellAddress, b: CellAddress) -> "RangeRef":
        tl = CellAddress(a.workbook, a.sheet, min(a.column, b.column), min(a.row, b.row))
        br = CellAddress(a.workbook, a.sheet, max(a.column, b.column), max(a.row, b.row))
        return cls(tl, br)

    @property
    def n_rows(self) -> int:
        return self.bottom_right.row - self.top_left.row + 1

    @property
    def n_cols(self) -> int:
        return self.bottom_right.column - self.top_left.column + 1

    def contains(self, addr: CellAddress) -> bool:
        tl, br = self.top_left, self.bottom_right
        if (addr.workbook.casefold(), addr.sheet.casefold()) != (
            tl.workbook.casefold(),
            tl.sheet.casefold(),
        ):
            return False
        return tl.row <= addr.row <= br.row and tl.column <= addr.column <= br.column

    def cells(self) -> Iterator[CellAddress]:
        tl, br = self.top_left, self.bottom_right
        for row in range(tl.row, br.row + 1):
            for col in range(tl.column, br.column + 1):
                yield CellAddress(tl.workbook, tl.sheet, col, row)

    def overlaps(self, other: "RangeRef") -> bool:
        a, b = self.top_left, self.bottom_right
        c, d = other.top_left, other.bottom_right
        if (a.workbook.casefold(), a.sheet.casefold()) != (
            c.workbook.casefold(),
            c.sheet.casefold(),
        ):
            return False
        return not (b.column < c.column or d.column < a.column or b.row < c.row or d.row < a.row)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, RangeRef):
            return (self.top_left, self.bottom_right) == (other.top_left, other.bottom_right)
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.top_left, self.bottom_right))

    def local_text(self) -> str:
        return f"{self.top_left.local_text()}:{self.bottom_right.local_text()}"

    def __repr__(self) -> str:
        tl = self.top_left
        return f"<[{tl.workbook}]{tl.sheet}!{self.local_text()}>"


Reference = Union[CellAddress, RangeRef]

# A1-style reference text, optionally sheet- and workbook-qualified.
# Absolute markers ($) are accepted and discarded.
_ADDR_RE = re.compile(
    r"""^\s*
        (?:\[(?P<book>[^\[\]!:]+)\])?
        (?:(?P<sheet>[^\[\]!:]+)!)?
        (?P<a>\$?[A-Za-z]{1,3}\$?[0-9]+)
        (?::(?P<b>\$?[A-Za-z]{1,3}\$?[0-9]+))?
        \s*$""",
    re.VERBOSE,
)

_CELL_PART_RE = re.compile(r"^\$?([A-Za-z]{1,3})\$?([0-9]+)$")


def _parse_cell_part(part: str, workbook: str, sheet: str) -> CellAddress:
    m = _CELL_PART_RE.match(part)
    if m is None:
        raise AddressError(f"bad cell reference {part!r}")
    col = letters_to_column(m.group(1))
    row = int(m.group(2))
    if row < 1 or row > MAX_ROWS or col > MAX_COLUMNS:
        raise AddressError(f"reference {part!r} is outside the grid")
    return CellAddress(workbook, sheet, col, row)


def parse_address(text: str, context: CellAddress) -> Reference:
    """Parse A1-style reference text into a fully qualified address or range.

    Unqualified parts inherit the workbook and sheet of *context*. Accepts
    ``A1``, ``A1:B2``, ``Sheet1!A1`` and ``[Book2]Sheet1!A1:A5`` forms.
    """
    m = _ADDR_RE.match(text)
    if m is None:
        raise AddressError(f"cannot parse reference {text!r}")
    book = m.group("book")
    sheet = m.group("sheet")
    if book is not None and sheet is None:
        raise AddressError(f"workbook-qualified reference {text!r} needs a sheet")
    workbook = book if book is not None else context.workbook
    sheet_name = sheet if sheet is not None else context.sheet
    _check_name("workbook", workbook)
    _check_name("sheet", sheet_name)
    a = _parse_cell_part(m.group("a"), workbook, sheet_name)
    if m.group("b") is None:
        return a
    b = _parse_cell_part(m.group("b"), workbook, sheet_name)
    return RangeRef.normalized(a, b)


def format_reference(target: Reference, style: str = "qualified") -> str:
    """Render an address or range as text; inverse of :func:`parse_address`.

    ``qualified`` emits ``[Workbook]Sheet!A1``; ``local`` emits ``A1``.
    Single-cell ranges collapse to one address.
    """
    if style not in ("qualified", "local"):
        raise ValueError(f"unknown style {style!r}")
    if isinstance(target, RangeRef):
        if target.top_left == target.bottom_right:
            return format_reference(target.top_left, style)
        local = target.local_text()
        head = target.top_left
    else:
        local = target.local_text()
        head = target
    if style == "local":
        return local
    return f"[{head.workbook}]{head.sheet}!{local}"


# ---------------------------------------------------------------------------
# Scalar coercion
# ---------------------------------------------------------------------------

# Plain decimal numbers only; deliberately rejects inf/nan spellings and
# underscores that Python's float() would accept.
_NUMBER_TEXT_RE = re.compile(r"^[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?$")


def number_to_text(x: float) -> str:
    """Canonical text for a number: integers bare, else shortest round-trip."""
    if x == int(x) and abs(x) <= 2**53:
        return str(int(x))
    return repr(x)


def to_number(v: Scalar) -> Union[float, Error]:
    if isinstance(v, Error):
        return v
    if isinstance(v, bool):
        return 1.0 if v else 0.0
    if isinstance(v, float):
        return v
    if v is None:
        return 0.0
    if isinstance(v, str):
        if _NUMBER_TEXT_RE.match(v.strip()):
            return float(v)
        return Error.VALUE
    raise TypeError(f"not a scalar: {v!r}")


def to_text(v: Scalar) -> Union[str, Error]:
    if isinstance(v, Error):
        return v
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, float):
        return number_to_text(v)
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    raise TypeError(f"not a scalar: {v!r}")


def to_boolean(v: Scalar) -> Union[bool, Error]:
    if isinstance(v, Error):
        return v
    if isinstance(v, bool):
        return v
    if isinstance(v, float):
        return v != 0.0
    if v is None:
        return False
    if isinstance(v, str):
        folded = v.strip().casefold()
        if folded == "true":
            return True
        if folded == "false":
            return False
        return Error.VALUE
    raise TypeError(f"not a scalar: {v!r}")


def coerce(value: Scalar, target: str) -> Scalar:
    """Coerce a scalar to ``number``, ``text`` or ``boolean``.

    Errors pass through unchanged; failed coercions yield ``#VALUE!``.
    """
    if isinstance(value, Array):
        raise TypeError("coerce takes a scalar; collapse arrays first")
    if target == "number":
        return to_number(value)
    if target == "text":
        return to_text(value)
    if target == "boolean":
        return to_boolean(value)
    raise ValueError(f"unknown coercion target {target!r}")


# ---------------------------------------------------------------------------
# Cell contents
# ---------------------------------------------------------------------------


@dataclass
class Literal:
    value: Scalar


@dataclass
class Formula:
    source: str
    ast: Any


@dataclass
class TableBody:
    """Body cell owned by a data table; written only by table evaluation."""

    table_id: int


Content = Union[Literal, Formula, TableBody, None]


@dataclass
class Cell:
    content: Content
    cached: Value = None


# ---------------------------------------------------------------------------
# Sheets, workbooks, workspaces
# ---------------------------------------------------------------------------


class Sheet:
    """A sparse grid of cells, keyed by (row, column)."""

    def __init__(self, name: str) -> None:
        _check_name("sheet", name)
        self.name = name
        self.cells: dict[tuple[int, int], Cell] = {}

    def cell(self, row: int, col: int) -> Cell | None:
        return self.cells.get((row, col))

    def value(self, row: int, col: int) -> Value:
        cell = self.cells.get((row, col))
        return None if cell is None else cell.cached

    def set_content(self, row: int, col: int, content: Content) -> Cell:
        """Replace a cell's content; ``None`` clears the cell."""
        if content is None:
            self.cells.pop((row, col), None)
            return Cell(None)
        cell = self.cells.get((row, col))
        if cell is None:
            cell = self.cells[(row, col)] = Cell(content)
        else:
            cell.content = content
            cell.cached = None
        if isinstance(content, Literal):
            cell.cached = content.value
        return cell

    def bounds(self) -> tuple[int, int] | None:
        """(max_row, max_col) over populated cells, or None when empty."""
        if not self.cells:
            return None
        rows = max(r for r, _ in self.cells)
        cols = max(c for _, c in self.cells)
        return rows, cols


class Workbook:
    def __init__(self, name: str) -> None:
        _check_name("workbook", name)
        self.name = name
        self._sheets: dict[str, Sheet] = {}

    def sheets(self) -> list[Sheet]:
        return list(self._sheets.values())

    def sheet(self, name: str) -> Sheet | None:
        return self._sheets.get(name.casefold())

    def ensure_sheet(self, name: str) -> Sheet:
        sheet = self._sheets.get(name.casefold())
        if sheet is None:
            sheet = self._sheets[name.casefold()] = Sheet(name)
        return sheet

    def sheet_index(self, name: str) -> int:
        return list(self._sheets).index(name.casefold())


@dataclass
class CalcConfig:
    """Calculation options.

    ``table_recalc`` controls whether data tables run on every recalc
    (``auto``) or only on an explicit trigger (``manual``). ``iterative``
    enables bounded fixed-point evaluation of circular references.
    """

    table_recalc: str = "auto"
    iterative: bool = False
    max_iterations: int = 100
    max_change: float = 0.001

    def __post_init__(self) -> None:
        if self.table_recalc not in ("auto", "manual"):
            raise ValueError(f"table_recalc must be 'auto' or 'manual', got {self.table_recalc!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.max_change < 0:
            raise ValueError("max_change must be >= 0")


# Names that can never be defined names: boolean literals and error codes.
_RESERVED_WORDS = {"true", "false"} | {c.casefold() for c in ERROR_CODES}

_DEFINED_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


class Workspace:
    """A set of named workbooks plus defined names, tables, and config."""

    def __init__(self, config: CalcConfig | None = None) -> None:
        self._workbooks: dict[str, Workbook] = {}
        self.defined_names: dict[str, tuple[str, Reference]] = {}
        self.tables: list[Any] = []
        self.config = config if config is not None else CalcConfig()

    # -- workbooks / sheets -------------------------------------------------

    def workbooks(self) -> list[Workbook]:
        return list(self._workbooks.values())

    def workbook(self, name: str) -> Workbook | None:
        return self._workbooks.get(name.casefold())

    def add_workbook(self, name: str) -> Workbook:
        key = name.casefold()
        if key in self._workbooks:
            raise ValueError(f"workbook {name!r} already exists")
        wb = self._workbooks[key] = Workbook(name)
        return wb

    def resolve_sheet(self, addr: CellAddress) -> Sheet | None:
        wb = self._workbooks.get(addr.workbook.casefold())
        if wb is None:
            return None
        return wb.sheet(addr.sheet)

    def cell(self, addr: CellAddress) -> Cell | None:
        sheet = self.resolve_sheet(addr)
        return None if sheet is None else sheet.cell(addr.row, addr.column)

    def value(self, addr: CellAddress) -> Value:
        cell = self.cell(addr)
        return None if cell is None else cell.cached

    def set_content(self, addr: CellAddress, content: Content) -> Cell:
        sheet = self.resolve_sheet(addr)
        if sheet is None:
            raise KeyError(f"no sheet at {addr!r}")
        return sheet.set_content(addr.row, addr.column, content)

    # -- defined names ------------------------------------------------------

    def define_name(self, name: str, target: Reference) -> None:
        """Register a defined name for a cell or range.

        Names are unique case-insensitively, must not look like cell
        references, and must not collide with builtin function names.
        """
        if not _DEFINED_NAME_RE.match(name):
            raise ValueError(f"invalid defined name {name!r}")
        if _CELL_PART_RE.match(name):
            raise ValueError(f"defined name {name!r} looks like a cell reference")
        key = name.casefold()
        if key in _RESERVED_WORDS:
            raise ValueError(f"defined name {name!r} is reserved")
        from . import functions  # local import: functions depends on this module

        if key in functions.BUILTIN_NAME_KEYS:
            raise ValueError(f"defined name {name!r} collides with a builtin function")
        if key in self.defined_names:
            raise ValueError(f"defined name {name!r} already exists")
        self.defined_names[key] = (name, target)

    def resolve_name(self, name: str) -> Reference | None:
        entry = self.defined_names.get(name.casefold())
        return None if entry is None else entry[1]

    # -- tables -------------------------------------------------------------

    def table(self, table_id: int):
        return self.tables[table_id]
