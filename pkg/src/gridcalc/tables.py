"""One-input what-if data tables and the function-call convention they carry.

A declared table region holds result formulas along one edge, candidate
input values along the other, and a body of locked cells. Evaluating the
table substitutes each candidate into the input cell, recomputes the input
cell's dependents, collects the result formulas' values into the body row,
and finally restores the input cell's original content.

Body cells of *every* table are frozen during any table's evaluation (they
carry no formulas, so no recomputation can reach them). That one rule makes
scheduling sequential-and-isolated and means calls can neither nest nor
recurse: an inner table read by an outer function body keeps its stale
values for the whole outer evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    CellAddress,
    Literal,
    RangeRef,
    TableBody,
    Workspace,
    values_equal,
)

COLUMN_INPUT = "col"
ROW_INPUT = "row"


class TableError(ValueError):
    """A data-table declaration violates the region rules."""


class TableIntegrityError(ValueError):
    """An edit tried to change part of a data table's body."""


@dataclass(frozen=True)
class DataTableRegion:
    """A declared one-input data table.

    ``col`` orientation: result formulas in the region's first row (columns
    2..C), input values in its first column (rows 2..R), body in between,
    rendered ``{=TABLE(,A2)}``. ``row`` orientation is the transpose,
    rendered ``{=TABLE(A2,)}``. A 2x2 region is a single function call:
    one result link, one argument cell, one result cell.
    """

    table_id: int
    region: RangeRef
    orientation: str
    input_cell: CellAddress

    @property
    def anchor(self) -> CellAddress:
        return self.region.top_left

    def formula_cells(self) -> list[CellAddress]:
        tl, br = self.region.top_left, self.region.bottom_right
        if self.orientation == COLUMN_INPUT:
            return [
                CellAddress(tl.workbook, tl.sheet, c, tl.row)
                for c in range(tl.column + 1, br.column + 1)
            ]
        return [
            CellAddress(tl.workbook, tl.sheet, tl.column, r)
            for r in range(tl.row + 1, br.row + 1)
        ]

    def value_cells(self) -> list[CellAddress]:
        tl, br = self.region.top_left, self.region.bottom_right
        if self.orientation == COLUMN_INPUT:
            return [
                CellAddress(tl.workbook, tl.sheet, tl.column, r)
                for r in range(tl.row + 1, br.row + 1)
            ]
        return [
            CellAddress(tl.workbook, tl.sheet, c, tl.row)
            for c in range(tl.column + 1, br.column + 1)
        ]

    def body_address(self, value_index: int, formula_index: int) -> CellAddress:
        tl = self.region.top_left
        if self.orientation == COLUMN_INPUT:
            return CellAddress(
                tl.workbook,
                tl.sheet,
                tl.column + 1 + formula_index,
                tl.row + 1 + value_index,
            )
        return CellAddress(
            tl.workbook,
            tl.sheet,
            tl.column + 1 + value_index,
            tl.row + 1 + formula_index,
        )

    def body_cells(self) -> list[CellAddress]:
        tl, br = self.region.top_left, self.region.bottom_right
        return [
            CellAddress(tl.workbook, tl.sheet, c, r)
            for r in range(tl.row + 1, br.row + 1)
            for c in range(tl.column + 1, br.column + 1)
        ]

    def marker_text(self) -> str:
        """Body-cell display text, e.g. ``{=TABLE(,A2)}`` for column input."""
        local = self.input_cell.local_text()
        if self.orientation == COLUMN_INPUT:
            return "{=TABLE(," + local + ")}"
        return "{=TABLE(" + local + ",)}"


def declare_table(
    ws: Workspace, region: RangeRef, orientation: str, input_cell: CellAddress
) -> DataTableRegion:
    """Register a data table and convert its body cells to locked cells.

    The result formulas and input values must already be in place; body
    cells must be empty. Rejected: regions smaller than 2x2, overlap with
    an existing table, an input cell inside the region or on another sheet.
    """
    if orientation not in (COLUMN_INPUT, ROW_INPUT):
        raise TableError(f"unknown orientation {orientation!r}")
    if region.n_rows < 2 or region.n_cols < 2:
        raise TableError(f"table region {region!r} must be at least 2x2")
    tl = region.top_left
    sheet = ws.resolve_sheet(tl)
    if sheet is None:
        raise TableError(f"table region {region!r} names a missing sheet")
    if (input_cell.workbook.casefold(), input_cell.sheet.casefold()) != (
        tl.workbook.casefold(),
        tl.sheet.casefold(),
    ):
        raise TableError("the input cell must be on the same sheet as the table")
    if region.contains(input_cell):
        raise TableError("the input cell cannot lie inside the table region")
    for other in ws.tables:
        if other.region.overlaps(region):
            raise TableError(f"table region {region!r} overlaps {other.region!r}")
    input_existing = ws.cell(input_cell)
    if input_existing is not None and isinstance(input_existing.content, TableBody):
        raise TableError("the input cell is part of another table's body")
    table = DataTableRegion(len(ws.tables), region, orientation, input_cell)
    for addr in table.body_cells():
        cell = sheet.cell(addr.row, addr.column)
        if cell is not None and cell.content is not None:
            raise TableError(f"table body cell {addr!r} is not empty")
    for addr in table.body_cells():
        sheet.set_content(addr.row, addr.column, TableBody(table.table_id))
    ws.tables.append(table)
    return table


def _write_input(ws: Workspace, addr: CellAddress, value) -> None:
    sheet = ws.resolve_sheet(addr)
    if value is None:
        sheet.set_content(addr.row, addr.column, None)
    else:
        sheet.set_content(addr.row, addr.column, Literal(value))


def evaluate_table(engine, table: DataTableRegion, stats) -> set:
    """Run the substitute/recompute/collect/restore cycle for one table.

    For each candidate value, in order: write it into the input cell as a
    literal, recompute the input cell's dependents (all table bodies stay
    frozen), and copy each result formula's value into the matching body
    cell. Afterwards the input cell's original content is restored and its
    dependents recomputed once more, so nothing outside table bodies keeps
    any trace of the passes. Returns the body cells whose value changed.
    """
    ws = engine.workspace
    plan = engine.dependents_plan(table.input_cell)
    sheet = ws.resolve_sheet(table.input_cell)
    saved_cell = sheet.cell(table.input_cell.row, table.input_cell.column)
    saved = None if saved_cell is None else (saved_cell.content, saved_cell.cached)
    values = [ws.value(a) for a in table.value_cells()]  # snapshot before any pass
    formula_addrs = table.formula_cells()
    changed: set = set()
    for i, v in enumerate(values):
        _write_input(ws, table.input_cell, v)
        engine.run_plan(plan, stats)
        for j, faddr in enumerate(formula_addrs):
            result = ws.value(faddr)
            body = ws.cell(table.body_address(i, j))
            if not values_equal(body.cached, result):
                changed.add(table.body_address(i, j))
            body.cached = result
        stats.body_passes += 1
    if saved is None:
        _write_input(ws, table.input_cell, None)
    else:
        restored = sheet.set_content(table.input_cell.row, table.input_cell.column, saved[0])
        restored.cached = saved[1]
    engine.run_plan(plan, stats)
    stats.table_restores += 1
    return changed


def schedule_tables(engine, stats) -> set:
    """Evaluate every table, strictly one after another, in position order:
    workbook name, sheet position, anchor row, anchor column. Each table
    restores the shared input cell before the next one starts, so the final
    state does not depend on how many tables share an input."""
    ws = engine.workspace

    def key(table: DataTableRegion):
        tl = table.region.top_left
        wb = ws.workbook(tl.workbook)
        return (tl.workbook.casefold(), wb.sheet_index(tl.sheet), tl.row, tl.column)

    changed: set = set()
    for table in sorted(ws.tables, key=key):
        changed |= evaluate_table(engine, table, stats)
    return changed
