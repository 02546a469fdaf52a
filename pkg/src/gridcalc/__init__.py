"""gridcalc: a headless spreadsheet formula engine with what-if data tables.

Workbooks live in a plain-text format (see :mod:`gridcalc.gwb`), formulas
are evaluated over a dependency graph (:mod:`gridcalc.engine`), and data
tables provide a calling convention for spreadsheet-defined functions
(:mod:`gridcalc.tables`).
"""

from .engine import Engine, EvalStats
from .gwb import LoadError, dump_sheet, dump_workbook_source, load_workspace
from .model import (
    Array,
    CalcConfig,
    CellAddress,
    Error,
    RangeRef,
    Workspace,
    coerce,
    format_reference,
    parse_address,
)
from .tables import DataTableRegion, TableError, TableIntegrityError, declare_table

__version__ = "0.1.0"

__all__ = [
    "Array",
    "CalcConfig",
    "CellAddress",
    "DataTableRegion",
    "Engine",
    "Error",
    "EvalStats",
    "LoadError",
    "RangeRef",
    "TableError",
    "TableIntegrityError",
    "Workspace",
    "coerce",
    "declare_table",
    "dump_sheet",
    "dump_workbook_source",
    "format_reference",
    "load_workspace",
    "parse_address",
    "__version__",
]
