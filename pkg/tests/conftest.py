from __future__ import annotations

from pathlib import Path

import pytest

from gridcalc import CalcConfig, Engine, load_workspace
from gridcalc.bench import asset_path

ALL_WORKBOOK_ASSETS = [
    "isbn_basic.gwb",
    "isbn_byref.gwb",
    "lib.gwb",
    "book2.gwb",
    "bench_body.gwb",
]


def assets(*names) -> list[Path]:
    return [asset_path(n) for n in names]


def load_assets(*names, config: CalcConfig | None = None):
    return load_workspace(assets(*names), config)


def engine_for(*names, config: CalcConfig | None = None) -> Engine:
    return Engine(load_assets(*names, config=config))


@pytest.fixture
def basic_engine() -> Engine:
    return engine_for("isbn_basic.gwb")


@pytest.fixture
def demo_engine() -> Engine:
    return Engine(load_workspace([asset_path("demo.gws")]))
