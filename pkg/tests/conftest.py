"""
Pytest configuration: tests marked ``requires_solver`` are skipped when no
z3 binary is on the PATH.
"""

import shutil

import pytest


def pytest_collection_modifyitems(config, items):
    if shutil.which("z3") is not None:
        return
    skip = pytest.mark.skip(reason="z3 not found on PATH")
    for item in items:
        if "requires_solver" in item.keywords:
            item.add_marker(skip)
