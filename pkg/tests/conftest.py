import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lielab.algebra import StructureTensor, Subspace  # noqa: E402
from lielab.fileformat import canned_names, load  # noqa: E402

ACCEPTANCE_LINES: dict[int, str] = {}


def heisenberg() -> StructureTensor:
    return StructureTensor.from_brackets(3, {(0, 1): (0, 0, 1)})


def n522() -> StructureTensor:
    return StructureTensor.from_brackets(
        5, {(0, 1): (0, 0, 0, 1, 0), (0, 3): (0, 0, 0, 0, 1), (1, 2): (0, 0, 0, 0, 1)}
    )


def n521() -> StructureTensor:
    return StructureTensor.from_brackets(
        5, {(0, 1): (0, 0, 1, 0, 0), (0, 2): (0, 0, 0, 1, 0), (0, 3): (0, 0, 0, 0, 1)}
    )


def span(n, *vectors) -> Subspace:
    return Subspace.span(vectors, n)


def coord(n, *indices) -> Subspace:
    return Subspace.coordinate(n, indices)


@pytest.fixture(params=canned_names())
def canned(request):
    return load(request.param)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
