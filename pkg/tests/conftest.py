from pathlib import Path

import pytest

from dfikit.labels import LabelOrder
from dfikit.parser import parse_file

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"

GOLDEN_ACCEPTED = ("example1", "example2_lowexec", "example2_highsetup")
ATTACKS = {
    "attack_write_copy": "write",
    "attack_copy_exec": "execute",
    "attack_unprotect": "un/protect",
    "attack_copy_protect_exec": "execute",
}


def program(name: str):
    return parse_file(PROGRAMS / f"{name}.dfi")


@pytest.fixture
def order4():
    return LabelOrder(["Low", "Medium", "High", "Top"])


@pytest.fixture
def order3():
    return LabelOrder(["Low", "Medium", "High"])
