"""Test utils."""

import pytest

from sphverify.utils import (WriteBuffer, must_be_list, parse_value,
                             read_keyvalue_file, run_mp)


def test_write_buffer(tmp_path):
    filename = tmp_path / "lines.txt"
    with WriteBuffer(open(filename, 'w'), linenumber=2) as f:
        for ii in range(5):
            f.append(f"{ii}\n")
    assert filename.read_text() == "0\n1\n2\n3\n4\n"


def test_write_buffer_mode(tmp_path):
    with open(tmp_path / "lines.txt", 'a') as f, pytest.raises(RuntimeError):
        WriteBuffer(f)


@pytest.mark.parametrize("nproc", [1, 2])
def test_run_mp_keeps_order(nproc):
    assert list(run_mp(nproc, func=abs, l=[-3, 1, -2], unordered=False,
                       bar=False)) == [3, 1, 2]


def test_must_be_list():
    assert must_be_list(5) == [5]
    assert must_be_list((1, 2)) == [1, 2]


@pytest.mark.parametrize("text, value", [
    ("0.5", 0.5), ("[50, 100]", [50, 100]), ("true", True), ("marrone", "marrone"),
])
def test_parse_value(text, value):
    assert parse_value(text) == value


def test_read_keyvalue_file(tmp_path):
    filename = tmp_path / "study.conf"
    filename.write_text("# settings\nnu = 0.02\nmethod=adami  # wall\n\n")
    assert read_keyvalue_file(filename) == {"nu": 0.02, "method": "adami"}
    filename.write_text("nu 0.02\n")
    with pytest.raises(ValueError):
        read_keyvalue_file(filename)
