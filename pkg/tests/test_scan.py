import pytest

from conftest import small_mlp, small_dataset

import ola_core.constants as c
from ola_core.bug_reporter import CrashReport
from ola_core.scan import ChildProcessException, scan_dataset
from ola_core.sensitivity import DegenerateLayerError
from ola_core.util import get_processes, table, entitle, float_str, json_float, float_from_json


def chunk_size(model, chunk):
    return len(chunk)


def broken(model, chunk):
    raise RuntimeError("broken chunk")


def degenerate(model, chunk):
    raise DegenerateLayerError(2)


def test_chunks_in_order():
    model = small_mlp([2, 3, 2])
    sizes = scan_dataset(model, small_dataset(600, 2, 2), chunk_size)
    assert sizes == [256, 256, 88]


def test_workers_keep_the_chunk_order():
    model = small_mlp([2, 3, 2])
    seen = []
    sizes = scan_dataset(model, small_dataset(600, 2, 2), chunk_size, processes=2,
                         callback=lambda done, total, result: seen.append((done, total)))
    assert sizes == [256, 256, 88]
    assert seen == [(1, 3), (2, 3), (3, 3)]


def test_crash_in_a_chunk():
    with pytest.raises(ChildProcessException) as info:
        scan_dataset(small_mlp([2, 3, 2]), small_dataset(10, 2, 2), broken)
    assert info.value.chunk_index == 0
    assert "broken chunk" in info.value.printable_traceback


def test_known_errors_pass_through():
    with pytest.raises(DegenerateLayerError) as info:
        scan_dataset(small_mlp([2, 3, 2]), small_dataset(10, 2, 2), degenerate)
    assert info.value.layer == 2


def test_error_log(tmp_path):
    with pytest.raises(ChildProcessException) as info:
        scan_dataset(small_mlp([2, 3, 2]), small_dataset(10, 2, 2), broken)
    path = info.value.save_error_log(str(tmp_path / "error.log"))
    with open(path) as f:
        assert "chunk: 0" in f.read()


@pytest.mark.parametrize("value, expected", [(None, 1), ("", 1), ("x", 1), ("0", 1),
                                             ("-3", 1), ("4", 4)])
def test_processes_from_environment(monkeypatch, value, expected):
    if value is None:
        monkeypatch.delenv(c.THREADS_ENV, raising=False)
    else:
        monkeypatch.setenv(c.THREADS_ENV, value)
    assert get_processes() == expected


def test_table():
    text = table([["Layer", 1, 2], ["Degree", 15, 127]])
    lines = text.splitlines()
    assert len(lines) == 6
    assert "Degree" in lines[1] and "127" in lines[4]
    assert "Report" in entitle("Report")


def test_floats_for_json():
    assert float(float_str(0.1 + 0.2)) == 0.1 + 0.2
    assert json_float(float("inf")) == "inf"
    assert float_from_json("inf") == float("inf")
    assert float_from_json(json_float(2.5)) == 2.5


def test_crash_report_from_text(tmp_path):
    report = CrashReport("child traceback")
    assert "child traceback" in report.error_str
    assert "numpy" in report.error_str
    path = report.save(str(tmp_path / "crash.txt"))
    with open(path) as f:
        assert f.read() == report.error_str


def test_crash_report_from_the_current_exception():
    try:
        raise KeyError("missing")
    except KeyError:
        report = CrashReport()
    assert "KeyError" in report.error_str
