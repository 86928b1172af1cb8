import importlib

import pytest

from medianlab import _pykernels, mechanisms, norms, optfac

try:
    _ckernels = importlib.import_module("medianlab._ckernels")
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = ["python"] + (["cython"] if _ckernels is not None else [])
_MODULES = (norms, mechanisms, optfac)

# criterion number -> (passed, description); filled by test_acceptance.py
ACCEPTANCE: dict = {}


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available kernel implementation."""
    impl = _pykernels if request.param == "python" else _ckernels
    for mod in _MODULES:
        monkeypatch.setattr(mod, "kernels", impl)
    return request.param


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, desc = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {desc}")
