"""Locality and layering checks on the package structure."""
import ast
import inspect
from pathlib import Path

import pairfringe
from pairfringe import interferometer

SRC = Path(pairfringe.__file__).parent


def _names(fn):
    tree = ast.parse(inspect.getsource(fn))
    return {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)} | {
        n.attr for n in ast.walk(tree) if isinstance(n, ast.Attribute)}


def test_signal_route_never_sees_the_filter():
    params = inspect.signature(interferometer.route_signal).parameters
    assert "filt" not in params
    used = _names(interferometer.route_signal)
    assert not used & {"transmission", "FilterSpec", "idler_wavelength", "idler_outcome"}


def test_idler_route_never_sees_the_interferometer():
    params = inspect.signature(interferometer.route_idler).parameters
    assert "cfg" not in params
    used = _names(interferometer.route_idler)
    assert not used & {"michelson_probabilities", "MichelsonConfig", "path_difference",
                       "signal_wavelength", "signal_outcome"}


def _imports(module_file):
    tree = ast.parse(module_file.read_text())
    out = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.ImportFrom) and node.level == 1 and node.module:
            out.add(node.module)
    return out


def test_layering():
    # physics modules never reach up into the drivers
    upper = {"cli", "experiment", "config"}
    for name in ("spectral", "pair_source", "interferometer", "coincidence", "analysis",
                 "subpackets"):
        assert not _imports(SRC / f"{name}.py") & upper, name
    assert "interferometer" not in _imports(SRC / "spectral.py")
