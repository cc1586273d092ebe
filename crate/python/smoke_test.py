"""Smoke test for the lecell_py extension.

Builds the extension with cargo, loads it from a temporary directory and
exercises the separable cell, the exponent helper and the JSON interfaces.
"""

import importlib.util
import json
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "lecell-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "liblecell_py.so"
    tmp = pathlib.Path(tempfile.mkdtemp())
    target = tmp / "lecell_py.so"
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("lecell_py", target)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod, tmp


def main():
    lp, tmp = load()
    assert lp.critical_exponent(2) == 3.0

    cell = lp.SeparableCell(2, 3.2)
    assert cell.residual <= 1e-8
    assert cell.s_star > 0
    alpha, phi = cell.profile()
    assert len(alpha) == len(phi) and phi[-1] == 0.0
    assert all(v > 0 for v in phi[:-1])
    assert abs(cell.eval(0.0) - phi[0]) < 1e-12
    # u0 is homogeneous of degree -2/(p-1)
    m = 2.0 / 2.2
    a, b = cell.u0([0.1, 0.3]), cell.u0([0.2, 0.6])
    assert math.isclose(b, a * 2 ** (-m), rel_tol=1e-10)

    try:
        lp.SeparableCell(2, 3.0)
    except Exception as exc:  # critical exponent has no profile
        assert "(N+1)/(N-1)" in str(exc)
    else:
        raise AssertionError("p = 3 must be rejected for N = 2")

    passed, report = lp.verify([1, 3], True)
    rep = json.loads(report)
    assert passed and [s["id"] for s in rep["sections"]] == ["criterion-1", "criterion-3"]

    cfg = {
        "subcommand": "cell-separable",
        "dim": 2,
        "p": 3.2,
        "tol": 1e-8,
        "extension_k": None,
        "extension_samples": 10,
        "seed": 1,
        "out_dir": str(tmp / "run"),
    }
    rep = json.loads(lp.run(json.dumps(cfg)))
    assert rep["passed"]
    assert (tmp / "run" / "phi.csv").exists()
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
