"""Smoke test for the tubelab extension module.

Build first with
    cargo build -p tubelab-py --features extension-module
then run
    python3 python/smoke_test.py [path/to/libtubelab_py.so]
"""

import json
import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_module(lib):
    tmp = tempfile.mkdtemp()
    shutil.copy(lib, os.path.join(tmp, "tubelab.so"))
    sys.path.insert(0, tmp)
    import tubelab

    return tubelab


def main():
    lib = sys.argv[1] if len(sys.argv) > 1 else os.path.join(ROOT, "target", "debug", "libtubelab_py.so")
    tl = load_module(lib)

    assert abs(tl.ball_eigenvalue(1, 0) - math.pi**2 / 4) < 1e-10
    assert abs(tl.eps_star(1) - math.sqrt(3) / 2) < 1e-12

    circle = tl.Geometry("CircleInPlane", [1.0])
    assert circle.codim == 1 and circle.dim == 1
    assert abs(circle.effective_potential([0.3]) + 0.25) < 1e-10
    sphere = tl.Geometry("SphereInR3", [1.0])
    assert abs(sphere.effective_potential([1.0, 0.5])) < 1e-10

    try:
        tl.Geometry("Torus", [1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("unknown kind accepted")

    spec = tl.tube_spectrum(circle, 0.1, k=4, n_x=32, n_fiber=12)
    assert len(spec) == 4
    for got, want in zip(spec.eigenvalues, [-0.25, 0.75, 0.75, 3.75]):
        assert abs(got - want) < 0.1, (got, want)
    assert max(spec.residuals) <= 1e-8

    limit = tl.limit_spectrum(circle, k=4, n_x=64)
    assert tl.exact_limit_spectrum(circle, 4) == [-0.25, 0.75, 0.75, 3.75]
    assert abs(limit.eigenvalues[0] + 0.25) < 1e-8

    config = """
[geometry]
kind = "CircleInPlane"
params = [1.0]
[grid]
n_x = 32
n_fiber = 12
refine = false
[study]
epsilons = [0.2, 0.1]
k = 2
"""
    report, table = tl.convergence_study(config)
    report = json.loads(report)
    assert report["contract"]["passed"], report["contract"]
    lines = table.strip().split("\n")
    assert lines[0] == "epsilon,k,lambda_eps,mu_limit,abs_err,grid_nx,grid_nfiber,lambda0_h"
    assert len(lines) == 1 + 2 * 2

    asym = json.loads(tl.asymptotics_check(circle, [0.2, 0.1, 0.05]))
    assert all(s >= 0.9 for s in asym["slopes"]), asym["slopes"]

    print("python smoke test passed")


if __name__ == "__main__":
    main()
