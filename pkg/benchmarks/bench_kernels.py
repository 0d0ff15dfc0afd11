#!/usr/bin/env python3
"""Compare the compiled kernel backend against the pure-numpy fallback.

The kernel module picks its backend once, at import time, from the
``NILCERT_DISABLE_NUMBA`` environment variable.  This script therefore
times whichever backend the current process imported and, when run as
the parent, re-executes itself with the flag set to collect the
fallback column, then prints both with per-kernel speedups and a
numerical agreement check.

Usage::

    python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

_CHILD_FLAG = "NILCERT_BENCH_CHILD"


def build_workloads():
    """Named closures over pre-built inputs; each returns a checksum."""
    from nilcert import _kernels as K
    from nilcert.algebraic_core import EigenData, IntegerMatrixSpec
    from nilcert.deformation import RotationPlane, make_profile
    from nilcert.nilmanifold import AutomorphismSpec

    eig = EigenData.from_matrix(
        IntegerMatrixSpec.from_rows([[2, -3, 1], [-3, 6, -2], [1, -2, 1]])
    )
    auto = AutomorphismSpec.from_eigendata(eig)
    diag = np.asarray(auto.diag, dtype=float)
    plane = RotationPlane.from_basis_indices(3, 8)
    profile = make_profile(1.1390942143376726, 0.05)
    params = profile.params

    rng = np.random.default_rng(0)
    pairs = rng.uniform(-1.0, 1.0, size=(5000, 2, 9))
    points = rng.normal(size=(2000, 9))
    radii = rng.uniform(1e-4, profile.support_radius * 1.1, size=2000)
    points *= (radii / np.linalg.norm(points, axis=1))[:, None]

    base = plane.rotation_matrix(0.7) @ np.diag(diag)
    m2 = base @ base / 4.16**2
    s_tgt = m2.T @ m2 - np.eye(9)
    inv = np.linalg.inv(m2)
    s_img = np.eye(9) - inv.T @ inv

    thetas = np.linspace(0.0, 1.1390942143376726, 256)

    jac_stacks = rng.normal(size=(40, 60, 9, 9)) * 0.2 + np.eye(9)
    q0 = np.eye(9)[:, :4].copy()

    def bench_bch():
        acc = 0.0
        for u, v in pairs:
            acc += K.bch9(u, v)[2]
        return acc

    def bench_h_jacobian():
        acc = 0.0
        for x in points:
            acc += K.h_jacobian(x, params, plane.e1, plane.e2)[0, 0]
        return acc

    def bench_containment():
        acc = 0.0
        for _ in range(300):
            margin, lam = K.containment_margin(s_img, s_tgt, 8.0, 1e-12)
            acc += margin + lam
        return acc

    def bench_grid():
        out = K.grid_domination_margins(
            diag, thetas, 2, 4.163540550450228, plane.e1, plane.e2, 8.0, 1e-12
        )
        return float(out.sum())

    def bench_qr_transport():
        acc = 0.0
        for jacs in jac_stacks:
            q = K.qr_product_forward(jacs, q0)
            acc += float(np.abs(q).sum())
        return acc

    return K, [
        ("group product x5000", bench_bch),
        ("rotation jacobian x2000", bench_h_jacobian),
        ("cone margin x300", bench_containment),
        ("domination grid 256", bench_grid),
        ("bundle transport x40", bench_qr_transport),
    ]


def run_suite(repeat: int) -> dict:
    kernels, workloads = build_workloads()
    kernels.warm_up()
    results = {"_backend": "numba" if kernels.USING_NUMBA else "numpy"}
    for name, fn in workloads:
        fn()  # warm call: JIT/cache load outside the timed window
        best = float("inf")
        checksum = 0.0
        for _ in range(repeat):
            t0 = time.perf_counter()
            checksum = fn()
            best = min(best, time.perf_counter() - t0)
        results[name] = {"seconds": best, "checksum": checksum}
    return results


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--repeat", type=int, default=3, help="timed repetitions per kernel"
    )
    args = parser.parse_args()

    if os.environ.get(_CHILD_FLAG):
        print(json.dumps(run_suite(args.repeat)))
        return 0

    mine = run_suite(args.repeat)
    if mine["_backend"] != "numba":
        print(
            "note: compiled backend unavailable in this process "
            "(NILCERT_DISABLE_NUMBA set or numba missing); timing the "
            "fallback only.\n"
        )

    env = dict(os.environ)
    env["NILCERT_DISABLE_NUMBA"] = "1"
    env[_CHILD_FLAG] = "1"
    child = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--repeat", str(args.repeat)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    theirs = json.loads(child.stdout)

    name_w = max(len(n) for n in mine if not n.startswith("_"))
    header = (
        f"{'kernel':<{name_w}}  {mine['_backend']:>10}  "
        f"{theirs['_backend']:>10}  {'speedup':>8}  agree"
    )
    print(header)
    print("-" * len(header))
    for name in mine:
        if name.startswith("_"):
            continue
        a, b = mine[name], theirs[name]
        speed = b["seconds"] / a["seconds"] if a["seconds"] > 0 else float("inf")
        scale = max(1.0, abs(a["checksum"]))
        agree = abs(a["checksum"] - b["checksum"]) <= 1e-9 * scale
        print(
            f"{name:<{name_w}}  {a['seconds']:>9.4f}s  {b['seconds']:>9.4f}s  "
            f"{speed:>7.1f}x  {'yes' if agree else 'NO'}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
