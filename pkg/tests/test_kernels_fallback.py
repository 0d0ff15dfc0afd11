"""The pure-numpy kernel fallback must match the compiled backend."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

# The kernel module fixes its backend at import time, so the fallback is
# exercised in a child process.  Both sides run this same probe.
_PROBE = """
import numpy as np
from nilcert import _kernels as K
from nilcert.deformation import RotationPlane, make_profile


def probe():
    rng = np.random.default_rng(7)
    plane = RotationPlane.from_basis_indices(3, 8)
    profile = make_profile(1.1390942143376726, 0.05)
    diag = np.array([0.28, 0.28, 0.08, 0.43, 0.43, 0.18, 8.29, 8.29, 68.7])

    u, v = rng.uniform(-1.0, 1.0, size=(2, 9))
    x = rng.normal(size=9)
    x *= 0.01 / np.linalg.norm(x)

    base = plane.rotation_matrix(0.7) @ np.diag(diag)
    m2 = base @ base / 16.0
    s_tgt = m2.T @ m2 - np.eye(9)
    inv = np.linalg.inv(m2)
    s_img = np.eye(9) - inv.T @ inv

    jacs = rng.normal(size=(5, 9, 9)) * 0.2 + np.eye(9)
    q0 = np.eye(9)[:, :4].copy()

    margin, lam = K.containment_margin(s_img, s_tgt, 8.0, 1e-12)
    grid = K.grid_domination_margins(
        diag, np.linspace(0.0, 1.1, 8), 2, 4.16, plane.e1, plane.e2, 8.0, 1e-12
    )
    return {
        "backend": "numba" if K.USING_NUMBA else "numpy",
        "bch": K.bch9(u, v).tolist(),
        "jacobian": K.h_jacobian(x, profile.params, plane.e1, plane.e2).tolist(),
        "margin": [margin, lam],
        "grid": grid.tolist(),
        "transport": K.qr_product_forward(jacs, q0).tolist(),
    }
"""


def test_fallback_matches_compiled_backend():
    ns: dict = {}
    exec(_PROBE, ns)
    mine = ns["probe"]()
    if mine["backend"] != "numba":
        pytest.skip("compiled backend unavailable in this environment")

    env = dict(os.environ)
    env["NILCERT_DISABLE_NUMBA"] = "1"
    child = subprocess.run(
        [sys.executable, "-c", _PROBE + "\nimport json\nprint(json.dumps(probe()))"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
        timeout=120,
    )
    theirs = json.loads(child.stdout)
    assert theirs["backend"] == "numpy"
    for key in ("bch", "jacobian", "margin", "grid", "transport"):
        np.testing.assert_allclose(
            np.asarray(mine[key]),
            np.asarray(theirs[key]),
            rtol=1e-12,
            atol=1e-12,
            err_msg=f"kernel output {key} differs between backends",
        )
