"""Central finite-difference gradient oracle.

Runs in float64 (the layers accept either width); the analytic gradients
under test must match these numerical ones to the stated relative error.
"""

import numpy as np

STEP = 1e-5


def numerical_grad(f, x, step=STEP):
    """Central differences of scalar f w.r.t. ndarray x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.ravel()
    gflat = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(x)
        flat[i] = orig - step
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return g


def rel_err(analytic, numerical, floor=1e-6):
    """Max elementwise |a - n| / max(floor, |a| + |n|)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numerical, dtype=np.float64)
    denom = np.maximum(floor, np.abs(a) + np.abs(n))
    return float(np.max(np.abs(a - n) / denom))
