import numpy as np

from .exceptions import NumericalDegeneracyError


def finite_diff_grad(f, net, h=1e-5):
    """Central differences of ``f(net)`` wrt every parameter of ``net``.

    Parameters are perturbed in place and restored afterwards.
    """
    grads = []
    bad = []
    for k, p in enumerate(net.params):
        g = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            orig = p[i]
            p[i] = orig + h
            fp = f(net)
            p[i] = orig - h
            fm = f(net)
            p[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                bad.append((k, i))
                continue
            g[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    if bad:
        raise NumericalDegeneracyError(f"f not finite near parameters {bad[:10]}")
    return grads


def rel_error(a, b):
    """||a - b|| / max(||a||, ||b||, tiny) over lists of arrays."""
    a = np.concatenate([np.ravel(x) for x in a])
    b = np.concatenate([np.ravel(x) for x in b])
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / denom)
