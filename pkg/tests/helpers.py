"""Shared oracles for the test suite: central finite differences and the
relative-error measure used by every gradient check."""

import numpy as np


def numeric_grad(f, arrays, h=1e-5):
    """Central-difference gradient of scalar f() w.r.t. each array.

    f must recompute the forward pass from the arrays' current contents;
    entries are perturbed in place and restored.
    """
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            fp = f()
            flat[i] = keep - h
            fm = f()
            flat[i] = keep
            gf[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def numeric_grad_at(f, arrays, coords, h=1e-5):
    """Like numeric_grad but only at the given (array_index, flat_index) coords."""
    out = []
    for ai, fi in coords:
        flat = arrays[ai].reshape(-1)
        keep = flat[fi]
        flat[fi] = keep + h
        fp = f()
        flat[fi] = keep - h
        fm = f()
        flat[fi] = keep
        out.append((fp - fm) / (2.0 * h))
    return np.array(out)


def rel_err(a, b):
    """max |a-b| / max(|a|+|b|, 1e-8), elementwise."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0:
        return 0.0
    num = np.abs(a - b)
    den = np.maximum(np.abs(a) + np.abs(b), 1e-8)
    return float((num / den).max())


def conv2d_loops(x, w, b, padding):
    """Direct six-loop convolution oracle."""
    cin, h, wid = x.shape
    cout, cin2, k, k2 = w.shape
    assert cin == cin2 and k == k2
    p = padding
    xp = np.pad(x, ((0, 0), (p, p), (p, p)))
    ho, wo = h + 2 * p - k + 1, wid + 2 * p - k + 1
    out = np.zeros((cout, ho, wo))
    for co in range(cout):
        for i in range(ho):
            for j in range(wo):
                acc = b[co]
                for ci in range(cin):
                    for di in range(k):
                        for dj in range(k):
                            acc += xp[ci, i + di, j + dj] * w[co, ci, di, dj]
                out[co, i, j] = acc
    return out
