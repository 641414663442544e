"""Numpy implementations of the hot kernels; used when the compiled
extension is unavailable or disabled."""
import numpy as np


def eval_terms(X, coef, out, ptr, fvar, fexp, nout):
    """Evaluate a flattened list of monomial terms at every row of ``X``.

    Term ``t`` contributes ``coef[t] * prod(X[:, fvar[f]] ** fexp[f])`` over
    factors ``f`` in ``ptr[t]:ptr[t+1]`` to column ``out[t]`` of the result.
    """
    X = np.asarray(X, dtype=float)
    B, n = X.shape
    res = np.zeros((B, nout))
    T = len(coef)
    if T == 0:
        return res
    counts = np.diff(ptr)
    # pad constant monomials with a factor that reads the appended 1.0 column
    if np.any(counts == 0):
        Xp = np.concatenate([X, np.ones((B, 1))], axis=1)
        fv, fe = [], []
        for t in range(T):
            a, b = ptr[t], ptr[t + 1]
            if a == b:
                fv.append([n])
                fe.append([1])
            else:
                fv.append(fvar[a:b])
                fe.append(fexp[a:b])
        fvar = np.concatenate(fv).astype(np.int64)
        fexp = np.concatenate(fe).astype(np.int64)
        counts = np.maximum(counts, 1)
        X = Xp
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    factors = X[:, fvar] ** fexp
    monos = np.multiply.reduceat(factors, starts, axis=1)
    vals = monos * coef
    np.add.at(res, (slice(None), out), vals)
    return res


def max_pair_norm(lam, inv, chunk=64):
    """``max_{i <= j} ||lam[j] @ inv[i]||_inf`` with the maximizing ``(i, j)``."""
    lam = np.ascontiguousarray(lam, dtype=float)
    inv = np.ascontiguousarray(inv, dtype=float)
    K, n, _ = lam.shape
    best, bi, bj = -1.0, 0, 0
    for i in range(K):
        for j0 in range(i, K, chunk):
            j1 = min(K, j0 + chunk)
            prod = lam[j0:j1].reshape(-1, n) @ inv[i]
            rows = np.abs(prod).sum(axis=1).reshape(j1 - j0, n).max(axis=1)
            k = int(np.argmax(rows))
            if rows[k] > best:
                best, bi, bj = float(rows[k]), i, j0 + k
    return best, bi, bj
