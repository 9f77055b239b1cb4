"""Pure numpy versions of the compiled kernels in ``_ckernels.pyx``.

Same signatures and results.  Used automatically when the extension is not
built, or when ``MLLC_PURE_PYTHON=1`` is set.
"""

import numpy as np

BACKEND = "python"


def labeling_scores(h):
    h = np.asarray(h, dtype=float)
    l = h.shape[0]
    m = np.arange(1 << l)[:, None]
    signs = np.where((m >> np.arange(l)) & 1, 1.0, -1.0)
    return signs @ h


def chain_forward_backward(wplus, wminus):
    wplus = np.asarray(wplus, dtype=float)
    wminus = np.asarray(wminus, dtype=float)
    # one state per position: both arcs leave k and enter k + 1
    step = np.logaddexp(wplus, wminus)
    alpha = np.concatenate(([0.0], np.cumsum(step)))
    beta = np.concatenate((np.cumsum(step[::-1])[::-1], [0.0]))
    logz = alpha[-1]
    pp = np.exp(alpha[:-1] + wplus + beta[1:] - logz)
    pm = np.exp(alpha[:-1] + wminus + beta[1:] - logz)
    return np.clip(pp - pm, -1.0, 1.0), float(logz)


def sparse_scores(W, idx, vals):
    return W[:, idx] @ vals


def mllog_coefs(s, l1, l2, use_wfa=False):
    if use_wfa:
        q, _ = chain_forward_backward(s, -s)
    else:
        q = np.tanh(s)
    return l1 * q - l2


def mllog_sparse_grad(W, idx, vals, l1, l2, use_wfa=False):
    g = mllog_coefs(W[:, idx] @ vals, l1, l2, use_wfa)
    return g, np.outer(g, vals)


def mllog_sgd_step(W, idx, vals, l1, l2, lr, use_wfa=False):
    s = W[:, idx] @ vals
    g = mllog_coefs(s, l1, l2, use_wfa)
    W[:, idx] -= lr * np.outer(g, vals)
    return float(np.abs(s).max()) if s.size else 0.0
