"""Pure-numpy GRU sequence kernel (fallback backend).

Cell convention, applied left to right with h_0 = 0:

    z_t = sigmoid(x_t Wz + h_{t-1} Uz + bz)
    r_t = sigmoid(x_t Wr + h_{t-1} Ur + br)
    n_t = tanh(x_t Wn + (r_t * h_{t-1}) Un + bn)
    h_t = (1 - z_t) * h_{t-1} + z_t * n_t

Sequences are left-aligned; for rows where t >= lengths[b] the hidden state
is carried through unchanged and the cached gates are zeroed, which makes
the backward pass correct with no masking of its own.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gru_forward(x, lengths, wz, wr, wn, uz, ur, un, bz, br, bn):
    """Run the recurrence over a batch.

    x: [B, T, I] float64, lengths: [B] int64.
    Returns (h, z, r, n), each [B, T, H].
    """
    B, T, _ = x.shape
    H = wz.shape[1]
    lengths = np.asarray(lengths, dtype=np.int64)
    xz = x @ wz + bz
    xr = x @ wr + br
    xn = x @ wn + bn
    h = np.zeros((B, T, H))
    z = np.zeros((B, T, H))
    r = np.zeros((B, T, H))
    n = np.zeros((B, T, H))
    hprev = np.zeros((B, H))
    for t in range(T):
        zt = _sigmoid(xz[:, t] + hprev @ uz)
        rt = _sigmoid(xr[:, t] + hprev @ ur)
        nt = np.tanh(xn[:, t] + (rt * hprev) @ un)
        ht = (1.0 - zt) * hprev + zt * nt
        valid = (t < lengths)[:, None]
        zt = np.where(valid, zt, 0.0)
        rt = np.where(valid, rt, 0.0)
        nt = np.where(valid, nt, 0.0)
        ht = np.where(valid, ht, hprev)
        z[:, t], r[:, t], n[:, t], h[:, t] = zt, rt, nt, ht
        hprev = ht
    return h, z, r, n


def gru_backward(g, x, lengths, h, z, r, n, wz, wr, wn, uz, ur, un):
    """Backpropagate through the recurrence.

    g: upstream gradient on h, [B, T, H]. Returns
    (dx, dwz, dwr, dwn, duz, dur, dun, dbz, dbr, dbn).

    Zeroed gate caches at padded steps make every padded step contribute
    exactly an identity pass-through for the hidden-state gradient.
    """
    B, T, _ = x.shape
    dx = np.zeros_like(x)
    dwz, dwr, dwn = np.zeros_like(wz), np.zeros_like(wr), np.zeros_like(wn)
    duz, dur, dun = np.zeros_like(uz), np.zeros_like(ur), np.zeros_like(un)
    H = wz.shape[1]
    dbz, dbr, dbn = np.zeros(H), np.zeros(H), np.zeros(H)
    carry = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = g[:, t] + carry
        hprev = h[:, t - 1] if t > 0 else np.zeros((B, H))
        zt, rt, nt = z[:, t], r[:, t], n[:, t]
        dz = dh * (nt - hprev)
        dn = dh * zt
        dhp = dh * (1.0 - zt)
        dan = dn * (1.0 - nt * nt)
        drh = dan @ un.T
        dr = drh * hprev
        dhp = dhp + drh * rt
        daz = dz * zt * (1.0 - zt)
        dar = dr * rt * (1.0 - rt)
        dx[:, t] = dan @ wn.T + daz @ wz.T + dar @ wr.T
        xt = x[:, t]
        dwz += xt.T @ daz
        dwr += xt.T @ dar
        dwn += xt.T @ dan
        duz += hprev.T @ daz
        dur += hprev.T @ dar
        dun += (rt * hprev).T @ dan
        dbz += daz.sum(axis=0)
        dbr += dar.sum(axis=0)
        dbn += dan.sum(axis=0)
        carry = dhp + daz @ uz.T + dar @ ur.T
    return dx, dwz, dwr, dwn, duz, dur, dun, dbz, dbr, dbn
