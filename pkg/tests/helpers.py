"""Independent oracle implementations used by the tests.

Everything here is deliberately written from first principles (loops,
bisection, Jacobi rotations) so it shares no code path with the package
implementations it checks.
"""

import math

import numpy as np


def erfc_inverse_bisect(y, lo=-6.0, hi=6.0, iters=200):
    """Solve erfc(x) = y by bisection on math.erfc (erfc is decreasing)."""
    f_lo = math.erfc(lo) - y
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f_mid = math.erfc(mid) - y
        if (f_lo > 0) == (f_mid > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def jacobi_eigh(a, tol=1e-12, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns (eigenvalues, eigenvectors) sorted by decreasing eigenvalue,
    eigenvectors in columns.  Convergence: all off-diagonals below
    tol * Frobenius norm.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    fro = np.sqrt((a * a).sum())
    if fro == 0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.sqrt((a * a).sum() - (np.diag(a) ** 2).sum())
        if off < tol * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) <= tol * fro / (n * n):
                    continue
                theta = 0.5 * math.atan2(2.0 * a[p, q], a[q, q] - a[p, p])
                c, s = math.cos(theta), math.sin(theta)
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    order = np.argsort(np.diag(a))[::-1]
    return np.diag(a)[order], v[:, order]


def sanitize_reference(phi):
    """Direct evaluation of the phase transform (no unwrap; inputs must be
    wrap-free): out_f = phi_f - e1*f - e2 with e1 = (phi_30 - phi_1)/(2*pi*30),
    e2 = mean(phi)."""
    phi = np.asarray(phi, dtype=np.float64)
    f = np.arange(1, 31)
    e1 = (phi[29] - phi[0]) / (2.0 * math.pi * 30.0)
    e2 = phi.mean()
    return phi - e1 * f - e2


def conv2d_loops(x, w, b):
    """Triple-loop valid cross-correlation oracle. x (B,C,H,W), w (F,C,kh,kw)."""
    bs, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    ho, wo = h - kh + 1, wd - kw + 1
    out = np.zeros((bs, f, ho, wo))
    for n in range(bs):
        for j in range(f):
            for xx in range(ho):
                for yy in range(wo):
                    acc = 0.0
                    for m in range(c):
                        for i in range(kh):
                            for k in range(kw):
                                acc += w[j, m, i, k] * x[n, m, xx + i, yy + k]
                    out[n, j, xx, yy] = acc + b[j]
    return out


def forward_loops(params, arch, x):
    """Straight-line re-implementation of the whole forward pass (train-mode
    batch norm, no dropout), using loops and explicit formulas."""
    h = x
    for i, blk in enumerate(arch.blocks, start=1):
        h = conv2d_loops(h, params[f"conv{i}_w"], params[f"conv{i}_b"])
        # batch norm per channel over batch and both spatial axes
        out = np.empty_like(h)
        for ch in range(h.shape[1]):
            vals = h[:, ch, :, :]
            mu = vals.mean()
            var = ((vals - mu) ** 2).mean()
            xhat = (vals - mu) / math.sqrt(var + arch.bn_eps)
            out[:, ch, :, :] = params[f"bn{i}_gamma"][ch] * xhat + params[f"bn{i}_beta"][ch]
        h = np.maximum(out, 0.0)
        # max pool along width
        bsz, cch, hh, ww = h.shape
        wo = (ww - blk.pool) // blk.pool_stride + 1
        pooled = np.empty((bsz, cch, hh, wo))
        for n in range(bsz):
            for ch in range(cch):
                for r in range(hh):
                    for j in range(wo):
                        s = j * blk.pool_stride
                        pooled[n, ch, r, j] = max(h[n, ch, r, s : s + blk.pool])
        h = pooled
    flat = h.reshape(h.shape[0], -1)
    scores = flat @ params["fc_w"].T + params["fc_b"]
    probs = np.empty_like(scores)
    for n in range(scores.shape[0]):
        e = np.exp(scores[n] - scores[n].max())
        probs[n] = e / e.sum()
    return probs


def gradcheck(params, grads, loss_fn, step=1e-5, floor=1e-6):
    """Central-difference check; returns the worst relative error.

    The denominator floor covers parameters whose true gradient is zero
    (conv biases feeding a train-mode batch norm), where both sides are
    dominated by floating-point noise.
    """
    worst = 0.0
    for name, g in grads.items():
        p = params[name]
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + step
            lp = loss_fn()
            p[idx] = orig - step
            lm = loss_fn()
            p[idx] = orig
            numeric = (lp - lm) / (2.0 * step)
            rel = abs(numeric - g[idx]) / max(abs(numeric) + abs(g[idx]), floor)
            worst = max(worst, rel)
    return worst


def overlap(a_start, a_end, b_start, b_end):
    return min(a_end, b_end) - max(a_start, b_start) + 1


def greedy_match_count(events, labels):
    """Count events matched one-to-one to overlapping labels."""
    used = set()
    matched = 0
    fps = 0
    for ev in events:
        hit = None
        for j, lab in enumerate(labels):
            if j in used:
                continue
            if overlap(ev.start_index, ev.end_index, lab.start_index, lab.end_index) > 0:
                hit = j
                break
        if hit is None:
            fps += 1
        else:
            used.add(hit)
            matched += 1
    return matched, fps
