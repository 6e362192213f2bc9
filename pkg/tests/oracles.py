"""Slow, obvious reference implementations used only by the tests.

None of these import the package; they are written from the definitions.
"""
import math

import numpy as np


def channel_sum_loop(F):
    c, h, w = F.shape
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            for k in range(c):
                out[i, j] += F[k, i, j]
    return out


def flood_fill_components(M):
    """List of components (sets of (r, c)) under 8-connectivity, via explicit BFS."""
    M = np.asarray(M)
    h, w = M.shape
    seen = np.zeros_like(M, dtype=bool)
    comps = []
    for r in range(h):
        for c in range(w):
            if M[r, c] and not seen[r, c]:
                stack, comp = [(r, c)], set()
                seen[r, c] = True
                while stack:
                    y, x = stack.pop()
                    comp.add((y, x))
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            ny, nx = y + dy, x + dx
                            if 0 <= ny < h and 0 <= nx < w and M[ny, nx] and not seen[ny, nx]:
                                seen[ny, nx] = True
                                stack.append((ny, nx))
                comps.append(comp)
    return comps


def largest_component_oracle(M):
    comps = flood_fill_components(M)
    out = np.zeros(np.shape(M), dtype=np.uint8)
    if not comps:
        return out
    w = np.shape(M)[1]

    def key(comp):
        rows = [p[0] for p in comp]
        cols = [p[1] for p in comp]
        first = min(r * w + c for r, c in comp)
        return (-len(comp), min(rows), min(cols), first)

    for r, c in min(comps, key=key):
        out[r, c] = 1
    return out


def bbox_scan(M):
    M = np.asarray(M)
    h, w = M.shape
    rmin, cmin, rmax, cmax = h, w, -1, -1
    for r in range(h):
        for c in range(w):
            if M[r, c]:
                rmin, cmin = min(rmin, r), min(cmin, c)
                rmax, cmax = max(rmax, r), max(cmax, c)
    if rmax < 0:
        return (0, 0, h - 1, w - 1)
    return (rmin, cmin, rmax, cmax)


def bilinear_pixel(img, out_h, out_w, r, c):
    """Value of output pixel (r, c): half-pixel centres, coordinates clamped at the edges."""
    in_h, in_w = img.shape[:2]
    y = min(max((r + 0.5) * in_h / out_h - 0.5, 0.0), in_h - 1)
    x = min(max((c + 0.5) * in_w / out_w - 0.5, 0.0), in_w - 1)
    y0, x0 = int(math.floor(y)), int(math.floor(x))
    y1, x1 = min(y0 + 1, in_h - 1), min(x0 + 1, in_w - 1)
    dy, dx = y - y0, x - x0
    return ((1 - dy) * (1 - dx) * img[y0, x0] + (1 - dy) * dx * img[y0, x1]
            + dy * (1 - dx) * img[y1, x0] + dy * dx * img[y1, x1])


def bilinear_resize(img, out_h, out_w):
    img = np.asarray(img, dtype=np.float64)
    out = np.zeros((out_h, out_w) + img.shape[2:])
    for r in range(out_h):
        for c in range(out_w):
            out[r, c] = bilinear_pixel(img, out_h, out_w, r, c)
    return out


def cosine(a, b, eps=1e-8):
    na = max(math.sqrt(sum(x * x for x in a)), eps)
    nb = max(math.sqrt(sum(x * x for x in b)), eps)
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def descriptors_loop(F):
    c, h, w = F.shape
    return np.array([[F[k, i, j] for k in range(c)] for i in range(h) for j in range(w)])


def correlation_loop(Ds, Dq):
    return np.array([[cosine(q, s) for s in Ds] for q in Dq])


def softmax_rows(A):
    out = []
    for row in A:
        e = [math.exp(v) for v in row]
        tot = sum(e)
        out.append([v / tot for v in e])
    return np.array(out)


def align_loop(Fs, Fq):
    Ds, Dq = descriptors_loop(Fs), descriptors_loop(Fq)
    weights = softmax_rows(correlation_loop(Ds, Dq))
    return np.array([sum(weights[i, j] * Ds[j] for j in range(len(Ds))) for i in range(len(Dq))])


def l2l_loop(Da, Dq):
    return sum(cosine(a, q) for a, q in zip(Da, Dq))


def score_loop(Fq, proto, tau, aligned=True):
    c, h, w = Fq.shape
    Da = align_loop(proto, Fq) if aligned else descriptors_loop(proto)
    return tau * l2l_loop(Da, descriptors_loop(Fq)) / (h * w)


def ce_loop(logits, label):
    m = max(logits)
    return -(logits[label] - m - math.log(sum(math.exp(v - m) for v in logits)))


def ci95_oracle(acc):
    n = len(acc)
    mean = sum(acc) / n
    var = sum((a - mean) ** 2 for a in acc) / (n - 1)
    return 1.96 * math.sqrt(var) / math.sqrt(n)


def central_difference(fn, x, eps=1e-6):
    """Gradient of scalar ``fn`` at float64 array ``x`` by central differences."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = fn(x)
        flat[i] = old - eps
        down = fn(x)
        flat[i] = old
        g[i] = (up - down) / (2 * eps)
    return grad


def max_relative_error(a, b, floor=1e-6):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))
