"""Independent reference implementations used only by the tests."""
import numpy as np


def brute_force_crossings(x, y) -> int:
    """Proper crossings between non-adjacent edges of a closed polygon, by orientation signs."""
    p = np.column_stack([x, y]).astype(float)
    q = np.roll(p, -1, axis=0)
    n = len(p)
    count = 0

    def orient(a, b, c):
        return np.sign((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))

    for k in range(n):
        j = np.arange(k + 2, n)
        if k == 0:
            j = j[j != n - 1]
        if len(j) == 0:
            continue
        a, b = p[k], q[k]
        c, d = p[j], q[j]
        o1 = orient(a, b, c)
        o2 = orient(a, b, d)
        o3 = orient(c, d, a[None, :])
        o4 = orient(c, d, b[None, :])
        count += int(np.sum((o1 * o2 < 0) & (o3 * o4 < 0)))
    return count


def ellipse_cycle(a, b, phi, n=256):
    t = 2 * np.pi * np.arange(n) / n
    return a * np.sin(t), b * np.sin(t - phi)
