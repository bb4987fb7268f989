"""Block bordering recursion for the 2x2 block-Toeplitz systems.

The system of block size n has blocks C_d = [[d==0, s*h*conj(w[-d])],
[h*w[d], d==0]] for d = i-j and right-hand side blocks (0, w[i]).  Growing
n by one reuses every previously consumed generator entry and costs O(n).

State layout (preallocated to the final capacity by the caller):
    fw, bw : (cap, 2, 2) complex128   forward / backward prediction blocks
    u      : (cap, 2)    complex128   running solution blocks
The generator array `om` holds w[d] at index off + d.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

STATUS_OK = 0
STATUS_PIVOT = 1
STATUS_RESIDUAL = 2

_EPS = float(np.finfo(float).eps)


@njit(cache=True)
def _sigma_min_2x2(a11, a12, a21, a22):
    # smallest singular value via sigma_min = |det| / sigma_max
    fro2 = (abs(a11) ** 2 + abs(a12) ** 2 + abs(a21) ** 2 + abs(a22) ** 2)
    det = a11 * a22 - a12 * a21
    adet = abs(det)
    disc = fro2 * fro2 - 4.0 * adet * adet
    if disc < 0.0:
        disc = 0.0
    smax2 = 0.5 * (fro2 + np.sqrt(disc))
    if smax2 <= 0.0:
        return 0.0
    return adet / np.sqrt(smax2)


@njit(cache=True)
def advance(om, off, h, sigma, n_start, n_stop, fw, bw, u, q_out, rho_out,
            gmax_in, pivot_factor, rho_tol):
    """Grow the recursion from block size n_start to n_stop (inclusive).

    n_start == 0 initializes at size 1 first.  Emits the recovered value
    q = 2*sigma*u[n-1,1] into q_out[n-1] and the normalized first-row
    residual into rho_out[n-1] for every size n reached.

    Returns (status, n_reached, gmax) where n_reached is the largest size
    whose solution is valid; on a nonzero status the failing size is
    n_reached + 1.
    """
    gmax = gmax_in
    n = n_start

    if n == 0:
        w0 = om[off]
        a = abs(w0)
        if a > gmax:
            gmax = a
        det = 1.0 - sigma * h * h * (w0.real * w0.real + w0.imag * w0.imag)
        smin = _sigma_min_2x2(1.0 + 0j, sigma * h * np.conj(w0), h * w0, 1.0 + 0j)
        if smin < pivot_factor * _EPS * max(1.0, h * gmax):
            return STATUS_PIVOT, 0, gmax
        inv11 = 1.0 / det
        inv12 = -sigma * h * np.conj(w0) / det
        inv21 = -h * w0 / det
        inv22 = 1.0 / det
        fw[0, 0, 0] = inv11
        fw[0, 0, 1] = inv12
        fw[0, 1, 0] = inv21
        fw[0, 1, 1] = inv22
        bw[0, 0, 0] = inv11
        bw[0, 0, 1] = inv12
        bw[0, 1, 0] = inv21
        bw[0, 1, 1] = inv22
        g1 = om[off + 1]
        a = abs(g1)
        if a > gmax:
            gmax = a
        u[0, 0] = inv12 * g1
        u[0, 1] = inv22 * g1
        q_out[0] = 2.0 * sigma * u[0, 1]
        rho_out[0] = 0.0
        n = 1

    while n < n_stop:
        # new generator entries consumed this step
        w_neg = om[off - n]
        w_new = om[off + n + 1]
        a = abs(w_neg)
        if a > gmax:
            gmax = a
        a = abs(w_new)
        if a > gmax:
            gmax = a

        # alpha = sum_j C_{n+1-j} F_j ; beta = sum_j C_{-j} B_j ;
        # gamma = sum_j C_{n+1-j} u_j   (d never hits 0 inside the sums)
        al11 = 0.0 + 0j
        al12 = 0.0 + 0j
        al21 = 0.0 + 0j
        al22 = 0.0 + 0j
        be11 = 0.0 + 0j
        be12 = 0.0 + 0j
        be21 = 0.0 + 0j
        be22 = 0.0 + 0j
        ga1 = 0.0 + 0j
        ga2 = 0.0 + 0j
        for j in range(1, n + 1):
            d = n + 1 - j
            c12 = sigma * h * np.conj(om[off - d])
            c21 = h * om[off + d]
            f = fw[j - 1]
            al11 += c12 * f[1, 0]
            al12 += c12 * f[1, 1]
            al21 += c21 * f[0, 0]
            al22 += c21 * f[0, 1]
            ga1 += c12 * u[j - 1, 1]
            ga2 += c21 * u[j - 1, 0]
            e12 = sigma * h * np.conj(om[off + j])
            e21 = h * om[off - j]
            b = bw[j - 1]
            be11 += e12 * b[1, 0]
            be12 += e12 * b[1, 1]
            be21 += e21 * b[0, 0]
            be22 += e21 * b[0, 1]

        # pivots: E - beta*alpha and E - alpha*beta share eigenvalues but
        # not singular values; check both.
        m1_11 = 1.0 - (be11 * al11 + be12 * al21)
        m1_12 = -(be11 * al12 + be12 * al22)
        m1_21 = -(be21 * al11 + be22 * al21)
        m1_22 = 1.0 - (be21 * al12 + be22 * al22)
        m2_11 = 1.0 - (al11 * be11 + al12 * be21)
        m2_12 = -(al11 * be12 + al12 * be22)
        m2_21 = -(al21 * be11 + al22 * be21)
        m2_22 = 1.0 - (al21 * be12 + al22 * be22)
        tol = pivot_factor * _EPS * max(1.0, h * gmax)
        s1 = _sigma_min_2x2(m1_11, m1_12, m1_21, m1_22)
        s2 = _sigma_min_2x2(m2_11, m2_12, m2_21, m2_22)
        if s1 < tol or s2 < tol:
            return STATUS_PIVOT, n, gmax

        d1 = m1_11 * m1_22 - m1_12 * m1_21
        x11 = m1_22 / d1
        x12 = -m1_12 / d1
        x21 = -m1_21 / d1
        x22 = m1_11 / d1
        d2 = m2_11 * m2_22 - m2_12 * m2_21
        z11 = m2_22 / d2
        z12 = -m2_12 / d2
        z21 = -m2_21 / d2
        z22 = m2_11 / d2
        # Y = -alpha X ; W = -beta Z
        y11 = -(al11 * x11 + al12 * x21)
        y12 = -(al11 * x12 + al12 * x22)
        y21 = -(al21 * x11 + al22 * x21)
        y22 = -(al21 * x12 + al22 * x22)
        w11 = -(be11 * z11 + be12 * z21)
        w12 = -(be11 * z12 + be12 * z22)
        w21 = -(be21 * z11 + be22 * z21)
        w22 = -(be21 * z12 + be22 * z22)

        # downward pass: F'_j = F_j X + B_{j-1} Y, B'_j = F_j W + B_{j-1} Z
        for j in range(n + 1, 0, -1):
            if j <= n:
                f11 = fw[j - 1, 0, 0]
                f12 = fw[j - 1, 0, 1]
                f21 = fw[j - 1, 1, 0]
                f22 = fw[j - 1, 1, 1]
            else:
                f11 = 0.0 + 0j
                f12 = 0.0 + 0j
                f21 = 0.0 + 0j
                f22 = 0.0 + 0j
            if j >= 2:
                b11 = bw[j - 2, 0, 0]
                b12 = bw[j - 2, 0, 1]
                b21 = bw[j - 2, 1, 0]
                b22 = bw[j - 2, 1, 1]
            else:
                b11 = 0.0 + 0j
                b12 = 0.0 + 0j
                b21 = 0.0 + 0j
                b22 = 0.0 + 0j
            fw[j - 1, 0, 0] = f11 * x11 + f12 * x21 + b11 * y11 + b12 * y21
            fw[j - 1, 0, 1] = f11 * x12 + f12 * x22 + b11 * y12 + b12 * y22
            fw[j - 1, 1, 0] = f21 * x11 + f22 * x21 + b21 * y11 + b22 * y21
            fw[j - 1, 1, 1] = f21 * x12 + f22 * x22 + b21 * y12 + b22 * y22
            bw[j - 1, 0, 0] = f11 * w11 + f12 * w21 + b11 * z11 + b12 * z21
            bw[j - 1, 0, 1] = f11 * w12 + f12 * w22 + b11 * z12 + b12 * z22
            bw[j - 1, 1, 0] = f21 * w11 + f22 * w21 + b21 * z11 + b22 * z21
            bw[j - 1, 1, 1] = f21 * w12 + f22 * w22 + b21 * z12 + b22 * z22

        # solution update along the new backward vector
        r1 = -ga1
        r2 = w_new - ga2
        umax = 0.0
        for j in range(n + 1):
            u[j, 0] += bw[j, 0, 0] * r1 + bw[j, 0, 1] * r2
            u[j, 1] += bw[j, 1, 0] * r1 + bw[j, 1, 1] * r2
            a = abs(u[j, 0])
            if a > umax:
                umax = a
            a = abs(u[j, 1])
            if a > umax:
                umax = a

        n += 1
        q_out[n - 1] = 2.0 * sigma * u[n - 1, 1]

        # first-row residual ties the oldest equation back to the current
        # solution; its growth tracks the loss of validity of the recursion.
        w0 = om[off]
        dx = u[0, 0] + sigma * h * np.conj(w0) * u[0, 1]
        dy = h * w0 * u[0, 0] + u[0, 1] - om[off + 1]
        for j in range(2, n + 1):
            dx += sigma * h * np.conj(om[off + j - 1]) * u[j - 1, 1]
            dy += h * om[off + 1 - j] * u[j - 1, 0]
        scale = (1.0 + h * gmax) * (1.0 + umax)
        rho = max(abs(dx), abs(dy)) / scale
        rho_out[n - 1] = rho
        if rho > rho_tol:
            return STATUS_RESIDUAL, n - 1, gmax

    return STATUS_OK, n, gmax


def materialize(om, off, h, sigma, m):
    """Dense 2m x 2m matrix in the [[E, s h T*].[h T, E]] partition plus rhs.

    Row/column order is (all X1 entries, then all Y2 entries); T* is the
    conjugate transpose of T_{ij} = w[i-j].
    """
    idx = np.arange(1, m + 1)
    d = idx[:, None] - idx[None, :]
    T = om[off + d]
    A = np.zeros((2 * m, 2 * m), dtype=complex)
    A[:m, :m] = np.eye(m)
    A[m:, m:] = np.eye(m)
    A[:m, m:] = sigma * h * T.conj().T
    A[m:, :m] = h * T
    rhs = np.zeros(2 * m, dtype=complex)
    rhs[m:] = om[off + idx]
    return A, rhs
