# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-loop stepping loop.

Mirrors ``_pyloop.run`` expression by expression (same operand order, same
libm calls) so both backends agree bitwise. Parameter vectors are produced by
``harness.kernel_arguments``.
"""

from libc.math cimport sin, cos, sqrt, isfinite
from libc.stdlib cimport malloc, free

cdef double TWO_PI = 6.283185307179586


cdef inline long pmod(long a, long b) nogil:
    cdef long r = a % b
    if r < 0:
        r += b
    return r


cdef inline double probe_sample(long j, long N, double A0) nogil:
    return A0 * sin(TWO_PI * <double>pmod(j, N) / <double>N)


cdef inline double probe_half_sample(long j, long N, double A0) nogil:
    return A0 * sin(TWO_PI * <double>(2 * pmod(j, N) + 1) / <double>(2 * N))


cdef inline double primitive_sample(long j, long N, double A0) nogil:
    return -(A0 / TWO_PI) * cos(TWO_PI * <double>pmod(j, N) / <double>N)


cdef inline double saturate(double u, double u_max) nogil:
    if u > u_max:
        return u_max
    if u < -u_max:
        return -u_max
    return u


cdef inline double signed_sqrt(double v) nogil:
    if v > 0.0:
        return sqrt(v)
    if v < 0.0:
        return -sqrt(-v)
    return 0.0


def run(double[::1] fpar, long long[::1] ipar, double[::1] noise, double[::1] qstar,
        double[:, ::1] log, double[::1] cur):
    cdef double m = fpar[0], g = fpar[1], R = fpar[2], c = fpar[3], kk = fpar[4]
    cdef double A0 = fpar[5], eps = fpar[6]
    cdef double gamma = fpar[7], a = fpar[8], gamma_R = fpar[9], gl = fpar[10], gp = fpar[11]
    cdef double ell = fpar[12], c1 = fpar[13], c2 = fpar[14], yv0 = fpar[15], R_hat0 = fpar[16]
    cdef double Kp = fpar[17], alpha = fpar[18], lam = fpar[19], u_max = fpar[20]
    cdef double Ki = fpar[21], gamma1 = fpar[22], gamma2 = fpar[23], p_star = fpar[24]
    cdef double bs_u_max = fpar[25]
    cdef double x1 = fpar[26], x2 = fpar[27], x3 = fpar[28]

    cdef long n_mult = ipar[0], N = ipar[1], n = ipar[2], every = ipar[3]
    cdef int kind = ipar[4], variant = ipar[5], true_yv = ipar[6]
    cdef int bs_truth = ipar[7], bs_true_R = ipar[8]

    cdef double h = eps / <double>N
    cdef long n_delay = n_mult * N
    cdef long n_window = 2 * n_delay
    cdef double window = 2.0 * (<double>n_mult * eps)
    cdef double eps_ell = eps * ell

    cdef double *dring = <double *>malloc(n_delay * sizeof(double))
    cdef double *wring = <double *>malloc(n_window * sizeof(double))
    if dring == NULL or wring == NULL:
        free(dring)
        free(wring)
        raise MemoryError()
    cdef long dpos = 0, wpos = 0
    cdef double chi = 0.0, prev = 0.0

    cdef double y, qs, x1h, yvh, x3h, Rh, th2, u_c, s, Y, i, u_obs, q, mom, ups, r, Y_R, phi
    cdef double x1_pre, e2, z1n, dold, wold, th, s_d, f
    cdef double k1a, k1b, k1c, k2a, k2b, k2c, k3a, k3b, k3c, k4a, k4b, k4c
    cdef double y1, y2, y3, uu, s_mid, s1
    cdef long k, j, row
    cdef int status = 0
    cdef long k_end = n

    # observer initialisation from the first measurement
    cdef double y0 = x1 * x2 - kk * noise[0]
    cdef double theta2 = eps * yv0
    if theta2 > eps_ell:
        theta2 = eps_ell
    cdef double yv_init = theta2 / eps
    cdef double v1 = -R_hat0 / kk * y0
    cdef double v2 = y0 / yv_init
    cdef double phi_R = y0 / kk
    cdef double R_hat = R_hat0
    cdef double x1_hat = y0 / yv_init
    cdef double z = -gp * yv_init
    cdef double z1 = yv_init, z2 = 0.0
    cdef double integral = 0.0

    with nogil:
        for k in range(n + 1):
            y = x1 * x2 - kk * noise[k]
            qs = qstar[k]
            # observer output
            if true_yv:
                yvh = x2
            else:
                yvh = theta2 / eps
            x1h = x1_hat
            if variant == 0:
                x3h = z + gp * yvh
            else:
                x3h = z2
            Rh = R_hat
            th2 = theta2

            if kind == 1:
                u_c = saturate(-(R / kk) * (x1 * x2) - Kp * ((x1 - lam) / alpha + (x2 + c - qs))
                               - (alpha / m + Kp) * x3, u_max)
            elif kind == 0 and k < n_window:
                u_c = saturate(-(Rh / kk) * y, u_max)
            elif kind == 0:
                u_c = saturate(-(Rh / kk) * y - Kp * ((x1h - lam) / alpha + (yvh + c - qs))
                               - (alpha / m + Kp) * x3h, u_max)
            else:
                if bs_truth:
                    q = x2 + c
                    mom = x3
                else:
                    q = yvh + c
                    mom = x3h
                ups = 2.0 / kk * (m * g - gamma1 * (mom - p_star) - gamma2 * m * (q - qs))
                if bs_true_R:
                    f = R
                else:
                    f = Rh
                u_c = saturate(f * (c - q) * signed_sqrt(ups) - Ki * integral, bs_u_max)
                integral = integral + h * (q - qs)

            s = probe_sample(k, N, A0)
            u_obs = u_c + eps * (primitive_sample(k + 1, N, A0) - primitive_sample(k, N, A0)) / h

            # bundle step (synchronous)
            # vout: delay line and running integral
            if k == 0:
                for j in range(n_delay):
                    dring[j] = y
                for j in range(n_window):
                    wring[j] = -(n_window - j) * h * y
            else:
                chi += h * 0.5 * (prev + y)
            if n_delay == 0:
                dold = y
            else:
                dold = dring[dpos]
                dring[dpos] = y
                dpos = (dpos + 1) % n_delay
            prev = y
            wold = wring[wpos]
            wring[wpos] = chi
            wpos = (wpos + 1) % n_window
            Y = dold - (chi - wold) / window
            if k >= n_window:
                s_d = -(A0 / TWO_PI) * cos(TWO_PI * <double>pmod(k - n_delay, N) / <double>N)
                th = theta2 + h * gamma * s_d * (Y - s_d * theta2)
                if th > eps_ell:
                    th = eps_ell
                theta2 = th
            # resistance filters and update
            r = y / yvh
            Y_R = -v1 + a * r - a * v2
            phi = phi_R
            v1 = v1 + h * (-a * v1 + a * u_obs)
            v2 = v2 + h * (-a * v2 + a * r)
            phi_R = phi_R + h * (-a * phi_R + a / kk * y)
            R_hat = R_hat + h * gamma_R * phi * (Y_R - phi * R_hat)
            # flux
            x1_pre = x1_hat
            x1_hat = x1_hat + h * (Rh / kk * y + u_obs - gl * (y - yvh * x1_hat))
            # momentum
            if variant == 0:
                z = z + h * (-(gp / m) * z + x1_pre * x1_pre / (2.0 * kk)
                             - gp * gp / m * yvh - m * g)
            else:
                if variant == 1:
                    e2 = yvh - z2
                else:
                    e2 = yvh - z1
                z1n = z1 + h * (z2 / m + c1 * (yvh - z1))
                z2 = z2 + h * (x1_pre * x1_pre / (2.0 * kk) - m * g + c2 * e2)
                z1 = z1n

            i = -x1 * x2 / kk
            cur[k] = i
            if k % every == 0:
                row = k // every
                log[row, 0] = <double>k * h
                log[row, 1] = x1
                log[row, 2] = x2
                log[row, 3] = x3
                log[row, 4] = y
                log[row, 5] = i
                log[row, 6] = u_c + s
                log[row, 7] = u_c
                log[row, 8] = s
                log[row, 9] = yvh
                log[row, 10] = x1h
                log[row, 11] = x3h
                log[row, 12] = Rh
                log[row, 13] = th2
                log[row, 14] = Y
                log[row, 15] = qs
            if k == n:
                break

            # RK4 with u_c held and the probe at the stage times
            s_mid = probe_half_sample(k, N, A0)
            s1 = probe_sample(k + 1, N, A0)
            uu = u_c + s
            k1a = R / kk * x1 * x2 + uu
            k1b = x3 / m
            k1c = x1 * x1 / (2.0 * kk) - m * g
            y1 = x1 + 0.5 * h * k1a
            y2 = x2 + 0.5 * h * k1b
            y3 = x3 + 0.5 * h * k1c
            uu = u_c + s_mid
            k2a = R / kk * y1 * y2 + uu
            k2b = y3 / m
            k2c = y1 * y1 / (2.0 * kk) - m * g
            y1 = x1 + 0.5 * h * k2a
            y2 = x2 + 0.5 * h * k2b
            y3 = x3 + 0.5 * h * k2c
            k3a = R / kk * y1 * y2 + uu
            k3b = y3 / m
            k3c = y1 * y1 / (2.0 * kk) - m * g
            y1 = x1 + h * k3a
            y2 = x2 + h * k3b
            y3 = x3 + h * k3c
            uu = u_c + s1
            k4a = R / kk * y1 * y2 + uu
            k4b = y3 / m
            k4c = y1 * y1 / (2.0 * kk) - m * g
            x1 = x1 + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
            x2 = x2 + h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
            x3 = x3 + h / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)

            if true_yv:
                yvh = x2
            else:
                yvh = theta2 / eps
            if variant == 0:
                x3h = z + gp * yvh
            else:
                x3h = z2
            if not isfinite(x1 + x2 + x3 + x1_hat + yvh + x3h + R_hat):
                status = 2
                k_end = k + 1
                break
            if x2 >= 0.0:
                status = 1
                k_end = k + 1
                break

    free(dring)
    free(wring)
    return status, k_end
