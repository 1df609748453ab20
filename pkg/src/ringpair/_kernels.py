"""Per-grid-point kernels with a numba path and a pure-numpy fallback.

Each kernel is written once as a plain function of scalars that also works
on broadcast numpy arrays.  The numba path compiles that same function and
drives it from a ``prange`` loop; the numpy path calls it directly on whole
arrays.  Set ``RINGPAIR_NUMBA=0`` to force the numpy path and
``RINGPAIR_THREADS`` to cap the numba thread count (0 = numba default).
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

if numba is not None and not (os.environ.get("NUMBA_THREADING_LAYER")
                              or os.environ.get("NUMBA_THREADING_LAYER_PRIORITY")):
    # Prefer OpenMP: an outdated system TBB otherwise triggers a warning on every run.
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

N_TRANSFER = 17


def _flag(name, default):
    return os.environ.get(name, default).strip().lower() not in ("0", "false", "no", "off", "")


_backend = "numba" if (numba is not None and _flag("RINGPAIR_NUMBA", "1")) else "numpy"


def backend():
    return _backend


def set_backend(name):
    """Switch between ``"numba"`` and ``"numpy"``; returns the previous backend."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and numba is None:
        raise RuntimeError("numba is not importable")
    previous, _backend = _backend, name
    return previous


def transfer_point(theta_a, theta_b, rho_a, rho_b, tau_a, tau_b, alpha_a, alpha_b, r_a, r_b):
    """Closed-form G, H, G^(L), H^(L) entries and the denominator D.

    Returns 17 values: G (aa, ab, ba, bb), H, G^(L), H^(L), then D.
    """
    xi_a = alpha_a * np.exp(1j * theta_a)
    xi_b = alpha_b * np.exp(1j * theta_b)
    l_a = 1.0 - rho_a * xi_a
    l_b = 1.0 - rho_b * xi_b
    rr = r_a * r_b
    d = l_a * l_b - rr
    # conj(d) / |d|^2 in real arithmetic rather than 1 / d: at an exact pole this yields NaN on
    # both backends instead of raising inside the compiled kernel.
    m = 1.0 / (d.real * d.real + d.imag * d.imag)
    inv = d.real * m - 1j * (d.imag * m)
    g_aa = ((xi_a - rho_a) * l_b + rr * rho_a) * inv
    g_ab = -1j * r_a * tau_a * tau_b * xi_b * inv
    g_ba = 1j * r_b * tau_b * tau_a * xi_a * inv
    g_bb = ((xi_b - rho_b) * l_a + rr * rho_b) * inv
    h_aa = tau_a * l_b * inv
    h_ab = -1j * r_a * tau_a * inv
    h_ba = 1j * r_b * tau_b * inv
    h_bb = tau_b * l_a * inv
    gl_aa = tau_a * l_b * xi_a * inv
    gl_ab = -1j * r_a * tau_b * xi_b * inv
    gl_ba = 1j * r_b * tau_a * xi_a * inv
    gl_bb = tau_b * l_a * xi_b * inv
    hl_aa = l_b * inv
    hl_ab = -1j * r_a * inv
    hl_ba = 1j * r_b * inv
    hl_bb = l_a * inv
    return (g_aa, g_ab, g_ba, g_bb, h_aa, h_ab, h_ba, h_bb,
            gl_aa, gl_ab, gl_ba, gl_bb, hl_aa, hl_ab, hl_ba, hl_bb, d)


def biphoton_point(g_aa, g_ab, g_ba, g_bb, h_aa, h_ab, h_ba, h_bb, c_aa, c_bb, theta_p):
    """Pair amplitude, vacuum correction, singles amplitudes and environment weight."""
    ep = np.exp(1j * theta_p)
    em = np.conj(ep)
    psi2 = ep * np.conj(g_aa) * g_bb + em * g_ab * np.conj(g_ba)
    c_vac = (ep * (np.conj(g_ab) * g_bb + np.conj(h_ab) * h_bb * c_bb)
             + em * (g_aa * np.conj(g_ba) + h_aa * np.conj(h_ba) * c_aa))
    phi_a1 = ep * np.conj(g_aa) * h_bb + em * np.conj(g_ba) * h_ab
    phi_b1 = ep * g_bb * np.conj(h_aa) + em * g_ab * np.conj(h_ba)
    env = ep * np.conj(h_aa) * h_bb + em * h_ab * np.conj(h_ba)
    r0 = c_aa * c_bb * (env.real * env.real + env.imag * env.imag)
    return psi2, c_vac, phi_a1, phi_b1, r0


if numba is not None:
    _transfer_point_nb = numba.njit(cache=True, error_model="numpy")(transfer_point)
    _biphoton_point_nb = numba.njit(cache=True, error_model="numpy")(biphoton_point)

    @numba.njit(parallel=True, cache=True, error_model="numpy")
    def _transfer_batch(theta_a, theta_b, rho_a, rho_b, tau_a, tau_b, alpha_a, alpha_b, r_a, r_b, out):
        for i in numba.prange(theta_a.shape[0]):
            v = _transfer_point_nb(theta_a[i], theta_b[i], rho_a[i], rho_b[i], tau_a[i], tau_b[i],
                                   alpha_a[i], alpha_b[i], r_a[i], r_b[i])
            out[i, 0] = v[0]
            out[i, 1] = v[1]
            out[i, 2] = v[2]
            out[i, 3] = v[3]
            out[i, 4] = v[4]
            out[i, 5] = v[5]
            out[i, 6] = v[6]
            out[i, 7] = v[7]
            out[i, 8] = v[8]
            out[i, 9] = v[9]
            out[i, 10] = v[10]
            out[i, 11] = v[11]
            out[i, 12] = v[12]
            out[i, 13] = v[13]
            out[i, 14] = v[14]
            out[i, 15] = v[15]
            out[i, 16] = v[16]

    @numba.njit(parallel=True, cache=True, error_model="numpy")
    def _biphoton_batch(g, h, c_aa, c_bb, theta_p, out_c, out_r0):
        for i in numba.prange(g.shape[0]):
            v = _biphoton_point_nb(g[i, 0], g[i, 1], g[i, 2], g[i, 3], h[i, 0], h[i, 1], h[i, 2], h[i, 3],
                                   c_aa[i], c_bb[i], theta_p[i])
            out_c[i, 0] = v[0]
            out_c[i, 1] = v[1]
            out_c[i, 2] = v[2]
            out_c[i, 3] = v[3]
            out_r0[i] = v[4]


def _apply_thread_cap():
    cap = int(os.environ.get("RINGPAIR_THREADS", "0") or 0)
    if cap < 0:
        raise ValueError("RINGPAIR_THREADS must be >= 0")
    n = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(min(cap, n) if cap > 0 else n)


def _flat(shape, *arrays, dtype):
    return [np.ascontiguousarray(np.broadcast_to(np.asarray(a, dtype=dtype), shape).ravel()) for a in arrays]


def transfer(theta_a, theta_b, rho_a, rho_b, tau_a, tau_b, alpha_a, alpha_b, r_a, r_b):
    """Evaluate :func:`transfer_point` over broadcast inputs.

    Returns a complex array of shape ``broadcast_shape + (17,)``.
    """
    real_args = (theta_a, theta_b, rho_a, rho_b, tau_a, tau_b, alpha_a, alpha_b)
    shape = np.broadcast_shapes(*(np.shape(a) for a in real_args), np.shape(r_a), np.shape(r_b))
    reals = _flat(shape, *real_args, dtype=float)
    cplx = _flat(shape, r_a, r_b, dtype=complex)
    n = reals[0].shape[0]
    out = np.empty((n, N_TRANSFER), dtype=complex)
    if _backend == "numba":
        _apply_thread_cap()
        _transfer_batch(*reals, *cplx, out)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            for k, v in enumerate(transfer_point(*reals, *cplx)):
                out[:, k] = v
    return out.reshape(shape + (N_TRANSFER,))


def biphoton(g, h, c_aa, c_bb, theta_p):
    """Evaluate :func:`biphoton_point` for stacked ``(..., 2, 2)`` matrices.

    Returns ``(amplitudes, r0)`` where ``amplitudes[..., k]`` holds psi2,
    c_vac, phi_a1, phi_b1 for ``k = 0..3``.
    """
    g = np.asarray(g, dtype=complex)
    h = np.asarray(h, dtype=complex)
    shape = np.broadcast_shapes(g.shape[:-2], h.shape[:-2], np.shape(c_aa), np.shape(c_bb), np.shape(theta_p))
    gf = np.ascontiguousarray(np.broadcast_to(g, shape + (2, 2)).reshape(-1, 4))
    hf = np.ascontiguousarray(np.broadcast_to(h, shape + (2, 2)).reshape(-1, 4))
    c_aa, c_bb, theta_p = _flat(shape, c_aa, c_bb, theta_p, dtype=float)
    n = gf.shape[0]
    amps = np.empty((n, 4), dtype=complex)
    r0 = np.empty(n, dtype=float)
    if _backend == "numba":
        _apply_thread_cap()
        _biphoton_batch(gf, hf, c_aa, c_bb, theta_p, amps, r0)
    else:
        v = biphoton_point(*(gf[:, k] for k in range(4)), *(hf[:, k] for k in range(4)), c_aa, c_bb, theta_p)
        for k in range(4):
            amps[:, k] = v[k]
        r0[:] = v[4]
    return amps.reshape(shape + (4,)), r0.reshape(shape)
