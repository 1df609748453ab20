"""Commutators of the ring noise operators.

The noise operators ``f_a``, ``f_b`` are fixed by requiring that the bus
output fields obey free-field commutators.  Writing

    [f_a, f_a^+] = C_aa,  [f_b, f_b^+] = C_bb,
    [f_a, f_b^+] = C_ab,  [f_a, f_b]   = D_ab,

that requirement is a linear system in ``(C_aa, C_bb, Re D_ab, Im D_ab)``
plus ``det(H) C_ab = 0``.  It has the exact solution
``C_kk = 1 - alpha_k^2 - |r_k|^2``, ``D_ab = i (conj(r_b) - r_a)``,
``C_ab = 0``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError, WeakPumpWarning
from .transfer import Location

# Above this condition number the 4x4 solve is reported as singular.
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class CommutatorSet:
    C_aa: np.ndarray
    C_bb: np.ndarray
    C_ab: np.ndarray
    D_ab: np.ndarray

    @property
    def physical(self):
        """True where both diagonal commutators are non-negative."""
        return (np.asarray(self.C_aa) >= 0) & (np.asarray(self.C_bb) >= 0)


def _abs2(z):
    return z.real * z.real + z.imag * z.imag


def assemble_commutator_system(pair):
    """Real 4x4 system ``A x = rhs`` for ``x = (C_aa, C_bb, Re D_ab, Im D_ab)``.

    Rows: ``[a_out, a_out^+] = 1``, ``[b_out, b_out^+] = 1`` and the real and
    imaginary parts of ``[a_out, b_out] = 0``.  Vectorised over leading
    dimensions of ``pair``.

    The ``D_ab`` term of the ``b_out`` row enters as ``-2 Re(H_ba H_bb^* D_ab)``;
    that is what the commutator algebra of ``b_out^+ = G_ba a_in + G_bb b_in^+
    + H_ba f_a + H_bb f_b^+`` gives, and the closed-form solution satisfies
    the system only with this sign.
    """
    if pair.location is not Location.OUTPUT_BUS:
        raise ValidationError("the commutator system is defined by the bus output fields")
    G = np.asarray(pair.G)
    H = np.asarray(pair.H)
    g_aa, g_ab, g_ba, g_bb = G[..., 0, 0], G[..., 0, 1], G[..., 1, 0], G[..., 1, 1]
    h_aa, h_ab, h_ba, h_bb = H[..., 0, 0], H[..., 0, 1], H[..., 1, 0], H[..., 1, 1]
    shape = g_aa.shape
    A = np.empty(shape + (4, 4))
    rhs = np.empty(shape + (4,))

    u = h_aa * np.conj(h_ab)
    A[..., 0, :] = np.stack([_abs2(h_aa), -_abs2(h_ab), 2 * u.real, -2 * u.imag], axis=-1)
    rhs[..., 0] = 1.0 - (_abs2(g_aa) - _abs2(g_ab))

    v = h_ba * np.conj(h_bb)
    A[..., 1, :] = np.stack([-_abs2(h_ba), _abs2(h_bb), -2 * v.real, 2 * v.imag], axis=-1)
    rhs[..., 1] = 1.0 - (_abs2(g_bb) - _abs2(g_ba))

    p = h_aa * np.conj(h_ba)
    q = -h_ab * np.conj(h_bb)
    w = h_aa * np.conj(h_bb)
    z = h_ab * np.conj(h_ba)
    # w D + z conj(D) = (w + z) Re D + i (w - z) Im D
    col_re = w + z
    col_im = 1j * (w - z)
    target = g_ab * np.conj(g_bb) - g_aa * np.conj(g_ba)
    A[..., 2, :] = np.stack([p.real, q.real, col_re.real, col_im.real], axis=-1)
    A[..., 3, :] = np.stack([p.imag, q.imag, col_re.imag, col_im.imag], axis=-1)
    rhs[..., 2] = target.real
    rhs[..., 3] = target.imag
    return A, rhs


def commutator_residual(pair, comms):
    """Max-abs residual of the four real equations for a given commutator set."""
    A, rhs = assemble_commutator_system(pair)
    D = np.asarray(comms.D_ab, dtype=complex)
    x = np.stack(np.broadcast_arrays(np.asarray(comms.C_aa, dtype=float), np.asarray(comms.C_bb, dtype=float),
                                     D.real, D.imag), axis=-1)
    return np.max(np.abs(np.einsum("...ij,...j->...i", A, x) - rhs), axis=-1)


def solve_commutators_numeric(pair) -> CommutatorSet:
    """Solve the 4x4 system numerically; ``C_ab`` is zero because ``det(H) != 0``."""
    A, rhs = assemble_commutator_system(pair)
    cond = np.linalg.cond(A)
    bad = ~(cond < MAX_CONDITION)
    x = np.zeros(rhs.shape)
    ok = ~bad
    if np.any(ok):
        x[ok] = np.linalg.solve(A[ok], rhs[ok][..., None])[..., 0]
    if np.any(bad):
        # Decoupled modes (no pump coupling): the diagonal rows are independent
        # and D_ab -> 0 continuously.  Anything else is a genuine failure.
        H = np.asarray(pair.H)[bad]
        h_aa2, h_bb2 = np.abs(H[..., 0, 0]) ** 2, np.abs(H[..., 1, 1]) ** 2
        decoupled = (H[..., 0, 1] == 0) & (H[..., 1, 0] == 0) & (h_aa2 > 0) & (h_bb2 > 0)
        if not np.all(decoupled):
            raise NumericalError(f"commutator system is singular (condition number {np.max(cond):.3g})")
        sub = np.zeros((H.shape[0], 4))
        sub[:, 0] = rhs[bad][:, 0] / h_aa2
        sub[:, 1] = rhs[bad][:, 1] / h_bb2
        x[bad] = sub
    det_h = np.linalg.det(np.asarray(pair.H))
    if np.any(det_h == 0):
        raise NumericalError("det(H) = 0: C_ab is not determined")
    return CommutatorSet(x[..., 0], x[..., 1], np.zeros_like(x[..., 0]), x[..., 2] + 1j * x[..., 3])


def commutators_closed_form(config, omega=0.0) -> CommutatorSet:
    """Exact commutators; independent of ``omega`` and of the couplings ``rho``."""
    r_a, r_b = config.r_a, config.r_b
    c_aa = 1.0 - config.signal.alpha ** 2 - abs(r_a) ** 2
    c_bb = 1.0 - config.idler.alpha ** 2 - abs(r_b) ** 2
    d_ab = 1j * (r_b.conjugate() - r_a)
    shape = np.shape(omega)
    if c_aa < 0 or c_bb < 0:
        warnings.warn(f"negative noise commutator (C_aa={c_aa:.3g}, C_bb={c_bb:.3g}): "
                      "|r|^2 exceeds 1 - alpha^2, weak-pump treatment invalid", WeakPumpWarning, stacklevel=2)
    return CommutatorSet(np.full(shape, c_aa), np.full(shape, c_bb), np.zeros(shape),
                         np.full(shape, d_ab, dtype=complex))


def highq_commutator_limit(config):
    """High-Q diagonal commutators ``gamma'_k T_k - |g alpha_p T_k|^2``."""
    g = abs(config.pump.coupling)
    out = []
    for mode in (config.signal, config.idler):
        out.append(mode.gamma_int * mode.T - (g * mode.T) ** 2)
    return tuple(out)
