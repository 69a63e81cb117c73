"""NumPy implementations of the hot kernels (fallback backend)."""
import numpy as np


def duhamel_accumulate(F, omega, dt):
    """Trapezoidal Duhamel sums in Fourier space.

    Returns ``S`` with ``S[i] = sum_j w_ij exp(-1j*(t_i - t_j)*omega) F[j]``
    where ``w_ij`` are composite-trapezoid weights on ``[0, t_i]``.
    ``F`` has shape ``(M+1, P)``; ``omega`` has shape ``(P,)``.
    """
    F = np.ascontiguousarray(F, dtype=np.complex128)
    omega = np.ascontiguousarray(omega, dtype=np.float64)
    out = np.empty_like(F)
    out[0] = 0.0
    E = np.exp(-1j * dt * omega)
    half = 0.5 * dt
    for i in range(1, F.shape[0]):
        out[i] = E * (out[i - 1] + half * F[i - 1]) + half * F[i]
    return out


def weighted_sqnorm(c, w2):
    """sum(w2 * |c|^2) accumulated sequentially."""
    c = np.ascontiguousarray(c, dtype=np.complex128).ravel()
    w2 = np.ascontiguousarray(w2, dtype=np.float64).ravel()
    return float(np.dot(w2, c.real * c.real + c.imag * c.imag))
