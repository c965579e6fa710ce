"""Dense linear-algebra kernels for the cloud controller and test oracles.

Everything here operates on small (n <= 6 in practice) float64 numpy arrays,
so simplicity and verifiable residuals win over asymptotic performance:

- ``lyapunov_solve`` uses the Kronecker-product linearization (an n^2 x n^2
  dense solve).
- ``care_solve`` runs the Kleinman-Newton iteration, one Lyapunov solve per
  step, started from a Bass-style stabilizing gain.
- ``matrix_exponential`` is scaling-and-squaring with a truncated Taylor
  series, accurate to ~1e-14 relative for the norms this package produces.

All solvers symmetrize symmetric outputs as (S + S^T)/2 before returning to
stop asymmetric round-off from accumulating.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotStabilizable, SingularSystem

_SYM_TOL = 1e-12


def _as_square(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    return a


def _check_symmetric(q: np.ndarray, name: str) -> None:
    scale = 1.0 + np.linalg.norm(q, "fro")
    if np.linalg.norm(q - q.T, "fro") > _SYM_TOL * scale:
        raise DimensionMismatch(f"{name} must be symmetric")


def lyapunov_solve(a: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Solve the continuous Lyapunov equation A^T S + S A + Q = 0.

    Vectorizes to (I (x) A^T + A^T (x) I) vec(S) = -vec(Q), where (x) is the
    Kronecker product, and solves the dense n^2 x n^2 system.  Requires that
    no two eigenvalues of A sum to zero; a rank-deficient linearization
    raises ``SingularSystem``.
    """
    a = _as_square(a, "A")
    q = _as_square(q, "Q")
    if a.shape != q.shape:
        raise DimensionMismatch(f"A {a.shape} and Q {q.shape} differ")
    _check_symmetric(q, "Q")
    n = a.shape[0]
    eye = np.eye(n)
    lin = np.kron(eye, a.T) + np.kron(a.T, eye)
    try:
        vec_s = np.linalg.solve(lin, -q.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("Lyapunov linearization is singular") from exc
    if not np.all(np.isfinite(vec_s)):
        raise SingularSystem("Lyapunov solve produced non-finite entries")
    s = vec_s.reshape(n, n)
    return (s + s.T) / 2.0


def _bass_stabilizing_gain(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Initial stabilizing gain K0 so that A - B K0 is Hurwitz (Bass' method).

    With beta exceeding the spectral abscissa of -A, the shifted Lyapunov
    equation (A + beta I) X + X (A + beta I)^T = 2 B B^T has a positive
    definite solution for controllable (A, B), and K0 = B^T X^{-1} stabilizes.
    Falls back to K0 = 0 when A is already Hurwitz.
    """
    n = a.shape[0]
    eigs = np.linalg.eigvals(a)
    if np.max(eigs.real) < 0.0:
        return np.zeros((b.shape[1], n))
    beta = float(np.linalg.norm(a, "fro")) + 0.5
    shifted = (a + beta * np.eye(n)).T
    try:
        x = lyapunov_solve(shifted, -2.0 * b @ b.T)
    except SingularSystem as exc:
        raise NotStabilizable("could not build a stabilizing initial gain") from exc
    try:
        k0 = np.linalg.solve(x, b).T
    except np.linalg.LinAlgError as exc:
        raise NotStabilizable("shifted controllability Gramian is singular") from exc
    closed = np.linalg.eigvals(a - b @ k0)
    if np.max(closed.real) >= 0.0:
        raise NotStabilizable("initial gain failed to stabilize the pair (A, B)")
    return k0


def care_solve(
    a: np.ndarray,
    b: np.ndarray,
    q: np.ndarray,
    r: np.ndarray,
    gain_tol: float = 1e-12,
    max_iter: int = 100,
) -> np.ndarray:
    """Solve A^T S + S A - S B R^{-1} B^T S + Q = 0 for the stabilizing S.

    Kleinman-Newton iteration: given a stabilizing gain K_k, solve the
    Lyapunov equation for the closed loop A - B K_k with forcing
    Q + K_k^T R K_k, then update K_{k+1} = R^{-1} B^T S_k.  The iterates
    decrease monotonically to the stabilizing solution; terminate when the
    gain moves less than ``gain_tol`` in Frobenius norm.
    """
    a = _as_square(a, "A")
    q = _as_square(q, "Q")
    r = _as_square(r, "R")
    b = np.asarray(b, dtype=float)
    if b.ndim != 2 or b.shape[0] != a.shape[0] or b.shape[1] != r.shape[0]:
        raise DimensionMismatch(
            f"B shape {b.shape} incompatible with A {a.shape} and R {r.shape}"
        )
    _check_symmetric(q, "Q")
    _check_symmetric(r, "R")

    k = _bass_stabilizing_gain(a, b)
    r_inv_bt = np.linalg.solve(r, b.T)
    s = np.zeros_like(a)
    best_delta = np.inf
    stalled = 0
    for _ in range(max_iter):
        closed = a - b @ k
        s = lyapunov_solve(closed, q + k.T @ r @ k)
        k_next = r_inv_bt @ s
        delta = np.linalg.norm(k_next - k, "fro")
        k = k_next
        # gain_tol is scaled by the gain magnitude: large-gain systems hit
        # their round-off floor above any fixed absolute tolerance
        if delta < gain_tol * (1.0 + np.linalg.norm(k, "fro")):
            return (s + s.T) / 2.0
        if delta >= best_delta:
            stalled += 1
            if stalled >= 8:
                break
        else:
            stalled = 0
            best_delta = delta
    # quadratic convergence has stopped; accept the iterate only if it meets
    # the defining residual bound at double precision
    s = (s + s.T) / 2.0
    residual = a.T @ s + s @ a - s @ b @ (r_inv_bt @ s) + q
    if np.linalg.norm(residual, "fro") <= 1e-8 * (1.0 + np.linalg.norm(q, "fro")):
        return s
    raise NoConvergence("Kleinman iteration stalled above the residual bound")


def lqr_gain(a: np.ndarray, b: np.ndarray, q: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Optimal state-feedback gain K = R^{-1} B^T S for u = -K x.

    Asserts the closed loop A - B K is Hurwitz before returning.
    """
    s = care_solve(a, b, q, r)
    k = np.linalg.solve(np.asarray(r, dtype=float), np.asarray(b, dtype=float).T @ s)
    closed_eigs = np.linalg.eigvals(np.asarray(a, dtype=float) - b @ k)
    if np.max(closed_eigs.real) >= 0.0:
        raise NotStabilizable("computed LQR gain does not stabilize the plant")
    return k


def matrix_exponential(a: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(A t) by scaling-and-squaring over a truncated Taylor series.

    The scaled matrix has norm <= 0.5, where 22 Taylor terms reach full
    float64 precision; squaring then restores the requested horizon.
    """
    a = _as_square(a, "A")
    if not np.isfinite(t):
        raise DimensionMismatch("t must be finite")
    m = a * float(t)
    norm = np.linalg.norm(m, 1)
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5))) if norm > 0.5 else 0)
    m_scaled = m / (2.0**squarings)
    result = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for order in range(1, 23):
        term = term @ m_scaled / order
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result
