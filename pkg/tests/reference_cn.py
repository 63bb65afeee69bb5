"""Dense Crank-Nicolson reference integrator used as a solver oracle.

Deliberately shares no machinery with the production stepper: the
periodic Laplacian is an explicit DFT-built matrix, stepping is an
implicit linear solve with a fixed-point midpoint mean field, and no
FFT is ever taken. Accuracy is O(dt^2) with spectral spatial accuracy,
so for small dt it converges to the same trajectories as the split-step
scheme if and only if both discretize the same equations.
"""

import numpy as np


def spectral_laplacian_matrix(n: int) -> np.ndarray:
    """d^2/dtheta^2 on n periodic points as a dense real matrix."""
    j = np.arange(n)
    dft = np.exp(-2j * np.pi * np.outer(j, j) / n)
    inv = np.conj(dft) / n
    k = np.where(j <= n // 2, j, j - n).astype(float)
    mat = (inv * (-(k**2))[None, :]) @ dft
    assert np.max(np.abs(mat.imag)) < 1e-9
    return mat.real


def evolve_cn(
    fields: np.ndarray,
    points: np.ndarray,
    p,
    t_final: float,
    dt: float,
    n_inner: int = 3,
) -> np.ndarray:
    """Advance coupled mean-field members (no system row, M = len(fields)).

    fields: (M, n) complex array of unit-norm wavefunctions.
    p: anything with hbar, mass, coupling, n_apparatus, potential_on.
    """
    psi = np.array(fields, dtype=complex)
    m_fields, n = psi.shape
    assert m_fields == p.n_apparatus
    lap = spectral_laplacian_matrix(n)
    kinetic = -(p.hbar**2) / (2.0 * p.mass) * lap
    v0 = np.cos(points) ** 2 if p.potential_on else np.zeros(n)
    eye = np.eye(n, dtype=complex)
    n_steps = round(t_final / dt)
    assert abs(n_steps * dt - t_final) < 1e-12

    for _ in range(n_steps):
        rho_old = np.abs(psi) ** 2
        psi_new = psi.copy()
        for _ in range(n_inner):
            rho_mid = 0.5 * (rho_old + np.abs(psi_new) ** 2)
            total_mid = rho_mid.sum(axis=0)
            for i in range(m_fields):
                v = v0 + p.coupling * (total_mid - rho_mid[i]) / p.n_apparatus
                ham = kinetic + np.diag(v)
                forward = eye - 0.5j * dt / p.hbar * ham
                backward = eye + 0.5j * dt / p.hbar * ham
                psi_new[i] = np.linalg.solve(backward, forward @ psi[i])
        psi = psi_new
    return psi


def l2_distance(a: np.ndarray, b: np.ndarray, spacing: float) -> float:
    return float(np.sqrt(spacing * np.sum(np.abs(a - b) ** 2)))
