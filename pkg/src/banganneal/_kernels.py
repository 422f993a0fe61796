"""Jitted inner loops for split-operator propagation of spin-chain states.

Basis convention: qubit i is bit i of the basis index (qubit 0 = least
significant bit), and sigma_z|0> = +|0>.  All kernels act in place on a
contiguous complex128 amplitude vector of length 2**n_qubits.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def x_rotations(amps, n_qubits, coeffs, theta):
    """Apply exp(-i * theta * sum_i coeffs[i] * sigma_x_i) in place.

    The single-site factors commute, so the product of exact single-qubit
    rotations is the exact exponential.
    """
    for i in range(n_qubits):
        ang = theta * coeffs[i]
        c = np.cos(ang)
        s = np.sin(ang)
        js = 1j * s
        step = 1 << i
        dim = amps.shape[0]
        base = 0
        while base < dim:
            for k in range(base, base + step):
                a0 = amps[k]
                a1 = amps[k + step]
                amps[k] = c * a0 - js * a1
                amps[k + step] = c * a1 - js * a0
            base += 2 * step


@njit(cache=True)
def diagonal_phases(amps, diag, alpha):
    """Apply exp(-i * alpha * diag) elementwise in place."""
    for k in range(amps.shape[0]):
        amps[k] *= np.exp(-1j * alpha * diag[k])


@njit(cache=True)
def strang_segment(amps, n_qubits, diag, coeffs, u, dt, nsub):
    """Evolve amps by exp(-i*(u*B + (1-u)*C)*dt) in place.

    B = sum_i coeffs[i] sigma_x_i, C = diag in the computational basis.
    Uses nsub symmetric splitting substeps; u = 0 and u = 1 are exact
    single-operator exponentials regardless of nsub.
    """
    if dt == 0.0:
        return
    if u == 0.0:
        diagonal_phases(amps, diag, dt)
        return
    if u == 1.0:
        x_rotations(amps, n_qubits, coeffs, dt)
        return
    tau = dt / nsub
    half = 0.5 * u * tau
    alpha = (1.0 - u) * tau
    phases = np.empty(amps.shape[0], np.complex128)
    for k in range(amps.shape[0]):
        phases[k] = np.exp(-1j * alpha * diag[k])
    x_rotations(amps, n_qubits, coeffs, half)
    for m in range(nsub):
        for k in range(amps.shape[0]):
            amps[k] *= phases[k]
        if m < nsub - 1:
            x_rotations(amps, n_qubits, coeffs, 2.0 * half)
    x_rotations(amps, n_qubits, coeffs, half)


@njit(cache=True)
def chain_forward(psi0, n_qubits, diag, coeffs, us, dts, nsubs):
    """Propagate through all segments, storing node and midpoint states.

    Segment i applies two half-length splitting passes of nsubs[i]
    substeps each, so the stored midpoint is an exact node of the
    composite product (the backward chain retraces it exactly).
    Returns (nodes, mids) with shapes (M+1, dim) and (M, dim).
    """
    M = us.shape[0]
    dim = psi0.shape[0]
    nodes = np.empty((M + 1, dim), np.complex128)
    mids = np.empty((M, dim), np.complex128)
    amps = psi0.copy()
    nodes[0] = amps
    for i in range(M):
        strang_segment(amps, n_qubits, diag, coeffs, us[i], 0.5 * dts[i], nsubs[i])
        mids[i] = amps
        strang_segment(amps, n_qubits, diag, coeffs, us[i], 0.5 * dts[i], nsubs[i])
        nodes[i + 1] = amps
    return nodes, mids


@njit(cache=True)
def chain_backward(k_final, n_qubits, diag, coeffs, us, dts, nsubs):
    """Inverse-propagate a costate from the final node back to t = 0.

    Applies the exact inverses of the forward substeps (dt -> -dt), so
    overlaps with the forward chain are preserved to roundoff.
    """
    M = us.shape[0]
    dim = k_final.shape[0]
    nodes = np.empty((M + 1, dim), np.complex128)
    mids = np.empty((M, dim), np.complex128)
    amps = k_final.copy()
    nodes[M] = amps
    for i in range(M - 1, -1, -1):
        strang_segment(amps, n_qubits, diag, coeffs, us[i], -0.5 * dts[i], nsubs[i])
        mids[i] = amps
        strang_segment(amps, n_qubits, diag, coeffs, us[i], -0.5 * dts[i], nsubs[i])
        nodes[i] = amps
    return nodes, mids


@njit(cache=True)
def chain_final_state(psi0, n_qubits, diag, coeffs, us, dts, nsubs):
    """Forward propagation keeping only the final state.

    Applies the identical substep product as chain_forward so cost
    evaluations and gradient sweeps see the same discrete dynamics.
    """
    amps = psi0.copy()
    M = us.shape[0]
    for i in range(M):
        strang_segment(amps, n_qubits, diag, coeffs, us[i], 0.5 * dts[i], nsubs[i])
        strang_segment(amps, n_qubits, diag, coeffs, us[i], 0.5 * dts[i], nsubs[i])
    return amps
