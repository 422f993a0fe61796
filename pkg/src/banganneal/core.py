"""State vectors, structured Hermitian operators, and segment propagation.

Basis convention: qubit i is bit i of the computational-basis index
(qubit 0 = least significant bit) and sigma_z|0> = +|0>.  Times are in
hbar = 1 units throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from . import _kernels

NORM_TOL = 1e-10
HERMITICITY_TOL = 1e-12


class DimensionMismatchError(ValueError):
    """Operands live in different Hilbert spaces."""


class NonHermitianError(ValueError):
    """An expectation value came out with a non-negligible imaginary part."""


class PropagationError(ValueError):
    """Requested propagation method is incompatible with the operators."""


class OperatorKind(Enum):
    DIAGONAL = "diagonal"
    TRANSVERSE_FIELD = "transverse_field"
    DENSE = "dense"


class PropagationMethod(Enum):
    STRANG_SPLIT = "strang_split"
    DENSE_EXPM = "dense_expm"


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitude vector over the 2**n_qubits computational basis.

    Used both for physical states (normalized) and costates (same length,
    no normalization requirement).
    """

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2**self.n_qubits,):
            raise DimensionMismatchError(
                f"amplitude vector has shape {amps.shape}, "
                f"expected ({2**self.n_qubits},) for {self.n_qubits} qubits"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def assert_normalized(self, tol: float = NORM_TOL) -> None:
        dev = abs(np.vdot(self.amplitudes, self.amplitudes).real - 1.0)
        if dev > tol:
            raise ValueError(f"state norm deviates from 1 by {dev:.3e} (tol {tol:.1e})")


@dataclass(frozen=True, eq=False)
class OperatorHandle:
    """Hermitian operator in diagonal, transverse-field, or dense form.

    Payloads: DIAGONAL -> real energies of length 2**N;
    TRANSVERSE_FIELD -> per-site sigma_x coefficients of length N;
    DENSE -> Hermitian complex matrix of shape (2**N, 2**N).
    """

    kind: OperatorKind
    payload: np.ndarray
    n_qubits: int

    @classmethod
    def diagonal(cls, values: np.ndarray) -> "OperatorHandle":
        values = np.ascontiguousarray(values, dtype=np.float64)
        n = _qubits_for_dim(values.size)
        return cls(OperatorKind.DIAGONAL, values, n)

    @classmethod
    def transverse_field(cls, coeffs: np.ndarray) -> "OperatorHandle":
        coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
        if coeffs.ndim != 1 or coeffs.size < 1:
            raise ValueError("transverse-field payload must be a 1-D coefficient vector")
        return cls(OperatorKind.TRANSVERSE_FIELD, coeffs, coeffs.size)

    @classmethod
    def dense(cls, matrix: np.ndarray) -> "OperatorHandle":
        matrix = np.ascontiguousarray(matrix, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("dense payload must be a square matrix")
        n = _qubits_for_dim(matrix.shape[0])
        dev = np.max(np.abs(matrix - matrix.conj().T))
        if dev > HERMITICITY_TOL:
            raise NonHermitianError(
                f"dense payload deviates from Hermiticity by {dev:.3e}"
            )
        return cls(OperatorKind.DENSE, matrix, n)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def to_dense(self) -> np.ndarray:
        """Materialize as a dense matrix (test/fallback path)."""
        if self.kind is OperatorKind.DENSE:
            return self.payload.copy()
        if self.kind is OperatorKind.DIAGONAL:
            return np.diag(self.payload.astype(np.complex128))
        mat = np.zeros((self.dim, self.dim), dtype=np.complex128)
        idx = np.arange(self.dim)
        for i in range(self.n_qubits):
            mat[idx, idx ^ (1 << i)] += self.payload[i]
        return mat


def _qubits_for_dim(dim: int) -> int:
    n = int(round(math.log2(dim))) if dim > 0 else 0
    if dim < 2 or 2**n != dim:
        raise ValueError(f"vector length {dim} is not a power of two >= 2")
    return n


def apply_array(op: OperatorHandle, amps: np.ndarray) -> np.ndarray:
    """Apply op to amplitudes along the last axis (batched)."""
    if amps.shape[-1] != op.dim:
        raise DimensionMismatchError(
            f"operator dim {op.dim} does not match state dim {amps.shape[-1]}"
        )
    if op.kind is OperatorKind.DIAGONAL:
        return amps * op.payload
    if op.kind is OperatorKind.DENSE:
        return amps @ op.payload.T
    out = np.zeros_like(amps)
    n = op.n_qubits
    lead = amps.shape[:-1]
    for i in range(n):
        shaped = amps.reshape(lead + (2 ** (n - 1 - i), 2, 2**i))
        out += (op.payload[i] * shaped[..., ::-1, :]).reshape(amps.shape)
    return out


def apply(op: OperatorHandle, psi: StateVector) -> StateVector:
    """Return op|psi> as a (generally unnormalized) StateVector."""
    return StateVector(psi.n_qubits, apply_array(op, psi.amplitudes))


def inner(bra: StateVector, ket: StateVector) -> complex:
    """<bra|ket>, conjugate-linear in bra."""
    if bra.dim != ket.dim:
        raise DimensionMismatchError(
            f"bra dim {bra.dim} does not match ket dim {ket.dim}"
        )
    return complex(np.vdot(bra.amplitudes, ket.amplitudes))


def expectation(op: OperatorHandle, psi: StateVector, imag_tol: float = 1e-12) -> float:
    """<psi|op|psi> for a normalized state; asserts the value is real."""
    val = complex(np.vdot(psi.amplitudes, apply_array(op, psi.amplitudes)))
    if abs(val.imag) > imag_tol:
        raise NonHermitianError(
            f"expectation has imaginary part {val.imag:.3e} above {imag_tol:.1e}"
        )
    return val.real


@dataclass(frozen=True)
class PropagationConfig:
    """Controls segment propagation accuracy.

    substeps_per_segment is a lower bound on the splitting substep count;
    more substeps are added automatically when needed to meet tolerance
    (set tolerance very large to pin the count exactly).
    """

    substeps_per_segment: int = 1
    method: PropagationMethod = PropagationMethod.STRANG_SPLIT
    tolerance: float = 1e-8

    def __post_init__(self):
        if self.substeps_per_segment < 1:
            raise ValueError("substeps_per_segment must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")


def _norm_estimate(op_fn, dim: int, iters: int = 25, seed: int = 1234) -> float:
    """Spectral-norm estimate of a Hermitian operator given as a callable."""
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = op_fn(v)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
    return est


class SegmentPropagator:
    """Propagator bound to a fixed (B, C) pair and configuration.

    Provides single-segment evolution plus forward/backward chains that
    store node and midpoint states.  The Strang path requires C diagonal
    and B transverse-field; the dense path eigendecomposes u*B + (1-u)*C
    per segment.
    """

    def __init__(self, B: OperatorHandle, C: OperatorHandle, cfg: PropagationConfig):
        if B.dim != C.dim:
            raise DimensionMismatchError("B and C act on different Hilbert spaces")
        self.B = B
        self.C = C
        self.cfg = cfg
        self.n_qubits = B.n_qubits
        self.dim = B.dim
        if cfg.method is PropagationMethod.STRANG_SPLIT:
            if B.kind is not OperatorKind.TRANSVERSE_FIELD or C.kind is not OperatorKind.DIAGONAL:
                raise PropagationError(
                    "Strang splitting requires a transverse-field B and diagonal C "
                    f"(got B={B.kind.value}, C={C.kind.value})"
                )
            self._diag = C.payload
            self._coeffs = B.payload
        else:
            self._HB = B.to_dense()
            self._HC = C.to_dense()
            self._eig_cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        self._kappa: float | None = None

    # -- substep budgeting ------------------------------------------------

    def _splitting_kappa(self) -> float:
        """Worst-over-u coefficient of the per-substep O(tau^3) local error."""
        if self._kappa is None:
            B, C = self.B, self.C

            def bc(v):
                return apply_array(B, apply_array(C, v)) - apply_array(C, apply_array(B, v))

            def bbc(v):
                return apply_array(B, bc(v)) - bc(apply_array(B, v))

            def cbc(v):
                return apply_array(C, bc(v)) - bc(apply_array(C, v))

            n_bbc = _norm_estimate(bbc, self.dim)
            n_cbc = _norm_estimate(cbc, self.dim)
            us = np.linspace(0.0, 1.0, 101)
            kappas = us * (1 - us) * (us * n_bbc + 2 * (1 - us) * n_cbc) / 24.0
            self._kappa = float(np.max(kappas))
        return self._kappa

    def substeps_for(self, dt: float) -> int:
        """Substep count per half-segment meeting the configured tolerance."""
        dt = abs(dt)
        if dt == 0.0:
            return 1
        kappa = self._splitting_kappa()
        if kappa == 0.0:
            return self.cfg.substeps_per_segment
        # two halves of dt/2: per-half error dt^3 * kappa / (32 m^2) <= tol/2
        m = math.sqrt(dt**3 * kappa / (16.0 * self.cfg.tolerance))
        return max(self.cfg.substeps_per_segment, int(math.ceil(m)))

    def substeps_array(self, us: np.ndarray, dts: np.ndarray) -> np.ndarray:
        if self.cfg.method is PropagationMethod.DENSE_EXPM:
            return np.ones(len(us), dtype=np.int64)
        dt_max = float(np.max(np.abs(dts))) if len(dts) else 0.0
        n = self.substeps_for(dt_max)
        return np.full(len(us), n, dtype=np.int64)

    # -- dense path --------------------------------------------------------

    def _eig(self, u: float) -> tuple[np.ndarray, np.ndarray]:
        hit = self._eig_cache.get(u)
        if hit is None:
            lam, vec = np.linalg.eigh(u * self._HB + (1.0 - u) * self._HC)
            if len(self._eig_cache) > 16:
                self._eig_cache.clear()
            self._eig_cache[u] = hit = (lam, vec)
        return hit

    def _dense_step(self, amps: np.ndarray, u: float, dt: float) -> np.ndarray:
        lam, vec = self._eig(u)
        return vec @ (np.exp(-1j * lam * dt) * (vec.conj().T @ amps))

    # -- public evolution --------------------------------------------------

    def evolve(self, amps: np.ndarray, u: float, dt: float) -> np.ndarray:
        """Evolve a raw amplitude vector through one segment (signed dt)."""
        if self.cfg.method is PropagationMethod.DENSE_EXPM:
            return self._dense_step(amps, u, dt)
        out = amps.copy()
        nsub = self.substeps_for(dt)
        _kernels.strang_segment(
            out, self.n_qubits, self._diag, self._coeffs, u, 0.5 * dt, nsub
        )
        _kernels.strang_segment(
            out, self.n_qubits, self._diag, self._coeffs, u, 0.5 * dt, nsub
        )
        return out

    def chain_forward(
        self, psi0: np.ndarray, us: np.ndarray, dts: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and midpoints of the forward trajectory."""
        us = np.asarray(us, dtype=np.float64)
        dts = np.asarray(dts, dtype=np.float64)
        if self.cfg.method is PropagationMethod.STRANG_SPLIT:
            nsubs = self.substeps_array(us, dts)
            return _kernels.chain_forward(
                psi0, self.n_qubits, self._diag, self._coeffs, us, dts, nsubs
            )
        M = len(us)
        nodes = np.empty((M + 1, self.dim), np.complex128)
        mids = np.empty((M, self.dim), np.complex128)
        amps = psi0.copy()
        nodes[0] = amps
        for i in range(M):
            amps = self._dense_step(amps, us[i], 0.5 * dts[i])
            mids[i] = amps
            amps = self._dense_step(amps, us[i], 0.5 * dts[i])
            nodes[i + 1] = amps
        return nodes, mids

    def chain_backward(
        self, k_final: np.ndarray, us: np.ndarray, dts: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and midpoints of the costate, traced back from t_f."""
        us = np.asarray(us, dtype=np.float64)
        dts = np.asarray(dts, dtype=np.float64)
        if self.cfg.method is PropagationMethod.STRANG_SPLIT:
            nsubs = self.substeps_array(us, dts)
            return _kernels.chain_backward(
                k_final, self.n_qubits, self._diag, self._coeffs, us, dts, nsubs
            )
        M = len(us)
        nodes = np.empty((M + 1, self.dim), np.complex128)
        mids = np.empty((M, self.dim), np.complex128)
        amps = k_final.copy()
        nodes[M] = amps
        for i in range(M - 1, -1, -1):
            amps = self._dense_step(amps, us[i], -0.5 * dts[i])
            mids[i] = amps
            amps = self._dense_step(amps, us[i], -0.5 * dts[i])
            nodes[i] = amps
        return nodes, mids

    def chain_final_state(
        self, psi0: np.ndarray, us: np.ndarray, dts: np.ndarray
    ) -> np.ndarray:
        us = np.asarray(us, dtype=np.float64)
        dts = np.asarray(dts, dtype=np.float64)
        if self.cfg.method is PropagationMethod.STRANG_SPLIT:
            nsubs = self.substeps_array(us, dts)
            return _kernels.chain_final_state(
                psi0, self.n_qubits, self._diag, self._coeffs, us, dts, nsubs
            )
        amps = psi0.copy()
        for i in range(len(us)):
            amps = self._dense_step(amps, us[i], 0.5 * dts[i])
            amps = self._dense_step(amps, us[i], 0.5 * dts[i])
        return amps


@lru_cache(maxsize=32)
def _cached_propagator(
    B: OperatorHandle, C: OperatorHandle, cfg: PropagationConfig
) -> SegmentPropagator:
    return SegmentPropagator(B, C, cfg)


def get_propagator(
    B: OperatorHandle, C: OperatorHandle, cfg: PropagationConfig
) -> SegmentPropagator:
    """Shared propagator for a (B, C, cfg) triple (handles cached by identity)."""
    return _cached_propagator(B, C, cfg)


def default_method(C: OperatorHandle) -> PropagationMethod:
    if C.kind is OperatorKind.DIAGONAL:
        return PropagationMethod.STRANG_SPLIT
    return PropagationMethod.DENSE_EXPM


def evolve_segment(
    psi: StateVector,
    B: OperatorHandle,
    C: OperatorHandle,
    u: float,
    dt: float,
    cfg: PropagationConfig,
) -> StateVector:
    """Evolve |psi> by exp(-i*(u*B + (1-u)*C)*dt) to within cfg.tolerance."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"control value u={u} outside [0, 1]")
    if dt <= 0.0:
        raise ValueError(f"segment duration dt={dt} must be > 0")
    if psi.dim != B.dim or psi.dim != C.dim:
        raise DimensionMismatchError("state and operator dimensions differ")
    prop = get_propagator(B, C, cfg)
    return StateVector(psi.n_qubits, prop.evolve(psi.amplitudes, u, dt))
