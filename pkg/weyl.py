# Purpose: discrete Weyl quantization of phase-space symbols on a uniform
# position grid with its discrete Fourier dual, operator exponentials,
# lowest eigenvalues and the Gaussian microlocal cutoff.
#

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy import fft, linalg

from lab_errors import NonHermitianError, NumericalFailure, NyquistError, OperatorOverflowError

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
EXP_LIMIT = 700.0


@dataclass(frozen=True)
class PhaseGrid:
    """
    x_k = -L + 2Lk/N and xi_j = pi hbar (j - N/2) / L, k, j = 0..N-1.

    hbar plays the role of h or of the second parameter depending on the
    caller.
    """
    L: float
    N: int
    hbar: float

    def __post_init__(self):
        if self.N <= 0 or self.N % 2:
            raise ValueError(f"grid size N = {self.N} must be positive and even")
        if self.L <= 0 or self.hbar <= 0:
            raise ValueError(f"grid needs L > 0 and hbar > 0, got L = {self.L}, hbar = {self.hbar}")

    @property
    def x(self):
        return -self.L + 2 * self.L * np.arange(self.N) / self.N

    @property
    def xi(self):
        return np.pi * self.hbar * (np.arange(self.N) - self.N // 2) / self.L

    @property
    def dx(self):
        return 2 * self.L / self.N

    @property
    def dxi(self):
        return np.pi * self.hbar / self.L

    @property
    def max_xi(self):
        return np.pi * self.hbar * (self.N // 2) / self.L

    @property
    def midpoints(self):
        # (x_i + x_j)/2 indexed by i + j
        return -self.L + self.L * np.arange(2 * self.N - 1) / self.N

    def required_n(self, support):
        """Smallest power of two N with max |xi| >= 4 * support."""
        n = 8 * support * self.L / (np.pi * self.hbar)
        return int(2 ** max(1, int(np.ceil(np.log2(max(n, 2.0))))))

    def check_nyquist(self, support):
        if self.max_xi < 4 * support:
            raise NyquistError(self.max_xi, support, self.required_n(support))

    def norm(self, u):
        return float(np.sqrt(self.dx * np.sum(np.abs(u) ** 2)))

    def inner(self, u, v):
        return complex(self.dx * np.vdot(u, v))

    def describe(self):
        return {"L": self.L, "N": self.N, "hbar": self.hbar}


@dataclass(frozen=True, eq=False)
class WeylOperator:
    grid: PhaseGrid
    matrix: np.ndarray
    symbol_tag: str = ""
    dof: int = 1

    def hermitian_defect(self):
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def is_hermitian(self, tol=HERMITIAN_TOL):
        return self.hermitian_defect() <= tol * max(1.0, float(np.abs(self.matrix).max()))

    def __matmul__(self, u):
        return self.matrix @ u


def _evaluate(symbol, x, xi):
    values = np.asarray(symbol(x, xi))
    values = np.broadcast_to(values, np.broadcast(x, xi).shape)
    if np.any(np.isnan(values)):
        raise NumericalFailure("symbol evaluates to NaN on the grid")
    return values


def _signed_columns(n):
    # (-1)^d for the stored difference index d mod N
    d = np.arange(n)
    return np.where(d % 2 == 0, 1.0, -1.0)


def quantize(symbol, grid, symbol_tag="", momentum_support=None):
    """
    K[i, j] = (2 pi hbar)^-1 sum_l a((x_i + x_j)/2, xi_l) exp(i (x_i - x_j) xi_l / hbar) dxi dx,
    one inverse FFT per midpoint. momentum_support is the effective |xi|
    extent of the symbol.
    """
    if momentum_support is not None:
        grid.check_nyquist(momentum_support)
    n = grid.N
    s = _evaluate(symbol, grid.midpoints[:, None], grid.xi[None, :])
    f = fft.ifft(s, axis=1) * _signed_columns(n)[None, :]
    i, j = np.indices((n, n))
    k = f[i + j, (i - j) % n]
    if np.isrealobj(s):
        k = (k + k.conj().T) / 2
    return WeylOperator(grid=grid, matrix=k, symbol_tag=symbol_tag)


def fourier_multiplier(values):
    """Matrix of g(hD) on the grid from the sampled values g(xi_l)."""
    n = len(values)
    column = fft.ifft(np.asarray(values, dtype=complex)) * _signed_columns(n)
    return linalg.circulant(column)


def _fourier_multiplier_2d(values):
    n = values.shape[0]
    sign = _signed_columns(n)
    c = fft.ifft2(values.astype(complex)) * np.outer(sign, sign)
    i1, i2 = np.divmod(np.arange(n * n), n)
    return c[(i1[:, None] - i1[None, :]) % n, (i2[:, None] - i2[None, :]) % n]


def quantize_split(position_part, momentum_part, grid, dof=1, symbol_tag="", momentum_support=None):
    """
    Exact Weyl quantization of a(x, xi) = f(x) + g(xi).

    For dof = 2 the operator acts on the N^2 tensor grid, row-major in
    (x1, x2); f and g are called with two coordinate arrays.
    """
    if momentum_support is not None:
        grid.check_nyquist(momentum_support)
    if dof == 1:
        f = np.broadcast_to(np.asarray(position_part(grid.x), dtype=float), (grid.N,))
        g = np.broadcast_to(np.asarray(momentum_part(grid.xi), dtype=float), (grid.N,))
        k = np.diag(f).astype(complex) + fourier_multiplier(g)
    elif dof == 2:
        x1, x2 = np.meshgrid(grid.x, grid.x, indexing="ij")
        p1, p2 = np.meshgrid(grid.xi, grid.xi, indexing="ij")
        f = np.broadcast_to(np.asarray(position_part(x1, x2), dtype=float), x1.shape)
        g = np.broadcast_to(np.asarray(momentum_part(p1, p2), dtype=float), p1.shape)
        k = np.diag(f.ravel()).astype(complex) + _fourier_multiplier_2d(g)
    else:
        raise ValueError(f"dof must be 1 or 2, got {dof}")
    k = (k + k.conj().T) / 2
    return WeylOperator(grid=grid, matrix=k, symbol_tag=symbol_tag, dof=dof)


def _matrix(a):
    return a.matrix if isinstance(a, WeylOperator) else np.asarray(a)


def op_exponential(a, t, limit=EXP_LIMIT):
    """exp(t A); Hermitian A goes through its spectral decomposition."""
    mat = _matrix(a)
    t = complex(t)
    if t == 0:
        return np.eye(mat.shape[0], dtype=complex)
    herm = np.abs(mat - mat.conj().T).max() <= HERMITIAN_TOL * max(1.0, float(np.abs(mat).max()))
    if herm:
        w, v = linalg.eigh((mat + mat.conj().T) / 2)
        growth = float(np.max((t * w).real))
        if growth > limit:
            raise OperatorOverflowError(growth, limit)
        return (v * np.exp(t * w)) @ v.conj().T
    norm = abs(t) * float(linalg.norm(mat, 1))
    if norm > limit:
        raise OperatorOverflowError(norm, limit)
    return linalg.expm(t * mat)


def min_eigenvalue(a):
    mat = _matrix(a)
    defect = float(np.abs(mat - mat.conj().T).max())
    if defect > HERMITIAN_TOL * max(1.0, float(np.abs(mat).max())):
        raise NonHermitianError(f"operator is not Hermitian, defect {defect:.3e}")
    w = linalg.eigh((mat + mat.conj().T) / 2, eigvals_only=True, subset_by_index=[0, 0])
    return float(w[0])


def microlocal_cutoff(grid, width=1.0):
    """Pi = D_x D_xi D_x with D_x = exp(-x^2/(4w^2)) and D_xi = Op(exp(-xi^2/(2w^2)))."""
    dx = np.exp(-grid.x ** 2 / (4 * width ** 2))
    dxi = fourier_multiplier(np.exp(-grid.xi ** 2 / (2 * width ** 2)))
    k = dx[:, None] * dxi * dx[None, :]
    k = (k + k.conj().T) / 2
    return WeylOperator(grid=grid, matrix=k, symbol_tag=f"cutoff(width={width})")


def microlocal_basis(grid, width=1.0, threshold=0.5):
    """Orthonormal columns spanning the eigenvectors of the cutoff with eigenvalue >= threshold."""
    w, v = linalg.eigh(microlocal_cutoff(grid, width).matrix)
    keep = w >= threshold
    if not np.any(keep):
        raise NumericalFailure(f"microlocal cutoff of width {width} has no eigenvalue above {threshold} "
                               f"(largest {w[-1]:.4f}) on grid {grid.describe()}")
    logger.debug("microlocal subspace of width %.4g has dimension %d", width, int(keep.sum()))
    return v[:, keep]


def save_operator(op, path):
    mat = np.ascontiguousarray(op.matrix, dtype=np.complex128)
    mat.tofile(path)
    sidecar = dict(op.grid.describe(), symbol_tag=op.symbol_tag, dof=op.dof, dim=mat.shape[0])
    with open(f"{path}.json", "w") as f:
        json.dump(sidecar, f, indent=2)


def load_operator(path):
    with open(f"{path}.json") as f:
        sidecar = json.load(f)
    dim = sidecar["dim"]
    mat = np.fromfile(path, dtype=np.complex128).reshape(dim, dim)
    grid = PhaseGrid(L=sidecar["L"], N=sidecar["N"], hbar=sidecar["hbar"])
    return WeylOperator(grid=grid, matrix=mat, symbol_tag=sidecar["symbol_tag"], dof=sidecar["dof"])
