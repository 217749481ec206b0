# Purpose: escape function G on phase space, its Hamiltonian derivative
# along quadratic Hamiltonians, and the sampling check that H_q G is
# positive on the hyperbolic part.
#

import logging
from dataclasses import dataclass

import numpy as np

from lab_errors import DimensionMismatchError, NumericalFailure, PositivityViolation, UnsupportedSpectrumError
from symplectic_core import QuadraticHamiltonian, SymplecticMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EscapeFunction:
    """
    G(X, Xi) = 1/2 log((1 + |X_h|^2) / (1 + |Xi_h|^2)) + i/2 (|X_e|^2 - |Xi_e|^2)

    The leading dim_hyp coordinates are hyperbolic, the trailing dim_ell
    coordinates elliptic.
    """
    dim_hyp: int
    dim_ell: int = 0

    @property
    def dim(self):
        return self.dim_hyp + self.dim_ell

    def split(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise DimensionMismatchError(f"expected {self.dim} coordinates, got {v.shape[-1]}")
        return v[..., :self.dim_hyp], v[..., self.dim_hyp:]


def eval_escape(ef, x, xi):
    xh, xe = ef.split(x)
    ph, pe = ef.split(xi)
    real = 0.5 * np.log1p(np.sum(xh ** 2, axis=-1)) - 0.5 * np.log1p(np.sum(ph ** 2, axis=-1))
    imag = 0.5 * (np.sum(xe ** 2, axis=-1) - np.sum(pe ** 2, axis=-1))
    return real + 1j * imag


def gradient_escape(ef, x, xi):
    """(dG/dX, dG/dXi), closed form."""
    xh, xe = ef.split(x)
    ph, pe = ef.split(xi)
    gx = np.concatenate([xh / (1 + np.sum(xh ** 2, axis=-1, keepdims=True)), 1j * xe], axis=-1)
    gxi = np.concatenate([-ph / (1 + np.sum(ph ** 2, axis=-1, keepdims=True)), -1j * pe], axis=-1)
    return gx, gxi


def _as_form(q):
    if isinstance(q, QuadraticHamiltonian):
        return q.q
    return q


def hamiltonian_action(q, ef, x, xi):
    """H_q G = d_xi q . d_x G - d_x q . d_xi G at the given points."""
    form = _as_form(q)
    if form.dim != 2 * ef.dim:
        raise DimensionMismatchError(f"quadratic form on R^{form.dim} does not match escape function on R^{2 * ef.dim}")
    dq_dx, dq_dxi = form.gradient(x, xi)
    dg_dx, dg_dxi = gradient_escape(ef, x, xi)
    return np.sum(dq_dxi * dg_dx, axis=-1) - np.sum(dq_dx * dg_dxi, axis=-1)


def lower_envelope(x, xi):
    x2 = np.sum(np.asarray(x) ** 2, axis=-1)
    xi2 = np.sum(np.asarray(xi) ** 2, axis=-1)
    return x2 / (1 + x2) + xi2 / (1 + xi2)


@dataclass(frozen=True)
class PositivityReport:
    min_ratio: float
    argmin_point: tuple
    samples: int
    radius: float

    def to_dict(self):
        return {"min_ratio": self.min_ratio, "argmin_point": list(self.argmin_point),
                "samples": self.samples, "radius": self.radius}


def sample_ball(rng, count, dim, radius):
    direction = rng.standard_normal((count, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * (radius * rng.uniform(size=(count, 1)) ** (1.0 / dim))


def radial_sweep(rng, count, dim, r_min, r_max):
    direction = rng.standard_normal((count, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * np.logspace(np.log10(r_min), np.log10(r_max), count)[:, None]


def verify_positivity(q, samples=100000, radius=10.0, rng=None, sweep_max=1e3):
    """
    Minimum over sampled (X, Xi) of Re H_q G divided by
    |X|^2/(1+|X|^2) + |Xi|^2/(1+|Xi|^2).

    Samples are uniform in the ball of the given radius plus a log-spaced
    radial sweep out to sweep_max. Elliptic modes of a QuadraticHamiltonian
    are dropped first.
    """
    if isinstance(q, QuadraticHamiltonian):
        q = q.hyperbolic_part()
    rng = rng if rng is not None else np.random.default_rng(0)
    m = q.dim // 2
    ef = EscapeFunction(dim_hyp=m)
    n_sweep = max(1000, samples // 10)
    points = np.vstack([sample_ball(rng, samples, 2 * m, radius),
                        radial_sweep(rng, n_sweep, 2 * m, 1e-3, sweep_max)])
    points = points[np.linalg.norm(points, axis=1) > 0]
    x, xi = points[:, :m], points[:, m:]
    ratio = hamiltonian_action(q, ef, x, xi).real / lower_envelope(x, xi)
    k = int(np.argmin(ratio))
    report = PositivityReport(min_ratio=float(ratio[k]), argmin_point=tuple(float(v) for v in points[k]),
                              samples=len(points), radius=radius)
    logger.debug("positivity scan over %d points: min ratio %.6e", len(points), report.min_ratio)
    if report.min_ratio <= 0:
        raise PositivityViolation(report)
    return report


@dataclass(frozen=True, eq=False)
class EscapeNormalForm:
    M: np.ndarray
    Mprime: np.ndarray
    r: np.ndarray
    coord_change: SymplecticMatrix

    @property
    def min_eigenvalues(self):
        return float(np.linalg.eigvalsh(self.M)[0]), float(np.linalg.eigvalsh(self.Mprime)[0])

    def evaluate(self, x, xi):
        """sum r_j^-2 x_j^2 / (1 + |Mx|^2) + sum r_j^-2 xi_j^2 / (1 + |M'xi|^2), in the new coordinates."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        w = self.r ** -2.0
        mx = np.sum((x @ self.M.T) ** 2, axis=-1)
        mxi = np.sum((xi @ self.Mprime.T) ** 2, axis=-1)
        return np.sum(w * x ** 2, axis=-1) / (1 + mx) + np.sum(w * xi ** 2, axis=-1) / (1 + mxi)

    def transform(self, x, xi):
        m = len(self.r)
        z = np.concatenate([np.asarray(x, dtype=float), np.asarray(xi, dtype=float)], axis=-1)
        z = z @ self.coord_change.entries.T
        return z[..., :m], z[..., m:]


def diagonal_normal_form(q, check_points=1000, tol=1e-10, rng=None):
    if isinstance(q, QuadraticHamiltonian):
        q = q.hyperbolic_part()
    m = q.dim // 2
    x = q.hessian[m:, :m]
    lam = np.diag(x).copy()
    off = x - np.diag(lam)
    scale = max(1.0, float(np.abs(lam).max(initial=0.0)))
    if np.abs(off).max(initial=0.0) > 1e-12 * scale or np.any(lam <= 0):
        raise UnsupportedSpectrumError(
            "diagonal_normal_form needs q = sum lambda_j x_j xi_j with lambda_j > 0; "
            "use verify_positivity for Jordan and complex blocks")
    r = lam ** -0.5
    order = np.argsort(r, kind="stable")
    perm = np.eye(m)[order]
    coord_change = SymplecticMatrix.from_array(np.block([[perm, np.zeros((m, m))], [np.zeros((m, m)), perm]]))
    nf = EscapeNormalForm(M=np.eye(m), Mprime=np.eye(m), r=r[order], coord_change=coord_change)

    rng = rng if rng is not None else np.random.default_rng(0)
    pts = rng.uniform(-100, 100, size=(check_points, 2 * m))
    lhs = hamiltonian_action(q, EscapeFunction(m), pts[:, :m], pts[:, m:]).real
    rhs = nf.evaluate(*nf.transform(pts[:, :m], pts[:, m:]))
    err = float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(lhs))))
    if err > tol:
        raise NumericalFailure(f"escape normal form misses H_q G by {err:.3e} > {tol:.1e}")
    return nf
