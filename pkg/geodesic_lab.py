# Purpose: geodesic flow of the warped metric
#   ds^2 = cosh^2(y) (2z^4 - z^2 + 1)^2 dx^2 + dy^2 + dz^2,  x mod 1,
# its three closed geodesics y = 0, z in {0, 1/2, -1/2}, their transverse
# Floquet multipliers and the effective potential whose critical points
# carry the same stability information.
#

import logging
from dataclasses import dataclass, field

import numpy as np

from lab_errors import CriticalPointError, NonClosedOrbitError
from symplectic_core import (COMPLEX_HYPERBOLIC, ELLIPTIC, REAL_NEGATIVE, REAL_POSITIVE, SymplecticMatrix,
                             build_quadratic_hamiltonian, classify_spectrum, symplectic_defect)

logger = logging.getLogger(__name__)

BASE_ORBITS = (0.0, 0.5, -0.5)
CLOSURE_TOL = 1e-6
SYMPLECTIC_TOL = 1e-6
DOMAIN_BOUND = 10.0

# state layout (x, y, z, vx, vy, vz)
X, Y, Z, VX, VY, VZ = range(6)
TRANSVERSE = (Y, VY, Z, VZ)
# (y, z, vy, vz): positions first, so the standard J applies
SYMPLECTIC_ORDER = (0, 2, 1, 3)


def profile(z):
    return 2 * z ** 4 - z ** 2 + 1


def profile_d(z):
    return 8 * z ** 3 - 2 * z


def profile_dd(z):
    return 24 * z ** 2 - 2


def warp(y, z):
    return np.cosh(y) * profile(z)


def metric(y, z):
    return np.diag([warp(y, z) ** 2, 1.0, 1.0])


def christoffel(y, z):
    """
    Gamma[l, i, j] in coordinates (x, y, z). The nonzero symbols are

    Gamma^x_xy = Gamma^x_yx = tanh y,
    Gamma^x_xz = Gamma^x_zx = f'(z)/f(z),
    Gamma^y_xx = -sinh y cosh y f(z)^2,
    Gamma^z_xx = -cosh^2 y f(z) f'(z),

    with f(z) = 2z^4 - z^2 + 1.
    """
    f, fd = profile(z), profile_d(z)
    gamma = np.zeros((3, 3, 3))
    gamma[0, 0, 1] = gamma[0, 1, 0] = np.tanh(y)
    gamma[0, 0, 2] = gamma[0, 2, 0] = fd / f
    gamma[1, 0, 0] = -np.sinh(y) * np.cosh(y) * f ** 2
    gamma[2, 0, 0] = -np.cosh(y) ** 2 * f * fd
    return gamma


def energy(state):
    state = np.asarray(state, dtype=float)
    w = warp(state[..., Y], state[..., Z])
    return w ** 2 * state[..., VX] ** 2 + state[..., VY] ** 2 + state[..., VZ] ** 2


def geodesic_rhs(state):
    _, y, z, vx, vy, vz = state
    f, fd = profile(z), profile_d(z)
    th, sh, ch = np.tanh(y), np.sinh(y), np.cosh(y)
    return np.array([
        vx,
        vy,
        vz,
        -2 * th * vy * vx - 2 * (fd / f) * vz * vx,
        sh * ch * f ** 2 * vx ** 2,
        fd * f * ch ** 2 * vx ** 2,
    ])


def geodesic_jacobian(state):
    _, y, z, vx, vy, vz = state
    f, fd, fdd = profile(z), profile_d(z), profile_dd(z)
    th, sh, ch = np.tanh(y), np.sinh(y), np.cosh(y)
    sech2 = 1 / ch ** 2
    jac = np.zeros((6, 6))
    jac[X, VX] = jac[Y, VY] = jac[Z, VZ] = 1.0
    jac[VX, Y] = -2 * sech2 * vy * vx
    jac[VX, Z] = -2 * ((fdd * f - fd ** 2) / f ** 2) * vz * vx
    jac[VX, VX] = -2 * th * vy - 2 * (fd / f) * vz
    jac[VX, VY] = -2 * th * vx
    jac[VX, VZ] = -2 * (fd / f) * vx
    jac[VY, Y] = np.cosh(2 * y) * f ** 2 * vx ** 2
    jac[VY, Z] = 2 * sh * ch * f * fd * vx ** 2
    jac[VY, VX] = 2 * sh * ch * f ** 2 * vx
    jac[VZ, Y] = 2 * fd * f * ch * sh * vx ** 2
    jac[VZ, Z] = (fdd * f + fd ** 2) * ch ** 2 * vx ** 2
    jac[VZ, VX] = 2 * fd * f * ch ** 2 * vx
    return jac


def _rk4_step(state, dt):
    k1 = geodesic_rhs(state)
    k2 = geodesic_rhs(state + 0.5 * dt * k1)
    k3 = geodesic_rhs(state + 0.5 * dt * k2)
    k4 = geodesic_rhs(state + dt * k3)
    return state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_variational_step(state, phi, dt):
    # base and tangent flow advanced with the same stages
    k1 = geodesic_rhs(state)
    p1 = geodesic_jacobian(state) @ phi
    s2 = state + 0.5 * dt * k1
    k2 = geodesic_rhs(s2)
    p2 = geodesic_jacobian(s2) @ (phi + 0.5 * dt * p1)
    s3 = state + 0.5 * dt * k2
    k3 = geodesic_rhs(s3)
    p3 = geodesic_jacobian(s3) @ (phi + 0.5 * dt * p2)
    s4 = state + dt * k3
    k4 = geodesic_rhs(s4)
    p4 = geodesic_jacobian(s4) @ (phi + dt * p3)
    return (state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4),
            phi + dt / 6 * (p1 + 2 * p2 + 2 * p3 + p4))


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    states: np.ndarray
    energy: np.ndarray
    blown_up: bool = False

    @property
    def final(self):
        return self.states[-1]

    @property
    def energy_drift(self):
        return float(np.max(np.abs(self.energy - self.energy[0])))

    def rows(self):
        for t, s, e in zip(self.t, self.states, self.energy):
            yield (t, s[X] % 1.0, s[Y], s[Z], s[VX], s[VY], s[VZ], e)


def _steps(duration, step):
    n = max(1, int(round(abs(duration) / step)))
    return n, duration / n


def integrate(state0, duration, step=1e-4, stride=1, bound=DOMAIN_BOUND):
    """
    Fixed-step RK4 over [0, duration]; a negative duration integrates
    backwards. Stops early with blown_up set when |y| or |z| leaves the
    domain bound.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    n, dt = _steps(duration, step)
    state = np.array(state0, dtype=float)
    times, states = [0.0], [state.copy()]
    blown_up = False
    for i in range(1, n + 1):
        state = _rk4_step(state, dt)
        if abs(state[Y]) > bound or abs(state[Z]) > bound:
            logger.warning("trajectory left the domain |y|, |z| <= %g at t = %.6f", bound, i * dt)
            times.append(i * dt)
            states.append(state.copy())
            blown_up = True
            break
        if i % stride == 0 or i == n:
            times.append(i * dt)
            states.append(state.copy())
    states = np.array(states)
    return Trajectory(t=np.array(times), states=states, energy=energy(states), blown_up=blown_up)


def base_orbit(z0):
    """Unit-speed initial data and period of the closed geodesic y = 0, z = z0."""
    w = warp(0.0, z0)
    return np.array([0.0, 0.0, z0, 1.0 / w, 0.0, 0.0]), float(w)


def integrate_variational(state0, duration, step=1e-4):
    n, dt = _steps(duration, step)
    state = np.array(state0, dtype=float)
    phi = np.eye(6)
    for _ in range(n):
        state, phi = _rk4_variational_step(state, phi, dt)
    return state, phi


@dataclass(frozen=True, eq=False)
class PoincareReport:
    base_orbit: float
    multipliers: tuple
    verdict: str
    closure_residual: float
    symplectic_defect: float
    energy_drift: float
    monodromy: np.ndarray
    counts: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "base_orbit": {"z0": self.base_orbit},
            "multipliers": [[float(m.real), float(m.imag)] for m in self.multipliers],
            "verdict": self.verdict,
            "residuals": {"closure": self.closure_residual, "symplectic_defect": self.symplectic_defect,
                          "energy_drift": self.energy_drift},
            "counts": dict(self.counts),
        }


def _verdict(cls):
    hyperbolic = cls.n_hc + cls.n_hr_plus + cls.n_hr_minus
    if hyperbolic and cls.n_e:
        return "semi-hyperbolic"
    if hyperbolic:
        return "hyperbolic"
    return "elliptic"


def poincare_linearization(z0, vx0=None, step=1e-4):
    """
    Transverse monodromy of the closed geodesic through (0, 0, z0) over one
    x-period, in the coordinates (y, vy, z, vz) of the section x = 0 mod 1.
    """
    state0, period = base_orbit(z0)
    if vx0 is not None:
        state0[VX] = vx0
        period = 1.0 / vx0
    state, phi = integrate_variational(state0, period, step)
    drift = abs(float(energy(state) - energy(state0)))
    closure = max(abs(state[X] - state0[X] - 1.0), float(np.max(np.abs(state[[Y, Z, VY, VZ]] - state0[[Y, Z, VY, VZ]]))))
    if closure > CLOSURE_TOL:
        raise NonClosedOrbitError(f"orbit through z0 = {z0} misses its start by {closure:.3e} > {CLOSURE_TOL:.0e}")
    block = phi[np.ix_(TRANSVERSE, TRANSVERSE)]
    ordered = block[np.ix_(SYMPLECTIC_ORDER, SYMPLECTIC_ORDER)]
    defect = symplectic_defect(ordered)
    multipliers = tuple(sorted(np.linalg.eigvals(block), key=lambda m: (abs(m), m.imag)))
    ds = SymplecticMatrix.from_array(ordered, tol=SYMPLECTIC_TOL)
    cls = classify_spectrum(ds)
    counts = {COMPLEX_HYPERBOLIC: cls.n_hc, REAL_POSITIVE: cls.n_hr_plus,
              REAL_NEGATIVE: cls.n_hr_minus, ELLIPTIC: cls.n_e}
    logger.debug("z0 = %g: multipliers %s", z0, multipliers)
    return PoincareReport(base_orbit=float(z0), multipliers=multipliers, verdict=_verdict(cls),
                          closure_residual=float(closure), symplectic_defect=defect, energy_drift=drift,
                          monodromy=ordered, counts=counts)


def transverse_normal_form(report):
    """Quadratic normal form of the transverse monodromy."""
    cls = classify_spectrum(SymplecticMatrix.from_array(report.monodromy, tol=SYMPLECTIC_TOL))
    return build_quadratic_hamiltonian(cls)


# ----------------------------------------------------------------------------
# effective potential
# ----------------------------------------------------------------------------

def effective_potential(y, z):
    return 1 / (np.cosh(y) ** 2 * profile(z) ** 2) - 1


def potential_gradient(y, z):
    sech2 = 1 / np.cosh(y) ** 2
    f = profile(z)
    return np.array([-2 * sech2 * np.tanh(y) / f ** 2, -2 * sech2 * profile_d(z) / f ** 3])


def potential_hessian(y, z):
    sech2 = 1 / np.cosh(y) ** 2
    th = np.tanh(y)
    f, fd, fdd = profile(z), profile_d(z), profile_dd(z)
    vyy = (4 * sech2 * th ** 2 - 2 * sech2 ** 2) / f ** 2
    vyz = 4 * sech2 * th * fd / f ** 3
    vzz = sech2 * (6 * fd ** 2 / f ** 4 - 2 * fdd / f ** 3)
    return np.array([[vyy, vyz], [vyz, vzz]])


def find_critical_point(seed, tol=1e-12, max_iter=50):
    """Damped Newton iteration on the gradient of the effective potential."""
    p = np.array(seed, dtype=float)
    g = potential_gradient(*p)
    for _ in range(max_iter):
        if np.linalg.norm(g) <= tol:
            return p
        try:
            step = np.linalg.solve(potential_hessian(*p), g)
        except np.linalg.LinAlgError:
            raise CriticalPointError(f"singular Hessian at {p.tolist()} starting from seed {list(seed)}")
        damping = 1.0
        while damping > 1e-6:
            trial = p - damping * step
            gt = potential_gradient(*trial)
            if np.linalg.norm(gt) < np.linalg.norm(g):
                break
            damping /= 2
        p, g = trial, gt
    if np.linalg.norm(g) <= tol:
        return p
    raise CriticalPointError(
        f"Newton from seed {list(seed)} did not converge in {max_iter} steps, |grad| = {np.linalg.norm(g):.3e}")


def hessian_signature(point):
    eigs = np.linalg.eigvalsh(potential_hessian(*point))
    if np.any(np.abs(eigs) < 1e-12):
        raise CriticalPointError(f"degenerate critical point at {list(point)}, Hessian eigenvalues {eigs.tolist()}")
    return tuple("-" if e < 0 else "+" for e in eigs)


