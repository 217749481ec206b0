# Purpose: Hermite quasimodes near an elliptic closed orbit, the
# quantization ladders z_{k,beta} (exact and perturbed), cutoff
# resummation of the perturbation series, residual certification and
# the counting law N(h).
#

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import fft

from lab_errors import ScheduleError, SeriesDivergenceError, UnderResolvedError
from symplectic_core import smooth_step
from weyl import PhaseGrid, quantize_split

logger = logging.getLogger(__name__)

DEDUP_TOL = 1e-12
INCREMENT_FACTOR = 10.0


# ----------------------------------------------------------------------------
# Hermite modes
# ----------------------------------------------------------------------------

def mode_capacity(grid, h):
    """Largest index k whose classical turning point sqrt(h(2k+1)) fits twice inside the grid."""
    reach = min(grid.L, grid.max_xi) / 2
    return int(np.floor((reach ** 2 / h - 1) / 2))


def hermite_function(k, h, x):
    """
    Normalized k-th eigenfunction of Op(x^2 + xi^2), eigenvalue h(2k+1).

    psi_0 = (pi h)^{-1/4} exp(-x^2/2h),
    psi_{k+1} = sqrt(2/(k+1)) (x/sqrt h) psi_k - sqrt(k/(k+1)) psi_{k-1}.
    """
    x = np.asarray(x, dtype=float)
    y = x / np.sqrt(h)
    prev = np.zeros_like(x)
    cur = (np.pi * h) ** -0.25 * np.exp(-y ** 2 / 2)
    for j in range(k):
        prev, cur = cur, np.sqrt(2.0 / (j + 1)) * y * cur - np.sqrt(j / (j + 1)) * prev
    return cur


@dataclass(frozen=True, eq=False)
class HermiteMode:
    beta: tuple
    h: float
    grid: PhaseGrid
    values: tuple

    @property
    def vector(self):
        """The mode on the tensor grid, row-major in the transverse coordinates."""
        out = self.values[0]
        for v in self.values[1:]:
            out = np.kron(out, v)
        return out

    @property
    def norm(self):
        return float(np.sqrt(self.grid.dx ** len(self.values) * np.sum(np.abs(self.vector) ** 2)))


def hermite_mode(beta, h, grid):
    beta = (beta,) if np.isscalar(beta) else tuple(beta)
    capacity = mode_capacity(grid, h)
    if max(beta) > capacity:
        raise UnderResolvedError(
            f"Hermite index {max(beta)} exceeds grid capacity {capacity} at h = {h} "
            f"(L = {grid.L}, N = {grid.N}); need L and max|xi| above {2 * np.sqrt(h * (2 * max(beta) + 1)):.4g}")
    return HermiteMode(beta=beta, h=h, grid=grid, values=tuple(hermite_function(b, h, grid.x) for b in beta))


# ----------------------------------------------------------------------------
# ladders
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class LadderEntry:
    k: int
    beta: tuple
    z: float
    residual: float = 0.0
    multiplicity: int = 1
    increments: tuple = ()


@dataclass(frozen=True)
class QuasimodeLadder:
    m_exponent: int
    c0: float
    h: float
    entries: tuple

    @property
    def count(self):
        return len(self.entries)

    @property
    def window(self):
        return self.c0 * self.h ** (1.0 / self.m_exponent)


def _alphas(alpha, n):
    if np.isscalar(alpha) or isinstance(alpha, Fraction):
        return (alpha,) * (n - 1)
    alpha = tuple(alpha)
    if len(alpha) != n - 1:
        raise ValueError(f"expected {n - 1} elliptic angles, got {len(alpha)}")
    return alpha


def _is_rational(v):
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


def _lattice(h, m_exponent, c0, dims):
    # actions h(2 beta_j + 1) <= h^{1/m}, 2 pi |k| h <= 2 c0 h^{1/m}
    cap = h ** (1.0 / m_exponent)
    beta_max = max(0, int(np.floor((cap / h - 1) / 2)))
    k_max = int(np.floor(2 * c0 * cap / (2 * np.pi * h)))
    betas = itertools.product(range(beta_max + 1), repeat=dims)
    return [(k, b) for b in betas for k in range(-k_max, k_max + 1)]


def _ladder_value(alphas, beta, k, h):
    # solves 2z - h sum alpha_j (2 beta_j + 1) = 4 pi k h
    return (h * sum(float(a) * (2 * b + 1) for a, b in zip(alphas, beta)) + 4 * np.pi * k * h) / 2


def exact_model_ladder(alpha, h, m_exponent, c0, n=2):
    """
    All z = sum_j (alpha_j/2)(2 beta_j + 1) h + 2 pi k h with |z| <= c0 h^{1/m}.

    Coinciding z values are merged into one entry carrying the
    multiplicity. With rational alpha and h the comparison is exact,
    otherwise values closer than 1e-12 h coincide.
    """
    alphas = _alphas(alpha, n)
    exact = all(_is_rational(a) for a in alphas) and _is_rational(h)
    hf = float(h)
    window = c0 * hf ** (1.0 / m_exponent)
    candidates = []
    for k, beta in _lattice(hf, m_exponent, c0, n - 1):
        z = _ladder_value(alphas, beta, k, hf)
        if abs(z) <= window:
            key = (sum(Fraction(a) * (2 * b + 1) for a, b in zip(alphas, beta)), k) if exact else None
            candidates.append((z, key, k, beta))
    candidates.sort(key=lambda c: (c[0], c[2], c[3]))
    entries = []
    last_key = None
    for z, key, k, beta in candidates:
        same = key == last_key if exact else bool(entries) and z - entries[-1].z <= DEDUP_TOL * hf
        if entries and same:
            prev = entries[-1]
            entries[-1] = LadderEntry(prev.k, prev.beta, prev.z, multiplicity=prev.multiplicity + 1)
        else:
            entries.append(LadderEntry(k=k, beta=beta, z=z))
        last_key = key
    return QuasimodeLadder(m_exponent=m_exponent, c0=c0, h=hf, entries=tuple(entries))


def perturbed_ladder(lambda_fns, corrections, h, m_exponent, c0, order, n=2):
    """
    Solve 2z - zeta_beta(z) = 4 pi k h by fixed-point increments,

    zeta_beta(z) = h sum_j lambda_j(z)(2 beta_j + 1) + sum_l z^l Q_l(h, h(2 beta + 1)).

    corrections[l-1] is Q_l(h, I), I the tuple of actions. Increment j must
    stay within a factor of h^{1/m} of increment j-1.
    """
    if order < 0:
        raise ValueError(f"order must be nonnegative, got {order}")
    lambda_fns = tuple(lambda_fns) if not callable(lambda_fns) else (lambda_fns,) * (n - 1)
    for i, q in enumerate(corrections, start=1):
        if abs(q(h, (0.0,) * (n - 1))) > 1e-12:
            raise ValueError(f"correction Q_{i} does not vanish at zero action")
    alphas = tuple(f(0.0) for f in lambda_fns)
    window = c0 * h ** (1.0 / m_exponent)
    gain = h ** (1.0 / m_exponent)

    def zeta(z, beta):
        actions = tuple(h * (2 * b + 1) for b in beta)
        value = h * sum(f(z) * (2 * b + 1) for f, b in zip(lambda_fns, beta))
        return value + sum(z ** l * q(h, actions) for l, q in enumerate(corrections, start=1))

    entries = []
    for k, beta in _lattice(h, m_exponent, c0 + 1.0, n - 1):
        base = _ladder_value(alphas, beta, k, h)
        if abs(base) > 2 * window:
            continue
        z = (zeta(0.0, beta) + 4 * np.pi * k * h) / 2
        increments = [z]
        for j in range(1, order + 1):
            nxt = (zeta(z, beta) + 4 * np.pi * k * h) / 2
            step = nxt - z
            if abs(step) > INCREMENT_FACTOR * gain * max(abs(increments[-1]), h):
                raise SeriesDivergenceError(
                    f"increment {j} for k = {k}, beta = {beta} has size {abs(step):.3e}, "
                    f"above {INCREMENT_FACTOR} h^(1/m) times the previous {abs(increments[-1]):.3e}")
            increments.append(step)
            z = nxt
        if abs(z) <= window:
            entries.append(LadderEntry(k=k, beta=beta, z=float(z), increments=tuple(increments)))
    entries.sort(key=lambda e: (e.z, e.k, e.beta))
    return QuasimodeLadder(m_exponent=m_exponent, c0=c0, h=h, entries=tuple(entries))


def counting_slope(alpha, h_values, m_exponent, c0, n=2):
    """Counts N(h) and the log-log slope of N against 1/h."""
    counts = np.array([exact_model_ladder(alpha, h, m_exponent, c0, n).count for h in h_values])
    if np.any(counts == 0):
        return counts, float("nan")
    slope, _ = np.polyfit(np.log(1.0 / np.asarray(h_values)), np.log(counts), 1)
    return counts, float(slope)


# ----------------------------------------------------------------------------
# resummation
# ----------------------------------------------------------------------------

def cutoff(u):
    """1 on (-inf, 1], 0 on [2, inf), smooth in between."""
    return 1.0 - smooth_step(np.asarray(u, dtype=float) - 1.0)


def cutoff_scales(envelope, delta=0.5):
    scales = []
    prev = 0.0
    for j, c in enumerate(envelope):
        ratio = 2 ** j * c / envelope[j - 1] if j > 0 and envelope[j - 1] > 0 else 2.0 ** j
        prev = max(prev * (1 + delta), ratio, 1.0)
        scales.append(prev)
    return scales


@dataclass(frozen=True, eq=False)
class BorelResult:
    h_grid: np.ndarray
    cutoffs: tuple
    values: np.ndarray
    partial_sums: dict
    certificates: dict
    errors: dict

    @property
    def holds(self):
        return all(np.all(self.errors[n] <= self.certificates[n] * self.h_grid ** n * (1 + 1e-12))
                   for n in self.certificates)


def borel_resum(envelope, h_grid, m_exponent, cutoffs=None, orders=(1, 2, 3)):
    """
    z~(h) = sum_j chi(lambda_j h) z^(j)(h) with z^(j)(h) = C_j h^{(j+1)/m}.

    For each N the truncation certificate K_N bounds
    |z~ - sum_{j <= mN} z^(j)| <= K_N h^N on h <= 1.
    """
    envelope = [float(c) for c in envelope]
    if cutoffs is None:
        cutoffs = cutoff_scales(envelope)
    else:
        cutoffs = [float(c) for c in cutoffs]
        if len(cutoffs) != len(envelope):
            raise ScheduleError(f"{len(cutoffs)} cutoff scales for {len(envelope)} terms")
        for j in range(1, len(cutoffs)):
            if cutoffs[j] <= cutoffs[j - 1]:
                raise ScheduleError(f"cutoff scales must increase: lambda_{j} = {cutoffs[j]} <= {cutoffs[j - 1]}")
    h = np.asarray(h_grid, dtype=float)
    m = m_exponent
    terms = np.array([c * h ** ((j + 1) / m) for j, c in enumerate(envelope)])
    weights = np.array([cutoff(lam * h) for lam in cutoffs])
    values = np.sum(weights * terms, axis=0)
    partial, certificates, errors = {}, {}, {}
    for n in orders:
        last = m * n
        partial[n] = np.sum(terms[:last + 1], axis=0)
        errors[n] = np.abs(values - partial[n])
        head = sum(envelope[j] * cutoffs[j] ** n for j in range(min(last + 1, len(envelope))))
        tail = sum(envelope[j] * min(1.0, 2.0 / cutoffs[j]) ** ((j + 1) / m - n)
                   for j in range(last + 1, len(envelope)))
        certificates[n] = head + tail
    return BorelResult(h_grid=h, cutoffs=tuple(cutoffs), values=values, partial_sums=partial,
                       certificates=certificates, errors=errors)


# ----------------------------------------------------------------------------
# residuals
# ----------------------------------------------------------------------------

def residual_certify(k, beta, z, alpha, h, grid, nt=64):
    """
    ||(hD_t + Op((alpha/2)(x^2 + xi^2)) - z) u|| for u = exp(2 pi i k t) v_beta
    on the periodic t grid times the transverse grid, ||u|| = 1.
    """
    mode = hermite_mode(beta, h, grid)
    dof = len(mode.beta)
    if dof > 2:
        raise ValueError("residual certification supports at most two transverse dimensions")
    alphas = _alphas(alpha, dof + 1)
    support = np.sqrt(h)
    if dof == 1:
        q = quantize_split(lambda x: 0.5 * alphas[0] * x ** 2, lambda xi: 0.5 * alphas[0] * xi ** 2, grid,
                           momentum_support=support).matrix
    else:
        q = quantize_split(lambda x1, x2: 0.5 * (alphas[0] * x1 ** 2 + alphas[1] * x2 ** 2),
                           lambda p1, p2: 0.5 * (alphas[0] * p1 ** 2 + alphas[1] * p2 ** 2), grid, dof=2,
                           momentum_support=support).matrix
    v = mode.vector
    t = np.arange(nt) / nt
    u = np.exp(2j * np.pi * k * t)[:, None] * v[None, :]
    freq = fft.fftfreq(nt, d=1.0 / nt)
    ht = fft.ifft(h * 2 * np.pi * freq[:, None] * fft.fft(u, axis=0), axis=0)
    r = ht + u @ q.T - z * u
    cell = grid.dx ** dof / nt
    norm_u = np.sqrt(cell * np.sum(np.abs(u) ** 2))
    return float(np.sqrt(cell * np.sum(np.abs(r) ** 2)) / norm_u)
