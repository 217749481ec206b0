# Purpose: model monodromy operators near hyperbolic and elliptic closed
# orbits, the h -> hbar_tilde rescaling, conjugation by the escape weight
# and the contraction / spectral gap estimates built on them.
#

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft, linalg

from lab_errors import AliasingError, ContractionFailure, UnsupportedSpectrumError
from symplectic_core import nonresonance_check
from weyl import PhaseGrid, microlocal_basis, op_exponential, quantize, quantize_split

logger = logging.getLogger(__name__)

UNITARITY_TOL = 1e-9
ALIAS_TOL = 1e-10
RESULT_HEADER = ("h", "hbar_tilde", "s", "r", "gap_C", "gap_N", "unitarity_defect")


@dataclass(frozen=True)
class ModelParams:
    lam: float = 1.0
    alpha: float = 1.0
    h: float = 0.01
    hbar_tilde: float = 0.2
    s: float = 0.3
    grid: PhaseGrid = field(default_factory=lambda: PhaseGrid(L=12.0, N=1024, hbar=0.2))
    width: float = 1.0

    def __post_init__(self):
        if not 0 < self.h <= self.hbar_tilde <= 1:
            raise ValueError(f"need 0 < h <= hbar_tilde <= 1, got h = {self.h}, hbar_tilde = {self.hbar_tilde}")
        if abs(self.s) > 0.5:
            raise ValueError(f"weight strength |s| = {abs(self.s)} exceeds 1/2")
        if self.grid.hbar != self.hbar_tilde:
            raise ValueError(f"grid parameter {self.grid.hbar} differs from hbar_tilde = {self.hbar_tilde}")

    @property
    def ratio(self):
        return self.h / self.hbar_tilde

    @property
    def h_grid(self):
        """Grid in the original variables, the hbar_tilde grid contracted by (h/hbar_tilde)^{1/2}."""
        return PhaseGrid(L=self.grid.L * np.sqrt(self.ratio), N=self.grid.N, hbar=self.h)

    def with_h(self, h):
        return replace(self, h=h)

    def with_s(self, s):
        return replace(self, s=s)


def unitarity_defect(m):
    return float(np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0]), 2))


# ----------------------------------------------------------------------------
# rescaling
# ----------------------------------------------------------------------------

def _trig_interpolate(u, grid, y):
    n = grid.N
    c = fft.fft(u) / n
    k = fft.fftfreq(n, d=1.0 / n)
    kappa = np.pi * k / grid.L
    phase = np.exp(1j * np.outer(y + grid.L, kappa))
    nyq = n // 2
    phase[:, nyq] = np.cos(np.pi * nyq * (y + grid.L) / grid.L)
    return phase @ c


def _tail_fraction(u):
    n = len(u)
    spectrum = np.abs(fft.fftshift(fft.fft(u))) ** 2
    total = spectrum.sum()
    if total == 0:
        return 0.0
    band = n // 16
    return float((spectrum[:band].sum() + spectrum[-band:].sum()) / total)


def _dilate(u, grid_from, grid_to, ratio):
    # (D u)(X) = ratio^{1/4} u(ratio^{1/2} X)
    u = np.asarray(u, dtype=complex)
    tail = _tail_fraction(u)
    if tail > ALIAS_TOL:
        raise AliasingError(f"state has {tail:.3e} of its energy near the Nyquist band of the source grid")
    scale = np.sqrt(ratio)
    reach = scale * grid_to.L
    outside = np.abs(grid_from.x) > reach
    lost = float(np.sum(np.abs(u[outside]) ** 2) / max(np.sum(np.abs(u) ** 2), 1e-300))
    if lost > ALIAS_TOL:
        raise AliasingError(f"dilation drops {lost:.3e} of the state energy beyond |x| = {reach:.4g}")
    points = scale * grid_to.x
    same = np.allclose(points, grid_from.x, rtol=0, atol=1e-12 * grid_from.L)
    values = u if same else _trig_interpolate(u, grid_from, points)
    out = ratio ** 0.25 * values
    tail = _tail_fraction(out)
    if tail > ALIAS_TOL:
        raise AliasingError(f"dilated state has {tail:.3e} of its energy beyond the target Nyquist band")
    return out


def rescale_state(u, h, hbar_tilde, grid_h, grid_ht=None):
    """
    (T u)(X) = (h/hbar_tilde)^{1/4} u((h/hbar_tilde)^{1/2} X), unitary on L^2.

    grid_ht defaults to the same N with the window widened by
    (hbar_tilde/h)^{1/2}, where the resampling is exact.
    """
    ratio = h / hbar_tilde
    if grid_ht is None:
        grid_ht = PhaseGrid(L=grid_h.L / np.sqrt(ratio), N=grid_h.N, hbar=hbar_tilde)
    return _dilate(u, grid_h, grid_ht, ratio)


def unscale_state(v, h, hbar_tilde, grid_ht, grid_h=None):
    ratio = hbar_tilde / h
    if grid_h is None:
        grid_h = PhaseGrid(L=grid_ht.L / np.sqrt(ratio), N=grid_ht.N, hbar=h)
    return _dilate(v, grid_ht, grid_h, ratio)


# ----------------------------------------------------------------------------
# hyperbolic model
# ----------------------------------------------------------------------------

def _xxi(x, xi):
    return x * xi


def _escape_symbol(x, xi):
    return 0.5 * np.log1p(x ** 2) - 0.5 * np.log1p(xi ** 2)


def model_generator(p):
    """Q1 = Op(lambda (h/hbar_tilde) X Xi) on the hbar_tilde grid."""
    # states live inside the microlocal cutoff, |Xi| <~ width
    op = quantize(_xxi, p.grid, symbol_tag="X*Xi", momentum_support=p.width)
    return p.lam * p.ratio * op.matrix


def escape_operator(p):
    return quantize(_escape_symbol, p.grid, symbol_tag="Re G", momentum_support=p.width)


def build_hyperbolic_monodromy(p, t=1.0):
    """M(t) = exp(-(i/h) t Q1)."""
    if p.lam == 0:
        return np.eye(p.grid.N, dtype=complex)
    m = op_exponential(model_generator(p), -1j * t / p.h)
    defect = unitarity_defect(m)
    if defect > UNITARITY_TOL:
        logger.warning("model monodromy unitarity defect %.3e above %.1e", defect, UNITARITY_TOL)
    return m


def model_propagator(p, t):
    return build_hyperbolic_monodromy(p, t)


def conjugate_by_weight(p, m, s=None):
    """e^{-s G^w} M e^{s G^w}."""
    s = p.s if s is None else s
    if s == 0:
        return m
    g = escape_operator(p)
    return op_exponential(g, -s) @ m @ op_exponential(g, s)


@dataclass(frozen=True)
class MonodromyResult:
    h: float
    hbar_tilde: float
    s: float
    norm_conjugated: float
    norm_reversed: float
    gap_conjugated: float
    unitarity_defect: float
    gap_constant: float = float("nan")
    gap_exponent: float = float("nan")
    gaps: tuple = ()

    def row(self):
        return (self.h, self.hbar_tilde, self.s, self.norm_conjugated, self.gap_constant,
                self.gap_exponent, self.unitarity_defect)


def _gap(m, v):
    re = np.eye(m.shape[0]) - (m + m.conj().T) / 2
    return float(linalg.eigvalsh(v.conj().T @ re @ v)[0])


def fit_spectral_gap(p, h_values, gap_width=0.25):
    """
    Fit Re <(I - M)u, u> >= C^{-1} h^N over microlocalized u, the cutoff
    width growing like gap_width (hbar_tilde/h)^{1/2}. N is the slope of
    log gap against log h.
    """
    gaps = []
    for h in h_values:
        q = p.with_h(h)
        m = build_hyperbolic_monodromy(q)
        v = microlocal_basis(q.grid, gap_width * np.sqrt(q.hbar_tilde / h))
        gaps.append(_gap(m, v))
        logger.debug("spectral gap at h = %.6g: %.6e", h, gaps[-1])
    gaps = np.array(gaps)
    if len(h_values) < 2 or np.any(gaps <= 0):
        return float("nan"), float("nan"), tuple(gaps)
    slope, intercept = np.polyfit(np.log(h_values), np.log(gaps), 1)
    return float(np.exp(-intercept)), float(slope), tuple(gaps)


def conjugated_contraction(p, h_values=None, gap_width=0.25):
    """
    r = ||e^{-sG^w} M e^{sG^w} V||_2 over an orthonormal basis V of the
    microlocalized subspace; r = 1 at s = 0.
    """
    m = build_hyperbolic_monodromy(p)
    defect = unitarity_defect(m)
    v = microlocal_basis(p.grid, p.width)
    conj = conjugate_by_weight(p, m)
    r = float(np.linalg.norm(conj @ v, 2))
    reversed_norm = float(np.linalg.norm(conjugate_by_weight(p, m, -p.s) @ v, 2))
    gap_conj = _gap(conj, v)
    logger.debug("h = %.6g, s = %.3g: r = %.12f, reversed %.12f", p.h, p.s, r, reversed_norm)
    if p.s != 0 and r >= 1:
        raise ContractionFailure(r, p.h, p.hbar_tilde, p.s)
    c, n, gaps = (float("nan"), float("nan"), ())
    if h_values:
        c, n, gaps = fit_spectral_gap(p, h_values, gap_width)
    return MonodromyResult(h=p.h, hbar_tilde=p.hbar_tilde, s=p.s, norm_conjugated=r,
                           norm_reversed=reversed_norm, gap_conjugated=gap_conj,
                           unitarity_defect=defect, gap_constant=c, gap_exponent=n, gaps=gaps)


@dataclass(frozen=True)
class GeneratorReport:
    max_imag: float
    norm_bound: float
    leading_ratio: float


def conjugated_generator(p):
    """Imaginary part of e^{-sG^w} Q1 e^{sG^w} on the microlocalized subspace."""
    q1 = model_generator(p)
    g = escape_operator(p)
    qt = op_exponential(g, -p.s) @ q1 @ op_exponential(g, p.s)
    imag = (qt - qt.conj().T) / 2j
    v = microlocal_basis(p.grid, p.width)
    restricted = v.conj().T @ imag @ v
    max_imag = float(linalg.eigvalsh((restricted + restricted.conj().T) / 2)[-1])
    a = quantize(lambda x, xi: p.lam * (x ** 2 / (1 + x ** 2) + xi ** 2 / (1 + xi ** 2)), p.grid,
                 momentum_support=p.width).matrix
    expected = p.s * p.h * np.trace(v.conj().T @ a @ v).real
    ratio = float(-np.trace(restricted).real / expected) if expected else float("nan")
    return GeneratorReport(max_imag=max_imag, norm_bound=float(np.exp(max_imag / p.h)), leading_ratio=ratio)


def escape_weight_action(p, u, grid_h=None):
    """e^{sK^w} u = T^{-1} e^{sG^w} T u for a state on the h grid."""
    grid_h = grid_h or p.h_grid
    big = rescale_state(u, p.h, p.hbar_tilde, grid_h, p.grid)
    big = op_exponential(escape_operator(p), p.s) @ big
    return unscale_state(big, p.h, p.hbar_tilde, p.grid, grid_h)


def position_variance(u, grid):
    w = np.abs(u) ** 2
    w = w / w.sum()
    mean = np.sum(w * grid.x)
    return float(np.sum(w * (grid.x - mean) ** 2))


# ----------------------------------------------------------------------------
# elliptic model
# ----------------------------------------------------------------------------

def oscillator_operator(alpha, grid, momentum_support=None):
    """Op((alpha/2)(x^2 + xi^2)); the support defaults to the ground state scale hbar^{1/2}."""
    if momentum_support is None:
        momentum_support = np.sqrt(grid.hbar)
    return quantize_split(lambda x: 0.5 * alpha * x ** 2, lambda xi: 0.5 * alpha * xi ** 2, grid,
                          symbol_tag=f"({alpha}/2)(x^2+xi^2)", momentum_support=momentum_support)


def build_elliptic_monodromy(p, z, t=1.0, grid=None):
    """M(z, t) = exp(-i t (Q - z)/h), Q = Op((alpha/2)(x^2 + xi^2)) on the h grid."""
    verdict = nonresonance_check([p.alpha])
    if verdict.status == "resonant":
        raise UnsupportedSpectrumError(
            f"rotation angle alpha = {p.alpha:.12g} is resonant, {verdict.witness[0]} alpha lies in pi Z")
    if verdict.status == "undecided":
        logger.warning("rotation angle alpha = %.12g is within %.1e of a resonance", p.alpha, verdict.closest)
    grid = grid or p.h_grid
    q = oscillator_operator(p.alpha, grid).matrix
    return op_exponential(q - z * np.eye(grid.N), -1j * t / p.h)
