# Purpose: symplectic linear algebra for linearized Poincare maps.
# Polar decomposition, logarithms, spectral classification into
# hyperbolic / elliptic blocks, quadratic Hamiltonians and the cutoff
# schedules used to deform the identity into dS(0,0).
#

import itertools
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from lab_errors import (ClassificationAmbiguousError, DimensionMismatchError, IntegrationError,
                        NotSymplecticError, NumericalFailure, ScheduleError,
                        UnsupportedSpectrumError)

logger = logging.getLogger(__name__)

TOL_SYMP = 1e-10
TOL_UNIT = 1e-6
TOL_FACTOR = 1e-8
CLUSTER_GAP = 1e-6
RANK_TOL = 1e-6

COMPLEX_HYPERBOLIC = "complex-hyperbolic"
REAL_POSITIVE = "real-positive"
REAL_NEGATIVE = "real-negative"
ELLIPTIC = "elliptic"
BLOCK_ORDER = (COMPLEX_HYPERBOLIC, REAL_POSITIVE, REAL_NEGATIVE, ELLIPTIC)


def standard_form(m):
    """[[0, -I], [I, 0]] on R^{2m}."""
    eye = np.eye(m)
    zero = np.zeros((m, m))
    return np.block([[zero, -eye], [eye, zero]])


def symplectic_defect(k):
    k = np.asarray(k)
    j = standard_form(k.shape[0] // 2)
    return float(np.linalg.norm(k.T @ j @ k - j))


def lie_algebra_defect(b):
    b = np.asarray(b)
    j = standard_form(b.shape[0] // 2)
    return float(np.linalg.norm(b.T @ j + j @ b))


def scaled_tolerance(a, tol=TOL_SYMP):
    # rounding in K^T J K grows like |K|^2
    return tol * max(1.0, float(np.linalg.norm(a, 2)) ** 2)


@dataclass(frozen=True, eq=False)
class SymplecticMatrix:
    entries: np.ndarray
    defect: float

    @classmethod
    def from_array(cls, a, tol=TOL_SYMP):
        a = np.array(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] % 2:
            raise DimensionMismatchError(f"expected an even square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NumericalFailure("matrix has non-finite entries")
        defect = symplectic_defect(a)
        if defect > tol:
            raise NotSymplecticError(defect, tol)
        a.setflags(write=False)
        return cls(entries=a, defect=defect)

    @property
    def dim(self):
        return self.entries.shape[0]

    @property
    def J(self):
        return standard_form(self.dim // 2)

    def inverse(self):
        # K^{-1} = J^{-1} K^T J for symplectic K
        j = self.J
        return SymplecticMatrix.from_array(-j @ self.entries.T @ j, tol=np.inf)


def matrix_to_json(a):
    rows = ", ".join("[" + ", ".join(f"{v:.17g}" for v in row) + "]" for row in np.asarray(a, dtype=float))
    return f'{{"dim": {np.asarray(a).shape[0]}, "rows": [{rows}]}}'


def matrix_from_json(text):
    doc = json.loads(text)
    rows = np.array(doc["rows"], dtype=float)
    if rows.shape != (doc["dim"], doc["dim"]):
        raise DimensionMismatchError(f"dim {doc['dim']} does not match rows of shape {rows.shape}")
    return rows


def random_symplectic(dim, rng, scale=1.0):
    """exp of a random element J.S of the symplectic Lie algebra, S symmetric."""
    s = rng.uniform(-scale, scale, size=(dim, dim))
    s = (s + s.T) / 2
    a = linalg.expm(standard_form(dim // 2) @ s)
    return SymplecticMatrix.from_array(a, tol=scaled_tolerance(a))


# ----------------------------------------------------------------------------
# polar decomposition and logarithm
# ----------------------------------------------------------------------------

def polar_decompose(k):
    """K = Q.P with Q orthogonal and P = (K^T K)^{1/2}, both symplectic."""
    q, p = linalg.polar(k.entries, side="right")
    sv = linalg.svdvals(k.entries)
    cond = sv[0] / sv[-1]
    if cond > 1e8:
        logger.warning("polar decomposition of a near-singular map, condition number %.3e", cond)
    else:
        logger.debug("polar decomposition, condition number %.3e", cond)
    p = (p + p.T) / 2
    tol = scaled_tolerance(k.entries)
    return SymplecticMatrix.from_array(q, tol=tol), SymplecticMatrix.from_array(p, tol=tol)


def _paired_logs(w):
    # w ascending, closed under inversion: pair w[i] with w[-1-i]
    n = len(w)
    logs = np.empty(n)
    for i in range(n // 2):
        lam = np.log(w[n - 1 - i])
        logs[n - 1 - i] = lam
        logs[i] = -lam
    return logs


def symplectic_log(a):
    """Real logarithm B of a positive definite symplectic A; B^T J + J B = 0."""
    entries = a.entries
    if not np.allclose(entries, entries.T, rtol=0, atol=1e-12 * max(1.0, np.linalg.norm(entries))):
        raise NumericalFailure("symplectic_log expects a symmetric positive definite matrix")
    w, v = linalg.eigh((entries + entries.T) / 2)
    assert w[0] > 0, "positive definite input cannot have eigenvalues on the negative axis"
    cond = np.linalg.cond(v)
    if cond > 1e6:
        logger.warning("ill-conditioned eigenbasis in symplectic_log, condition number %.3e", cond)
    b = (v * _paired_logs(w)) @ v.T
    return b


def log_branches(a):
    """Eigenvalue / logarithm pairs used by symplectic_log, partners paired exactly."""
    w = linalg.eigvalsh(a.entries)
    logs = _paired_logs(w)
    return [(complex(mu), complex(lam)) for mu, lam in zip(w, logs)]


# ----------------------------------------------------------------------------
# spectral classification
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralBlock:
    eigenvalue: complex
    multiplicity: int
    log: complex
    kind: str

    def branches(self):
        """(mu, lambda) for every eigenvalue the block accounts for."""
        mu, lam = self.eigenvalue, self.log
        if self.kind == COMPLEX_HYPERBOLIC:
            return [(mu, lam), (1 / mu, -lam), (mu.conjugate(), lam.conjugate()),
                    (1 / mu.conjugate(), -lam.conjugate())]
        if self.kind == ELLIPTIC:
            return [(mu, lam), (mu.conjugate(), lam.conjugate())]
        return [(mu, lam), (1 / mu, -lam)]


@dataclass(frozen=True, eq=False)
class SpectralClassification:
    n_hc: int
    n_hr_plus: int
    n_hr_minus: int
    n_e: int
    blocks: tuple
    B: np.ndarray
    F: np.ndarray
    basis: SymplecticMatrix
    dS: SymplecticMatrix
    mode_kinds: tuple
    canonical: bool = True
    basis_error: float = 0.0
    reconstruction_error: float = 0.0

    @property
    def dim(self):
        return self.dS.dim

    @property
    def elliptic_angles(self):
        return [b.log.imag for b in self.blocks if b.kind == ELLIPTIC]

    def E(self):
        """exp(-JF) in the constructed basis."""
        return linalg.expm(-self.basis.J @ self.F)

    def to_original(self, a):
        t = self.basis.entries
        return t @ a @ np.linalg.inv(t)

    def summary(self):
        return {
            "dim": self.dim,
            "n_hc": self.n_hc,
            "n_hr_plus": self.n_hr_plus,
            "n_hr_minus": self.n_hr_minus,
            "n_e": self.n_e,
            "blocks": [{"eigenvalue": [b.eigenvalue.real, b.eigenvalue.imag],
                        "multiplicity": b.multiplicity,
                        "log": [b.log.real, b.log.imag],
                        "kind": b.kind} for b in self.blocks],
            "canonical": self.canonical,
            "basis_error": self.basis_error,
            "reconstruction_error": self.reconstruction_error,
        }


@dataclass
class _Group:
    kind: str
    eigenvalue: complex
    log: complex
    sizes: list
    e: np.ndarray
    f: np.ndarray
    x: np.ndarray
    rotation: float
    canonical: bool = True


def _clusters(values, gap):
    # single linkage on |a - b| <= gap * max(1, |a|)
    remaining = list(values)
    clusters = []
    while remaining:
        group = [remaining.pop(0)]
        grew = True
        while grew:
            grew = False
            for v in list(remaining):
                if any(abs(v - g) <= gap * max(1.0, abs(g)) for g in group):
                    group.append(v)
                    remaining.remove(v)
                    grew = True
        clusters.append(group)
    return clusters


def _invariant_subspace(a, members, eigenvalues):
    spread = max(abs(p - q) for p in members for q in members)
    near = 2 * spread + 10 * CLUSTER_GAP * max(1.0, max(abs(m) for m in members))
    others = [ev for ev in eigenvalues
              if min(min(abs(ev - m), abs(ev - m.conjugate())) for m in members) > near]
    sep = min((min(abs(ev - m), abs(ev - m.conjugate())) for ev in others for m in members), default=np.inf)
    radius = max(min(0.5 * sep, 1e3 * near), near)

    def select(re, im):
        ev = complex(re, im)
        return any(abs(ev - m) <= radius or abs(ev - m.conjugate()) <= radius for m in members)

    try:
        _, z, sdim = linalg.schur(a, output="real", sort=select)
    except linalg.LinAlgError as e:
        raise UnsupportedSpectrumError(f"invariant subspace near {members[0]:.6g} could not be separated: {e}")
    return z[:, :sdim]


def _jordan_sizes(a_u, mu, count, rank_tol):
    n = a_u.shape[0]
    nmat = a_u.astype(complex) - mu * np.eye(n)
    scale = max(1.0, float(np.linalg.norm(a_u, 2)))
    ranks = [n]
    power = np.eye(n, dtype=complex)
    for j in range(1, count + 2):
        power = power @ nmat
        ranks.append(int(np.linalg.matrix_rank(power, tol=rank_tol * scale ** j)))
        if ranks[-1] == ranks[-2]:
            break
    at_least = [ranks[j - 1] - ranks[j] for j in range(1, len(ranks))] + [0]
    sizes = []
    for j in range(1, len(at_least)):
        sizes.extend([j] * (at_least[j - 1] - at_least[j]))
    if sum(sizes) != count:
        logger.debug("rank staircase %s inconsistent with multiplicity %d, treating as semisimple", ranks, count)
        sizes = [1] * count
    return sorted(sizes, reverse=True)


def _canonical_basis(x_raw, lam, sizes, pair):
    """
    Basis of the invariant subspace in which x_raw is in real Jordan form.

    Only the semisimple case and the single-chain case are constructed;
    returns None otherwise.
    """
    n = x_raw.shape[0]
    count = sum(sizes)
    if not pair:
        if all(s == 1 for s in sizes):
            return np.eye(n)
        if len(sizes) != 1:
            return None
        nx = x_raw - lam.real * np.eye(n)
        _, _, vh = np.linalg.svd(np.linalg.matrix_power(nx, n - 1))
        chain = [vh[0]]
        for _ in range(n - 1):
            chain.insert(0, nx @ chain[0])
        return np.column_stack(chain)
    depth = sizes[0]
    if any(s != depth for s in sizes) or (depth > 1 and len(sizes) > 1):
        return None
    nx = x_raw.astype(complex) - lam * np.eye(n)
    gen = linalg.null_space(np.linalg.matrix_power(nx, depth), rcond=RANK_TOL)
    if gen.shape[1] != count:
        return None
    if depth == 1:
        cols = [gen[:, j] for j in range(count)]
    else:
        _, _, vh = np.linalg.svd(np.linalg.matrix_power(nx, depth - 1) @ gen)
        cols = [gen @ vh[0].conj()]
        for _ in range(depth - 1):
            cols.insert(0, nx @ cols[0])
    return np.column_stack([part for c in cols for part in (c.real, c.imag)])


def _symplectic_dual(e, v0, j):
    # f spans v0 with e^T J f = -I
    g = e.T @ j @ v0
    return v0 @ (-np.linalg.inv(g))


def _hyperbolic_group(a, j, members, eigenvalues, rank_tol):
    mu = complex(np.mean(members))
    is_real = abs(mu.imag) <= CLUSTER_GAP * abs(mu)
    if is_real:
        mu = complex(mu.real, 0.0)
        kind = REAL_POSITIVE if mu.real > 0 else REAL_NEGATIVE
    else:
        kind = COMPLEX_HYPERBOLIC
    inner = [1 / m for m in members]
    u = _invariant_subspace(a, members, eigenvalues)
    v0 = _invariant_subspace(a, inner, eigenvalues)
    if u.shape[1] != v0.shape[1]:
        raise UnsupportedSpectrumError(
            f"unstable and stable subspaces for {mu:.6g} have different dimensions {u.shape[1]} / {v0.shape[1]}")
    a_u = u.T @ a @ u
    count = len(members)
    sizes = _jordan_sizes(a_u, mu, count, rank_tol)
    if kind == REAL_NEGATIVE:
        lam = complex(np.log(-mu.real))
        x_raw = np.real(linalg.logm(-a_u))
    elif kind == REAL_POSITIVE:
        lam = complex(np.log(mu.real))
        x_raw = np.real(linalg.logm(a_u))
    else:
        lam = np.log(mu)
        x_raw = np.real(linalg.logm(a_u))
    c = _canonical_basis(x_raw, lam, sizes, pair=(kind == COMPLEX_HYPERBOLIC))
    canonical = c is not None and np.linalg.cond(c) < 1e10
    if not canonical:
        logger.warning("no canonical basis for the %s block at %s (Jordan sizes %s); keeping a Schur basis",
                       kind, mu, sizes)
        c = np.eye(u.shape[1])
    x = np.linalg.solve(c, x_raw @ c)
    e = u @ c
    f = _symplectic_dual(e, v0, j)
    rotation = np.pi if kind == REAL_NEGATIVE else 0.0
    return _Group(kind, mu, lam, sizes, e, f, x, rotation, canonical)


def _elliptic_group(a, j, mu):
    null = linalg.null_space(a.astype(complex) - mu * np.eye(a.shape[0]), rcond=RANK_TOL)
    if null.shape[1] != 1:
        raise UnsupportedSpectrumError(f"elliptic eigenvalue {mu:.6g} is not simple")
    v = null[:, 0]
    u, w = v.real, v.imag
    c = u @ j @ w
    if abs(c) < 1e-12:
        raise UnsupportedSpectrumError(f"degenerate symplectic pairing for elliptic eigenvalue {mu:.6g}")
    phi = float(np.angle(mu))
    norm = np.sqrt(abs(c))
    if c < 0:
        e, f, theta = u / norm, w / norm, phi
    else:
        e, f, theta = w / norm, u / norm, -phi
    return _Group(ELLIPTIC, complex(np.exp(1j * theta)), complex(0.0, theta), [1],
                  e[:, None], f[:, None], np.zeros((1, 1)), theta)


def classify_spectrum(ds, tol_unit=TOL_UNIT, tol_factor=TOL_FACTOR, rank_tol=RANK_TOL):
    """
    Split dS(0,0) into complex-hyperbolic, real-positive, real-negative and
    elliptic blocks and build commuting factors with dS = exp(-JF) exp(B)
    in an adapted symplectic basis. Eigenvalues between tol_unit and
    10 tol_unit off the unit circle are refused as ambiguous.
    """
    a = ds.entries
    m = ds.dim // 2
    j = ds.J
    eigenvalues = list(linalg.eigvals(a))

    outer, unit = [], []
    for ev in eigenvalues:
        d = abs(ev) - 1
        if abs(d) <= tol_unit:
            if abs(ev - 1) <= 10 * tol_unit or abs(ev + 1) <= 10 * tol_unit:
                raise ClassificationAmbiguousError(
                    f"eigenvalue {ev:.6g} at +-1 is neither hyperbolic nor nonresonant elliptic")
            if ev.imag > 0:
                unit.append(ev)
        elif abs(d) < 10 * tol_unit:
            raise ClassificationAmbiguousError(
                f"eigenvalue {ev:.10g} lies in the ambiguous band, ||mu| - 1| = {abs(d):.3e}")
        elif d > 0 and ev.imag >= -CLUSTER_GAP * abs(ev):
            outer.append(ev)

    groups = []
    for members in _clusters(outer, CLUSTER_GAP):
        groups.append(_hyperbolic_group(a, j, members, eigenvalues, rank_tol))
    for members in _clusters(unit, CLUSTER_GAP):
        if len(members) > 1:
            raise UnsupportedSpectrumError(
                f"elliptic eigenvalue {members[0]:.6g} has multiplicity {len(members)}; only simple elliptic blocks are supported")
        groups.append(_elliptic_group(a, j, members[0]))
    groups.sort(key=lambda g: (BLOCK_ORDER.index(g.kind), -abs(g.log)))

    blocks, mode_kinds = [], []
    for g in groups:
        for size in g.sizes:
            blocks.append(SpectralBlock(g.eigenvalue, size, g.log, g.kind))
        mode_kinds.extend([g.kind] * g.e.shape[1])
    counts = {kind: sum(1 for b in blocks if b.kind == kind) for kind in BLOCK_ORDER}
    dim_count = sum((4 if b.kind == COMPLEX_HYPERBOLIC else 2) * b.multiplicity for b in blocks)
    if dim_count != 2 * m or len(mode_kinds) != m:
        raise NumericalFailure(f"block dimensions add up to {dim_count}, expected {2 * m}")

    t = np.hstack([np.hstack([g.e for g in groups]), np.hstack([g.f for g in groups])])
    basis = SymplecticMatrix.from_array(t, tol=max(1e-8, scaled_tolerance(t, 1e-8)))
    x = linalg.block_diag(*[g.x for g in groups])
    b = np.block([[x, np.zeros((m, m))], [np.zeros((m, m)), -x.T]])
    rot = np.concatenate([[g.rotation] * g.e.shape[1] for g in groups])
    f = np.diag(np.concatenate([rot, rot]))

    t_inv = np.linalg.inv(t)
    product = linalg.expm(-j @ f) @ linalg.expm(b)
    a_normal = t_inv @ a @ t
    basis_error = float(np.linalg.norm(product - a_normal) / np.linalg.norm(a_normal))
    reconstruction_error = float(np.linalg.norm(t @ product @ t_inv - a) / np.linalg.norm(a))
    logger.debug("classification errors: basis %.3e, original coordinates %.3e", basis_error, reconstruction_error)
    if max(basis_error, reconstruction_error) > tol_factor:
        raise NumericalFailure(
            f"factorization exp(-JF)exp(B) misses dS by {max(basis_error, reconstruction_error):.3e} > {tol_factor:.1e}")

    b.setflags(write=False)
    f.setflags(write=False)
    return SpectralClassification(
        n_hc=counts[COMPLEX_HYPERBOLIC], n_hr_plus=counts[REAL_POSITIVE],
        n_hr_minus=counts[REAL_NEGATIVE], n_e=counts[ELLIPTIC],
        blocks=tuple(blocks), B=b, F=f, basis=basis, dS=ds, mode_kinds=tuple(mode_kinds),
        canonical=all(g.canonical for g in groups),
        basis_error=basis_error, reconstruction_error=reconstruction_error)


def adapted_coordinates(cls, tol=1e-8):
    """
    The symplectic basis of a classification. On the hyperbolic part the
    unstable directions span the x-axes and the stable ones the xi-axes.
    """
    m = cls.dim // 2
    t = cls.basis.entries
    a_normal = np.linalg.solve(t, cls.dS.entries @ t)
    hyp = [i for i, kind in enumerate(cls.mode_kinds) if kind != ELLIPTIC]
    rows = hyp + [m + i for i in hyp]
    coupling = max(np.abs(a_normal[np.ix_(hyp, [m + i for i in hyp])]).max(initial=0.0),
                   np.abs(a_normal[np.ix_([m + i for i in hyp], hyp)]).max(initial=0.0))
    scale = max(1.0, np.abs(a_normal[np.ix_(rows, rows)]).max(initial=0.0))
    if coupling > tol * scale:
        raise NumericalFailure(f"stable and unstable directions are coupled by {coupling:.3e} in the adapted basis")
    return cls.basis


# ----------------------------------------------------------------------------
# nonresonance
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class NonresonanceVerdict:
    status: str
    witness: tuple = None
    closest: float = np.inf
    bound: int = 0


MAX_SCAN = 4_000_000


def nonresonance_check(alphas, denominator_bound=50, tol=1e-9, margin=1e-6):
    """Scan integer relations sum c_j alpha_j in pi Z with |c_j| <= bound."""
    alphas = np.asarray(alphas, dtype=float)
    n = len(alphas)
    if n == 0:
        return NonresonanceVerdict("independent", bound=denominator_bound)
    bound = denominator_bound
    while (2 * bound + 1) ** n > MAX_SCAN and bound > 1:
        bound -= 1
    if bound != denominator_bound:
        logger.warning("nonresonance scan bound reduced from %d to %d for %d angles",
                       denominator_bound, bound, n)
    coeffs = np.array(list(itertools.product(range(-bound, bound + 1), repeat=n)), dtype=np.int64)
    first = np.array([c[np.flatnonzero(c)[0]] if c.any() else 0 for c in coeffs])
    coeffs = coeffs[first > 0]
    order = np.lexsort((np.abs(coeffs).sum(axis=1), np.abs(coeffs).max(axis=1)))
    coeffs = coeffs[order]
    sums = coeffs @ alphas
    dist = np.abs(sums - np.pi * np.round(sums / np.pi))
    hits = np.flatnonzero(dist <= tol * (1 + np.abs(sums)))
    if hits.size:
        witness = tuple(int(c) for c in coeffs[hits[0]])
        return NonresonanceVerdict("resonant", witness, float(dist[hits[0]]), bound)
    closest = int(np.argmin(dist))
    if dist[closest] < margin:
        return NonresonanceVerdict("undecided", tuple(int(c) for c in coeffs[closest]), float(dist[closest]), bound)
    return NonresonanceVerdict("independent", None, float(dist[closest]), bound)


# ----------------------------------------------------------------------------
# quadratic Hamiltonians
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """q(x, xi) = z^T H z / 2 with z = (x, xi)."""
    hessian: np.ndarray

    @classmethod
    def from_bilinear(cls, x):
        x = np.asarray(x, dtype=float)
        m = x.shape[0]
        h = np.block([[np.zeros((m, m)), x.T], [x, np.zeros((m, m))]])
        return cls(h)

    @classmethod
    def from_oscillators(cls, coeffs):
        c = np.asarray(coeffs, dtype=float)
        return cls(np.diag(np.concatenate([2 * c, 2 * c])))

    @property
    def dim(self):
        return self.hessian.shape[0]

    def evaluate(self, x, xi):
        z = np.concatenate([np.asarray(x, dtype=float), np.asarray(xi, dtype=float)], axis=-1)
        return 0.5 * np.einsum("...i,ij,...j->...", z, self.hessian, z)

    def gradient(self, x, xi):
        z = np.concatenate([np.asarray(x, dtype=float), np.asarray(xi, dtype=float)], axis=-1)
        g = z @ self.hessian.T
        m = self.dim // 2
        return g[..., :m], g[..., m:]

    def hamiltonian_matrix(self):
        return -standard_form(self.dim // 2) @ self.hessian

    def flow(self, t=1.0):
        return linalg.expm(t * self.hamiltonian_matrix())


@dataclass(frozen=True, eq=False)
class QuadraticHamiltonian:
    dim: int
    hyp_coeffs: np.ndarray
    ell_coeffs: np.ndarray
    ah_coeffs: np.ndarray
    mode_kinds: tuple = field(default=())

    @property
    def q(self):
        return QuadraticForm.from_bilinear(self.hyp_coeffs)

    @property
    def q1(self):
        return QuadraticForm.from_oscillators(self.ell_coeffs)

    @property
    def q_ah(self):
        return QuadraticForm.from_bilinear(np.diag(self.ah_coeffs))

    def evaluate(self, x, xi):
        return self.q.evaluate(x, xi)

    def hyperbolic_part(self):
        """q restricted to the non-elliptic modes."""
        keep = [i for i, kind in enumerate(self.mode_kinds) if kind != ELLIPTIC] if self.mode_kinds \
            else list(range(self.dim // 2))
        return QuadraticForm.from_bilinear(self.hyp_coeffs[np.ix_(keep, keep)])


def build_quadratic_hamiltonian(cls, tol=1e-8):
    m = cls.dim // 2
    x = np.array(cls.B[:m, :m])
    x[np.abs(x) < 1e-14 * max(1.0, np.abs(x).max(initial=0.0))] = 0.0
    ell = np.diag(cls.F)[:m] / 2
    ah = np.array([2.0 if kind == ELLIPTIC else 0.0 for kind in cls.mode_kinds])
    qh = QuadraticHamiltonian(dim=cls.dim, hyp_coeffs=x, ell_coeffs=ell, ah_coeffs=ah,
                              mode_kinds=cls.mode_kinds)
    j = cls.basis.J
    err_b = np.linalg.norm(qh.q.flow() - linalg.expm(cls.B)) / max(1.0, np.linalg.norm(linalg.expm(cls.B)))
    err_f = np.linalg.norm(qh.q1.flow() - linalg.expm(-j @ cls.F))
    if max(err_b, err_f) > tol:
        raise NumericalFailure(f"quadratic Hamiltonian flows miss exp(B) / exp(-JF) by {err_b:.3e} / {err_f:.3e}")
    return qh


def artificial_hyperbolic_generator(cls):
    """Hamiltonian matrix of q_ah = sum over elliptic modes of 2 x_j xi_j."""
    m = cls.dim // 2
    d = np.diag([2.0 if kind == ELLIPTIC else 0.0 for kind in cls.mode_kinds])
    return np.block([[d, np.zeros((m, m))], [np.zeros((m, m)), -d]])


def artificial_hyperbolic_map(cls):
    return linalg.expm(artificial_hyperbolic_generator(cls))


# ----------------------------------------------------------------------------
# cutoff schedules and deformations
# ----------------------------------------------------------------------------

def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def _bump_derivative(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos]) / s[pos] ** 2
    return out


def smooth_step(s):
    """0 for s <= 0, 1 for s >= 1, C-infinity and increasing in between."""
    s = np.asarray(s, dtype=float)
    a, b = _bump(s), _bump(1 - s)
    return a / (a + b)


def smooth_step_derivative(s):
    s = np.asarray(s, dtype=float)
    a, b = _bump(s), _bump(1 - s)
    da, db = _bump_derivative(s), _bump_derivative(1 - s)
    return (da * b + a * db) / (a + b) ** 2


@dataclass(frozen=True)
class Ramp:
    start: float
    stop: float

    def __post_init__(self):
        if not self.start < self.stop:
            raise ScheduleError(f"ramp support [{self.start}, {self.stop}] is empty")

    @property
    def support(self):
        return (self.start, self.stop)

    def __call__(self, t):
        v = smooth_step((np.asarray(t, dtype=float) - self.start) / (self.stop - self.start))
        return float(v) if np.ndim(v) == 0 else v

    def derivative(self, t):
        width = self.stop - self.start
        v = smooth_step_derivative((np.asarray(t, dtype=float) - self.start) / width) / width
        return float(v) if np.ndim(v) == 0 else v


@dataclass(frozen=True)
class DeformationSchedule:
    psi1: Ramp = Ramp(0.0, 0.25)
    chi: Ramp = Ramp(0.25, 0.5)
    psi2: Ramp = Ramp(0.5, 0.75)
    psi: Ramp = Ramp(0.75, 1.0)

    def __post_init__(self):
        ramps = [self.psi1, self.chi, self.psi2, self.psi]
        if ramps[0].start < 0 or ramps[-1].stop > 1:
            raise ScheduleError("schedule supports must lie in [0, 1]")
        for left, right in zip(ramps, ramps[1:]):
            if left.stop > right.start:
                raise ScheduleError(f"supports {left.support} and {right.support} overlap")

    def supports(self):
        return {"psi1": self.psi1.support, "chi": self.chi.support,
                "psi2": self.psi2.support, "psi": self.psi.support}


@dataclass(frozen=True, eq=False)
class FlowReparametrization:
    generator: object
    psi_end: np.ndarray
    phi_end: np.ndarray

    @property
    def mismatch(self):
        return float(np.linalg.norm(self.psi_end - self.phi_end))


def _solve_matrix_ode(generator, n, rtol, atol):
    def rhs(t, y):
        return (generator(t) @ y.reshape(n, n)).ravel()

    sol = solve_ivp(rhs, (0.0, 1.0), np.eye(n).ravel(), method="DOP853",
                    rtol=rtol, atol=atol, max_step=1.0 / 64)
    if not sol.success:
        raise IntegrationError(
            f"matrix ODE integration failed at t = {sol.t[-1]:.6f} after {sol.nfev} evaluations: {sol.message}")
    return sol.y[:, -1].reshape(n, n)


def reparametrize_flow(a, chi=Ramp(1.0 / 3.0, 2.0 / 3.0), rtol=1e-12, atol=1e-13):
    """
    Reparametrize d/dt phi = A(t) phi so that the generator vanishes near
    t = 0 and t = 1: psi(t) = phi(chi(t)) solves d/dt psi = B(t) psi with
    B(t) = chi'(t) A(chi(t)).
    """
    n = np.asarray(a(0.0)).shape[0]

    def generator(t):
        return chi.derivative(t) * np.asarray(a(chi(t)))

    psi_end = _solve_matrix_ode(generator, n, rtol, atol)
    phi_end = _solve_matrix_ode(lambda t: np.asarray(a(t)), n, rtol, atol)
    return FlowReparametrization(generator=generator, psi_end=psi_end, phi_end=phi_end)


def _scaled_expm(s, generator):
    if s == 0.0:
        return np.eye(generator.shape[0])
    return linalg.expm(s * generator)


def composite_deformation(cls, sched, t, in_normal_basis=False):
    """
    kappa_t = exp(-psi1(t) J F) . exp(psi2(t) H_ah) . exp(psi(t) (B - H_ah))

    Identity at t = 0, E = exp(-JF) across the chi ramp, dS at t = 1.
    """
    if not 0.0 <= t <= 1.0:
        raise ScheduleError(f"deformation parameter t = {t} outside [0, 1]")
    j = cls.basis.J
    h_ah = artificial_hyperbolic_generator(cls)
    kappa = (_scaled_expm(sched.psi1(t), -j @ cls.F)
             @ _scaled_expm(sched.psi2(t), h_ah)
             @ _scaled_expm(sched.psi(t), cls.B - h_ah))
    if not in_normal_basis:
        kappa = cls.to_original(kappa)
    return SymplecticMatrix.from_array(kappa, tol=scaled_tolerance(kappa, 1e-8))
