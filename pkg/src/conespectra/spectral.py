"""Dense spectral experiments on discrete operator pencils.

Everything here works on a (K, M) pencil in a fixed basis: generalized
eigensolves, resolvent norms along rays with log-log growth fits,
completeness residuals of eigenvector expansions, Weyl and Schatten
exponent fits, and an independent Bessel secular-equation oracle for
the radial model problem L_nu u = -u'' - u'/x + nu^2 u/x^2 with
u(R) = 0 and tip coefficients (a, b) on the singular pair.
"""

from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.special import gamma as _gamma_fn
from scipy.special import jv, jvp, yv

from .model import Ray, complex_to_pair

__all__ = [
    "IllConditionedMass",
    "TrustLimitExceeded",
    "RootFindingError",
    "SpectralResult",
    "RayVerdict",
    "CompletenessCertificate",
    "solve_pencil",
    "resolvent_norm",
    "ray_minimal_growth_full",
    "completeness_residual",
    "oracle_eigenvalues",
    "dirichlet_mode_eigenvalues",
    "weyl_fit",
    "schatten_fit",
    "embedding_singular_values",
    "completeness_certificate",
]

EULER_GAMMA = 0.5772156649015328606

MASS_CONDITION_LIMIT = 1e12
RETAIN_FRACTION = 0.8
SLOPE_WINDOW = (-1.15, -0.85)


class IllConditionedMass(RuntimeError):
    """Mass matrix condition number exceeds the solver gate."""


class TrustLimitExceeded(ValueError):
    """A probe radius lies beyond the discretization's trusted range."""


class RootFindingError(RuntimeError):
    """The secular-equation scan failed to converge on some root."""


def _worker_count() -> int:
    raw = os.environ.get("CONESPECTRA_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def parallel_map(fn, items):
    """Order-preserving map, threaded when CONESPECTRA_THREADS allows."""
    items = list(items)
    workers = min(_worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class SpectralResult:
    """Full eigendecomposition of a pencil, sorted by |lambda|.

    The top 20% of |lambda| is treated as discretization-polluted;
    `n_retained` marks the trusted prefix.  K and M are kept so that
    downstream projections can fall back to invariant subspaces of the
    same pencil.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    n_retained: int
    K: np.ndarray
    M: np.ndarray

    @property
    def retained_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[: self.n_retained]

    @property
    def retained_eigenvectors(self) -> np.ndarray:
        return self.eigenvectors[:, : self.n_retained]

    @property
    def trust_limit(self) -> float:
        """Largest |lambda| at which resolvent probes are meaningful."""
        return 0.1 * float(np.max(np.abs(self.retained_eigenvalues)))


@dataclass(frozen=True)
class RayVerdict:
    """Outcome of a minimal-growth check along one ray.

    sup_bound and slope are populated by the resolvent-probing variant;
    the normal-operator criterion is exact and leaves them None.
    """

    ray: Ray
    verdict: str  # "Minimal" | "Fails" | "Uncertified"
    sup_bound: Optional[float] = None
    slope: Optional[float] = None
    witness: Optional[dict] = None
    note: str = ""

    def __post_init__(self):
        if self.verdict not in ("Minimal", "Fails", "Uncertified"):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "Minimal":
            if self.slope is not None and not (
                SLOPE_WINDOW[0] <= self.slope <= SLOPE_WINDOW[1]
            ):
                raise ValueError("Minimal verdict with slope outside the growth window")
            if self.sup_bound is not None and not math.isfinite(self.sup_bound):
                raise ValueError("Minimal verdict requires a finite sup bound")

    def to_json_dict(self) -> dict:
        return {
            "theta": self.ray.angle_theta,
            "verdict": self.verdict,
            "sup_bound": self.sup_bound,
            "slope": self.slope,
            "witness": self.witness,
            "note": self.note,
        }


@dataclass(frozen=True)
class CompletenessCertificate:
    """Ray-fan certificate: all rays minimal and no angular gap too wide."""

    n: int
    m: int
    schatten_p: float
    rays: tuple
    max_gap: float
    complete: bool

    def __post_init__(self):
        should = all(v.verdict == "Minimal" for v in self.rays) and (
            self.max_gap <= math.pi * self.m / self.n + 1e-12
        )
        if bool(self.complete) != should:
            raise ValueError("certificate flag inconsistent with its own rule")

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "schatten_p": self.schatten_p,
            "rays": [v.to_json_dict() for v in self.rays],
            "max_gap": self.max_gap,
            "complete": self.complete,
        }


def solve_pencil(pencil) -> SpectralResult:
    """Dense generalized eigensolve of K v = lambda M v.

    Eigenpairs are sorted by ascending |lambda| (ties by real then
    imaginary part); the trailing 20% is flagged as untrusted.

    Raises
    ------
    IllConditionedMass
        If cond(M) > 1e12 or M is not positive definite.
    """
    K = np.asarray(pencil.K, dtype=complex)
    M = np.asarray(pencil.M, dtype=complex)
    if K.shape != M.shape or K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("pencil matrices must be square and of equal shape")
    mass_eigs = scipy.linalg.eigvalsh(0.5 * (M + M.conj().T))
    if mass_eigs[0] <= 0.0:
        raise IllConditionedMass("mass matrix is not positive definite")
    cond = mass_eigs[-1] / mass_eigs[0]
    if cond > MASS_CONDITION_LIMIT:
        raise IllConditionedMass(f"mass matrix condition number {cond:.3e} exceeds 1e12")

    lam, vec = scipy.linalg.eig(K, M)
    order = np.lexsort((lam.imag, lam.real, np.abs(lam)))
    lam = lam[order]
    vec = vec[:, order]
    defect = K @ vec - (M @ vec) * lam[np.newaxis, :]
    residuals = np.linalg.norm(defect, axis=0) / np.linalg.norm(vec, axis=0)
    n = len(lam)
    n_retained = max(1, math.floor(RETAIN_FRACTION * n))
    return SpectralResult(
        eigenvalues=lam,
        eigenvectors=vec,
        residuals=residuals,
        n_retained=n_retained,
        K=K,
        M=M,
    )


def resolvent_norm(pencil, lam: complex) -> float:
    """Operator norm of (A - lambda)^{-1} in the M-inner product.

    Computed as 1 / sigma_min of the M-symmetrized shifted pencil
    L^{-1}(K - lambda M)L^{-H} with M = L L^H; returns +inf when lambda
    is (numerically) an eigenvalue.
    """
    K = np.asarray(pencil.K, dtype=complex)
    M = np.asarray(pencil.M, dtype=complex)
    L = scipy.linalg.cholesky(0.5 * (M + M.conj().T), lower=True)
    A = K - complex(lam) * M
    X = scipy.linalg.solve_triangular(L, A, lower=True)
    Y = scipy.linalg.solve_triangular(L, X.conj().T, lower=True).conj().T
    s = scipy.linalg.svdvals(Y)
    if s[0] == 0.0 or s[-1] < 1e-13 * s[0]:
        return math.inf
    return float(1.0 / s[-1])


def ray_minimal_growth_full(
    pencil,
    ray: Ray,
    radii: Sequence[float],
    result: Optional[SpectralResult] = None,
) -> RayVerdict:
    """Probe the resolvent along a ray and fit its decay rate.

    The ray is Minimal when the log-log slope of the resolvent norm
    against |lambda| sits in [-1.15, -0.85] and |lambda| * norm stays
    bounded over the probes.  Probe radii must stay at or below the
    trust limit 0.1 * max retained |eigenvalue|.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 3:
        raise ValueError("need at least 3 probe radii for a slope fit")
    if any(r <= 0.0 for r in radii) or any(
        r1 <= r0 for r0, r1 in zip(radii, radii[1:])
    ):
        raise ValueError("probe radii must be positive and strictly increasing")
    if result is None:
        result = solve_pencil(pencil)
    trust = result.trust_limit
    if radii[-1] > trust * (1.0 + 1e-12):
        raise TrustLimitExceeded(
            f"max probe radius {radii[-1]:.6g} exceeds trust limit {trust:.6g}"
        )
    theta = ray.angle_theta
    norms = parallel_map(
        lambda r: resolvent_norm(pencil, r * cmath.exp(1j * theta)), radii
    )
    if not all(math.isfinite(v) for v in norms):
        hit = radii[next(i for i, v in enumerate(norms) if not math.isfinite(v))]
        return RayVerdict(
            ray=ray,
            verdict="Fails",
            sup_bound=math.inf,
            slope=None,
            witness={"radii": radii, "norms": [float(v) for v in norms]},
            note=f"resolvent does not exist at |lambda| = {hit:.6g} on the ray",
        )
    sup_bound = float(max(r * v for r, v in zip(radii, norms)))
    slope = float(np.polyfit(np.log(radii), np.log(norms), 1)[0])
    if SLOPE_WINDOW[0] <= slope <= SLOPE_WINDOW[1]:
        return RayVerdict(
            ray=ray,
            verdict="Minimal",
            sup_bound=sup_bound,
            slope=slope,
            witness=None,
            note="",
        )
    return RayVerdict(
        ray=ray,
        verdict="Fails",
        sup_bound=sup_bound,
        slope=slope,
        witness={"radii": radii, "norms": [float(v) for v in norms]},
        note="resolvent growth along the ray is not O(1/|lambda|)",
    )


def _cluster_defective(result: SpectralResult, count: int):
    """Replace numerically defective eigenvector clusters by invariant subspaces.

    Eigenvalues closer than 1e-6 (relative) whose eigenvectors are
    parallel within 1e-3 rad span too little; the cluster's columns are
    swapped for an orthonormal basis of the corresponding deflating
    subspace of (K, M), which carries the generalized eigenvectors.
    """
    lam = result.eigenvalues[:count]
    V = result.eigenvectors[:, :count].copy()
    used = np.zeros(count, dtype=bool)
    for i in range(count):
        if used[i]:
            continue
        members = [i]
        for j in range(i + 1, count):
            if used[j]:
                continue
            scale = max(1.0, abs(lam[i]), abs(lam[j]))
            if abs(lam[i] - lam[j]) > 1e-6 * scale:
                continue
            vi = V[:, i] / np.linalg.norm(V[:, i])
            vj = V[:, j] / np.linalg.norm(V[:, j])
            if abs(np.vdot(vi, vj)) > math.cos(1e-3):
                members.append(j)
        if len(members) < 2:
            continue
        used[members] = True
        center = lam[members[0]]
        tol = 1e-5 * max(1.0, abs(center))

        def select(alpha, beta, _c=center, _t=tol):
            return np.abs(alpha - _c * beta) <= _t * np.abs(beta)

        _, _, alpha, beta, _, Z = scipy.linalg.ordqz(
            result.K, result.M, sort=select, output="complex"
        )
        picked = int(np.sum(select(alpha, beta)))
        width = min(len(members), picked)
        if width >= 1:
            basis = np.linalg.qr(Z[:, :width])[0]
            for col, member in zip(range(width), members):
                V[:, member] = basis[:, col]
    return V


def completeness_residual(result: SpectralResult, M, f, N_list):
    """M-orthogonal projection defects of f onto nested eigenvector spans.

    For each N in N_list, f (unit M-norm) is projected onto the span of
    the first N retained eigenvectors; the returned (N, residual) pairs
    are nonincreasing in N by construction of the nested spans.
    """
    M = np.asarray(M, dtype=complex)
    f = np.asarray(f, dtype=complex).reshape(-1)
    N_list = [int(N) for N in N_list]
    if not N_list:
        raise ValueError("N_list must be nonempty")
    if any(N < 1 for N in N_list):
        raise ValueError("projection counts must be positive")
    max_n = max(N_list)
    if max_n > result.n_retained:
        raise ValueError(
            f"N = {max_n} exceeds the retained eigenpair count {result.n_retained}"
        )
    fnorm = math.sqrt(abs(np.vdot(f, M @ f)))
    if abs(fnorm - 1.0) > 1e-6:
        raise ValueError("test vector must have unit M-norm")

    V = _cluster_defective(result, max_n)
    targets = sorted(set(N_list))
    out = {}
    basis = []
    Mq = []
    r = f.copy()
    ti = 0
    for idx in range(max_n):
        v = V[:, idx].copy()
        # two-pass M-Gram-Schmidt against the accumulated basis
        for _ in range(2):
            for q, mq in zip(basis, Mq):
                v -= q * np.vdot(mq, v)
        vnorm = math.sqrt(abs(np.vdot(v, M @ v)))
        if vnorm > 1e-8:
            q = v / vnorm
            mq = M @ q
            basis.append(q)
            Mq.append(mq)
            r = r - q * np.vdot(mq, r)
        while ti < len(targets) and targets[ti] == idx + 1:
            out[targets[ti]] = math.sqrt(abs(np.vdot(r, M @ r)))
            ti += 1
    return [(N, out[N]) for N in N_list]


# ---------------------------------------------------------------------------
# Bessel secular-equation oracle for the radial model problem.
#
# A solution behaving like a x^nu + b x^{-nu} at the tip (a + b log x
# for nu = 0) and vanishing at x = R exists exactly at the roots of an
# entire secular function F(lambda); fixing the constants by matching
# small-x series gives, with w = sqrt(lambda) (principal branch):
#   nu > 0:  F = a Gamma(1+nu) (w/2)^{-nu} J_nu(wR)
#              + b Gamma(1-nu) (w/2)^{+nu} J_{-nu}(wR)
#   nu = 0:  F = (a + b log R) J_0(wR) + b W(wR),
#            W(z) = (pi/2) Y_0(z) - (log(z/2) + gamma_E) J_0(z)
# Both are entire in lambda; for small |wR| the power series is used to
# dodge the removable sqrt/log branch points.
# ---------------------------------------------------------------------------


def _secular_series(nu: float, a: complex, b: complex, R: float, lam: np.ndarray):
    u = lam * (R * R) / 4.0
    if nu == 0.0:
        s_j = np.ones_like(u)
        s_w = np.zeros_like(u)
        term = np.ones_like(u)
        harmonic = 0.0
        for k in range(1, 80):
            term = term * (-u) / (k * k)
            harmonic += 1.0 / k
            s_j = s_j + term
            s_w = s_w - harmonic * term
        return (a + b * math.log(R)) * s_j + b * s_w
    s_p = np.ones_like(u)
    s_m = np.ones_like(u)
    t_p = np.ones_like(u)
    t_m = np.ones_like(u)
    for k in range(1, 80):
        t_p = t_p * (-u) / (k * (k + nu))
        t_m = t_m * (-u) / (k * (k - nu))
        s_p = s_p + t_p
        s_m = s_m + t_m
    return a * R**nu * s_p + b * R ** (-nu) * s_m


def _secular_closed(nu: float, a: complex, b: complex, R: float, lam: np.ndarray):
    w = np.sqrt(lam.astype(complex))
    z = w * R
    if nu == 0.0:
        wz = 0.5 * math.pi * yv(0, z) - (np.log(z / 2.0) + EULER_GAMMA) * jv(0, z)
        return (a + b * math.log(R)) * jv(0, z) + b * wz
    half_w = np.log(w / 2.0)
    return a * _gamma_fn(1.0 + nu) * np.exp(-nu * half_w) * jv(nu, z) + b * _gamma_fn(
        1.0 - nu
    ) * np.exp(nu * half_w) * jv(-nu, z)


def _secular_values(nu: float, a: complex, b: complex, R: float, lam) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    out = np.empty_like(lam)
    small = np.abs(lam) * R * R <= 144.0
    if np.any(small):
        out[small] = _secular_series(nu, a, b, R, lam[small])
    if np.any(~small):
        out[~small] = _secular_closed(nu, a, b, R, lam[~small])
    return out


def _wrap_angle(d: np.ndarray) -> np.ndarray:
    return (d + math.pi) % (2.0 * math.pi) - math.pi


class _ContourHitsRoot(Exception):
    pass


def _winding_number(F, x0: float, x1: float, y0: float, y1: float) -> int:
    """Winding of F around the counterclockwise rectangle boundary.

    Edge sampling is refined wherever the phase steps by more than
    pi/2; a persistent jump signals a root on (or hugging) the contour
    and raises _ContourHitsRoot so the caller can nudge the box.
    """
    corners = np.array(
        [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    )
    ts = np.linspace(0.0, 4.0, 4 * 24 + 1)

    def points(t):
        edge = np.minimum(np.floor(t).astype(int), 3)
        frac = t - edge
        start = corners[edge]
        end = corners[(edge + 1) % 4]
        return start + frac * (end - start)

    for _ in range(48):
        vals = F(points(ts))
        if np.any(np.abs(vals) == 0.0):
            raise _ContourHitsRoot
        steps = _wrap_angle(np.diff(np.angle(vals)))
        bad = np.abs(steps) > 0.5 * math.pi
        if not np.any(bad):
            total = float(np.sum(steps)) / (2.0 * math.pi)
            wind = round(total)
            if abs(total - wind) > 0.25:
                raise _ContourHitsRoot
            return wind
        if len(ts) > 300_000:
            raise _ContourHitsRoot
        mids = 0.5 * (ts[:-1][bad] + ts[1:][bad])
        ts = np.sort(np.concatenate([ts, mids]))
    raise _ContourHitsRoot


def _newton_polish(F, z0: complex, step_scale: float) -> Optional[complex]:
    z = complex(z0)
    for _ in range(80):
        h = 1e-6 * max(1.0, abs(z))
        f0, fp1, fm1 = F(np.array([z, z + h, z - h]))
        dfdz = (fp1 - fm1) / (2.0 * h)
        if dfdz == 0.0:
            return None
        dz = f0 / dfdz
        z = z - dz
        if abs(z - z0) > 50.0 * step_scale:
            return None
        if abs(dz) <= 1e-13 * max(1.0, abs(z)):
            return z
    return None


def _scan_rectangle(F, x0, x1, y0, y1, resolution, found, failures, depth=0):
    """Recursive argument-principle subdivision; appends (root, mult) to found."""
    try:
        wind = _winding_number(F, x0, x1, y0, y1)
    except _ContourHitsRoot:
        if depth > 90:
            failures.append(complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)))
            return
        # nudge the box outward slightly so the root moves off the contour
        dx = 1e-4 * (x1 - x0) + 1e-12
        dy = 1e-4 * (y1 - y0) + 1e-12
        _scan_rectangle(
            F, x0 - dx, x1 + dx, y0 - dy, y1 + dy, resolution, found, failures, depth + 1
        )
        return
    if wind == 0:
        return
    width = x1 - x0
    height = y1 - y0
    diag = math.hypot(width, height)
    if diag <= resolution:
        center = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
        root = _newton_polish(F, center, diag)
        if root is None:
            failures.append(center)
        else:
            found.append((root, wind))
        return
    # split off-center so roots sitting on symmetric lines miss the cut
    if width >= height:
        xm = x0 + 0.511 * width
        _scan_rectangle(F, x0, xm, y0, y1, resolution, found, failures, depth + 1)
        _scan_rectangle(F, xm, x1, y0, y1, resolution, found, failures, depth + 1)
    else:
        ym = y0 + 0.511 * height
        _scan_rectangle(F, x0, x1, y0, ym, resolution, found, failures, depth + 1)
        _scan_rectangle(F, x0, x1, ym, y1, resolution, found, failures, depth + 1)


def oracle_eigenvalues(
    nu: float, a: complex, b: complex, R: float, how_many: int
) -> np.ndarray:
    """Roots of the radial secular equation, sorted by |lambda|.

    Independent of any discretization: the spectrum of the mode
    operator with tip coefficients (a, b) and Dirichlet condition at R
    is computed by an argument-principle rectangle scan of the entire
    secular function, with Newton polishing.  Multiple roots are
    repeated per multiplicity.

    Raises
    ------
    RootFindingError
        When polishing fails near a located root or too few roots are
        found after domain expansion.
    """
    if not (0.0 <= nu < 1.0):
        raise ValueError("secular oracle covers nu in [0, 1)")
    a = complex(a)
    b = complex(b)
    if a == 0 and b == 0:
        raise ValueError("(a, b) must be nonzero")
    if not (R > 0.0 and math.isfinite(R)):
        raise ValueError("R must be positive")
    if how_many < 1:
        raise ValueError("how_many must be positive")

    def F(lam):
        return _secular_values(nu, a, b, R, lam)

    scale = (math.pi / R) ** 2
    re_hi = scale * (how_many + 3.0) ** 2
    roots: list = []
    for _ in range(4):
        found: list = []
        failures: list = []
        im_half = max(9.0 * scale, 0.12 * re_hi)
        _scan_rectangle(
            F,
            -2.0 * scale,
            re_hi,
            -im_half,
            im_half,
            resolution=1e-7 * scale,
            found=found,
            failures=failures,
        )
        if failures:
            locs = ", ".join(f"{z:.6g}" for z in failures[:4])
            raise RootFindingError(f"root polishing failed near lambda in {{{locs}}}")
        roots = []
        for root, mult in found:
            for prev, _ in roots:
                if abs(root - prev) <= 1e-7 * max(1.0, abs(root)):
                    break
            else:
                roots.append((root, mult))
        roots = [r for r, mult in roots for _ in range(mult)]
        if len(roots) >= how_many:
            break
        re_hi *= 1.9
    if len(roots) < how_many:
        raise RootFindingError(
            f"found only {len(roots)} roots where {how_many} were requested"
        )
    roots.sort(key=lambda z: (abs(z), z.real, z.imag))
    return np.array(roots[:how_many], dtype=complex)


def dirichlet_mode_eigenvalues(nu: float, R: float, how_many: int) -> np.ndarray:
    """Eigenvalues (j_{nu,k}/R)^2 of one mode's Dirichlet problem, any nu >= 0.

    Classical Bessel-zero computation (dense scan plus Newton), used
    both as the (a,b)=(1,0) cross-check of the secular oracle and for
    multi-mode eigenvalue counting where nu >= 1 modes carry no
    enrichment.
    """
    if nu < 0.0:
        raise ValueError("nu must be nonnegative")
    if how_many < 1:
        raise ValueError("how_many must be positive")
    # k-th zero sits near (k + nu/2 - 1/4) pi, first zero near nu + 1.86 nu^{1/3}
    upper = 0.5 * nu * math.pi + 1.9 * nu ** (1.0 / 3.0) + (how_many + 2) * math.pi + 4.0
    grid = np.linspace(max(1e-6, 0.5 * nu), upper, max(200, int(upper / 0.05)))
    vals = jv(nu, grid)
    sign_change = np.where(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    zeros = 0.5 * (grid[sign_change] + grid[sign_change + 1])
    for _ in range(60):
        f = jv(nu, zeros)
        fp = jvp(nu, zeros)
        step = f / fp
        zeros = zeros - step
        if np.max(np.abs(step)) < 1e-14 * max(1.0, upper):
            break
    zeros = np.unique(np.round(zeros / 1e-12) * 1e-12)
    zeros = zeros[zeros > max(1e-9, nu * 1.0000001 - 1e-9)]
    if len(zeros) < how_many:
        raise RootFindingError(
            f"Bessel zero scan found {len(zeros)} of {how_many} requested zeros"
        )
    return (zeros[:how_many] / R) ** 2


def weyl_fit(eigenvalues) -> float:
    """Growth exponent: slope of log lambda_j vs log j over the middle third."""
    lam = np.asarray(eigenvalues)
    if np.iscomplexobj(lam):
        if np.max(np.abs(lam.imag)) > 1e-9 * max(1.0, np.max(np.abs(lam))):
            raise ValueError("growth fit needs a real eigenvalue list")
        lam = lam.real
    lam = np.sort(lam.astype(float))
    if len(lam) < 30:
        raise ValueError("growth fit needs at least 30 eigenvalues")
    if lam[0] <= 0.0:
        raise ValueError("growth fit needs positive eigenvalues")
    j = np.arange(1, len(lam) + 1, dtype=float)
    third = len(lam) // 3
    sel = slice(third, 2 * third)
    slope = np.polyfit(np.log(j[sel]), np.log(lam[sel]), 1)[0]
    return float(slope)


def schatten_fit(singular_values, j_range) -> tuple:
    """Decay exponent q of s_j ~ j^{-q} over j_range, and implied p = 1/q.

    j_range is a 1-based inclusive (lo, hi) window.  A nonpositive
    fitted q (no decay) gives implied_p = inf.
    """
    s = np.asarray(singular_values, dtype=float)
    lo, hi = (int(j_range[0]), int(j_range[1]))
    if s.ndim != 1 or np.any(s <= 0.0):
        raise ValueError("singular values must be a positive 1-D list")
    if np.any(s[1:] > s[:-1] * (1.0 + 1e-12)):
        raise ValueError("singular values must be sorted descending")
    if not (1 <= lo < hi <= len(s)):
        raise ValueError(f"degenerate fit range ({lo}, {hi}) for {len(s)} values")
    j = np.arange(lo, hi + 1, dtype=float)
    window = s[lo - 1 : hi]
    slope = np.polyfit(np.log(j), np.log(window), 1)[0]
    q = float(-slope)
    implied_p = 1.0 / q if q > 1e-12 else math.inf
    return q, implied_p


def embedding_singular_values(G_high, G_low) -> np.ndarray:
    """Singular values of the identity from the G_high norm to the G_low norm.

    These are the square roots of the generalized eigenvalues
    G_low v = sigma^2 G_high v, returned descending.
    """
    G_high = np.asarray(G_high)
    G_low = np.asarray(G_low)
    if G_high.shape != G_low.shape:
        raise ValueError("Gram matrices must have equal shape")
    w = scipy.linalg.eigh(G_low, G_high, eigvals_only=True)
    w = np.clip(w, 0.0, None)
    return np.sqrt(w)[::-1]


def completeness_certificate(n: int, m: int, verdicts) -> CompletenessCertificate:
    """Combine ray verdicts into a completeness certificate.

    complete = all rays Minimal and every adjacent angular gap
    (wrapping around the circle) at most pi*m/n.  A single ray has gap
    2*pi.  schatten_p = n/m is the certified summability exponent.
    """
    verdicts = tuple(verdicts)
    if not verdicts:
        raise ValueError("need at least one ray verdict")
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive integers")
    angles = np.sort(np.array([v.ray.angle_theta for v in verdicts], dtype=float))
    if len(angles) == 1:
        max_gap = 2.0 * math.pi
    else:
        gaps = np.diff(angles)
        wrap = angles[0] + 2.0 * math.pi - angles[-1]
        max_gap = float(max(np.max(gaps), wrap))
    complete = all(v.verdict == "Minimal" for v in verdicts) and (
        max_gap <= math.pi * m / n + 1e-12
    )
    return CompletenessCertificate(
        n=int(n),
        m=int(m),
        schatten_p=n / m,
        rays=verdicts,
        max_gap=max_gap,
        complete=complete,
    )
