"""Exact minimal-growth certificates for the frozen-coefficient operator.

The decaying-trace coefficients are the load-bearing derived quantity
here, so they are checked against an independent oracle: direct inward
integration of the radial equation from deep in the decay regime,
followed by a least-squares read-off of the tip expansion.  The oracle
shares no code with the closed forms under test.
"""

import cmath
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.special import kve

from conespectra.model import ClosedLink, ConeModelOperator, ExtensionDomain, Ray, SectorLink
from conespectra.normalop import (
    DEFAULT_PROBE_RADII,
    LambdaOnSpectrumCut,
    decaying_trace,
    normal_invertible,
    ray_minimal_growth_normal,
)

CLOSED = ConeModelOperator(
    order_m=2, dim_n=2, weight_gamma=-1.0, geometry=ClosedLink(), outer_radius_R=1.0
)
SECTOR = ConeModelOperator(
    order_m=2,
    dim_n=2,
    weight_gamma=-1.0,
    geometry=SectorLink(alpha=1.5 * math.pi),
    outer_radius_R=1.0,
)


def shooting_trace(nu: float, lam: complex) -> np.ndarray:
    """Independent oracle for the decaying solution's tip coordinates.

    Integrates -u'' - u'/x + nu^2 u / x^2 = lam u inward from x0 = 18
    (seeded with the scaled decaying Bessel values, so the growing
    branch is suppressed by e^{-2 Re w x0}) and fits a four-term tip
    expansion on x in [1e-4, 1e-2]; the extra two terms absorb the
    O(x^{e+2}) corrections.  Returns the unit-norm leading pair.
    """
    w = cmath.sqrt(-lam)
    x0 = 18.0
    u0 = kve(nu, w * x0)
    du0 = -0.5 * (kve(nu - 1, w * x0) + kve(nu + 1, w * x0)) * w

    def rhs(x, y):
        u = y[0] + 1j * y[1]
        v = y[2] + 1j * y[3]
        vp = -v / x + (nu**2 / x**2 - lam) * u
        return [v.real, v.imag, vp.real, vp.imag]

    xs = np.geomspace(1e-4, 1e-2, 9)
    sol = solve_ivp(
        rhs,
        (x0, xs[0]),
        [u0.real, u0.imag, du0.real, du0.imag],
        t_eval=xs[::-1],
        rtol=1e-12,
        atol=1e-300,
        method="DOP853",
    )
    uu = sol.y[0][::-1] + 1j * sol.y[1][::-1]
    if nu == 0.0:
        cols = [np.ones_like(xs), np.log(xs), xs**2, xs**2 * np.log(xs)]
    else:
        cols = [xs**nu, xs ** (-nu), xs ** (nu + 2.0), xs ** (2.0 - nu)]
    design = np.stack(cols, axis=1).astype(complex)
    coef, *_ = np.linalg.lstsq(design, uu, rcond=None)
    lead = np.array([coef[0], coef[1]])
    return lead / np.linalg.norm(lead)


def subspace_angle(u, v) -> float:
    u = np.asarray(u, dtype=complex).ravel()
    v = np.asarray(v, dtype=complex).ravel()
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    return math.acos(min(1.0, abs(np.vdot(u, v))))


PROBE_LAMBDAS = [
    4.0j,
    -3.0 + 2.0j,
    9.0 * cmath.exp(0.75j * math.pi),
    2.5 * cmath.exp(-0.5j * math.pi),
    30.0 * cmath.exp(1.2j),
]


class TestDecayingTraceOracle:
    @pytest.mark.parametrize("lam", PROBE_LAMBDAS)
    def test_closed_link_trace_matches_shooting(self, lam):
        trace = decaying_trace(CLOSED, 0, lam)
        assert subspace_angle(trace.coeffs, shooting_trace(0.0, lam)) < 1e-6

    @pytest.mark.parametrize("lam", PROBE_LAMBDAS)
    def test_sector_trace_matches_shooting(self, lam):
        trace = decaying_trace(SECTOR, 1, lam)
        assert subspace_angle(trace.coeffs, shooting_trace(2.0 / 3.0, lam)) < 1e-6

    def test_trace_is_unit_norm(self):
        for model, k in ((CLOSED, 0), (SECTOR, 1)):
            tr = decaying_trace(model, k, 4.0j)
            assert np.linalg.norm(tr.coeffs) == pytest.approx(1.0, rel=1e-12)
            assert tr.mode_k == k
            assert tr.lam == 4.0j

    def test_direction_depends_only_on_ray_through_scaling(self):
        # kappa-homogeneity: lambda -> t^2 lambda rotates nothing, it
        # rescales the two components by t^{+-nu}; the direction at two
        # radii on one ray must agree after undoing that scaling
        nu = 2.0 / 3.0
        lam1 = 4.0 * cmath.exp(0.5j * math.pi)
        lam2 = 36.0 * cmath.exp(0.5j * math.pi)
        t = 3.0  # sqrt(36/4)
        c1 = decaying_trace(SECTOR, 1, lam1).coeffs
        c2 = decaying_trace(SECTOR, 1, lam2).coeffs
        undone = np.array([c2[0] / t**nu, c2[1] * t**nu])
        assert subspace_angle(c1, undone) < 1e-12

    def test_spectral_cut_rejected(self):
        with pytest.raises(LambdaOnSpectrumCut):
            decaying_trace(CLOSED, 0, 5.0)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError, match="mode"):
            decaying_trace(CLOSED, 3, 4.0j)


class TestNormalInvertible:
    def test_generic_domain_invertible_off_cut(self):
        dom = ExtensionDomain.line([1.0, 1.0])
        assert normal_invertible(CLOSED, dom, 4.0j) is True
        assert normal_invertible(SECTOR, dom, -2.0 + 1.0j) is True

    def test_eigen_domain_not_invertible_at_its_lambda(self):
        lam0 = 4.0 * cmath.exp(0.5j * math.pi)
        for model, k in ((CLOSED, 0), (SECTOR, 1)):
            dom = ExtensionDomain.line(list(decaying_trace(model, k, lam0).coeffs))
            assert normal_invertible(model, dom, lam0) is False
            # and invertible again away from the eigenvalue
            assert normal_invertible(model, dom, 2.0 * lam0) is True

    def test_cut_lambda_rejected(self):
        with pytest.raises(LambdaOnSpectrumCut):
            normal_invertible(CLOSED, ExtensionDomain.line([1.0, 0.0]), 1.0)


class TestRayCertificates:
    @pytest.mark.parametrize("theta", [0.5 * math.pi, math.pi, 1.5 * math.pi])
    def test_closed_link_rays_are_minimal(self, theta):
        verdict = ray_minimal_growth_normal(CLOSED, ExtensionDomain.line([1.0, 1.0]), Ray(theta))
        assert verdict.verdict == "Minimal"
        assert verdict.slope is None

    @pytest.mark.parametrize("theta", [0.5 * math.pi, 1.5 * math.pi])
    def test_sector_vertical_rays_are_minimal(self, theta):
        verdict = ray_minimal_growth_normal(SECTOR, ExtensionDomain.line([1.0, 1.0j]), Ray(theta))
        assert verdict.verdict == "Minimal"

    def test_sector_real_axis_parallel_is_uncertified(self):
        verdict = ray_minimal_growth_normal(SECTOR, ExtensionDomain.line([1.0, 1.0]), Ray(math.pi))
        assert verdict.verdict == "Uncertified"
        assert "parallel" in verdict.note

    def test_positive_real_axis_rejected(self):
        with pytest.raises(ValueError, match="cut"):
            ray_minimal_growth_normal(CLOSED, ExtensionDomain.line([1.0, 1.0]), Ray(0.0))

    def test_eigen_domain_fails_with_witness(self):
        lam0 = 4.0 * cmath.exp(0.5j * math.pi)
        for model, k in ((CLOSED, 0), (SECTOR, 1)):
            dom = ExtensionDomain.line(list(decaying_trace(model, k, lam0).coeffs))
            verdict = ray_minimal_growth_normal(
                model, dom, Ray(0.5 * math.pi), probe_radii=(0.1, 1.0, 4.0, 10.0)
            )
            assert verdict.verdict == "Fails"
            assert verdict.witness is not None
            wit_lam = complex(verdict.witness["lambda"][0], verdict.witness["lambda"][1])
            assert abs(wit_lam - lam0) < 1e-9

    def test_verdict_independent_of_probe_radii(self):
        dom = ExtensionDomain.line([1.0, 1.0])
        sets = [DEFAULT_PROBE_RADII, (0.5, 2.0, 8.0), (1e-3, 1.0, 1e3, 1e6)]
        verdicts = {
            ray_minimal_growth_normal(CLOSED, dom, Ray(0.5 * math.pi), probe_radii=rs).verdict
            for rs in sets
        }
        assert verdicts == {"Minimal"}

    def test_nonpositive_probe_radius_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            ray_minimal_growth_normal(
                CLOSED, ExtensionDomain.line([1.0, 1.0]), Ray(0.5 * math.pi), probe_radii=(0.0, 1.0)
            )

    def test_json_payload_shape(self):
        verdict = ray_minimal_growth_normal(CLOSED, ExtensionDomain.line([1.0, 1.0]), Ray(0.5 * math.pi))
        d = verdict.to_json_dict()
        assert d["verdict"] == "Minimal"
        assert d["theta"] == 0.5 * math.pi
        assert d["witness"] is None
