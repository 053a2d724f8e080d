"""Weighted Galerkin assembly: grids, pencils, Gram matrices, persistence.

The mass blocks have closed forms at the tip, so they are cross-checked
here against adaptive quadrature of the defining integrals.  Stiffness
symmetry structure (Hermitian for real extension data, a definite skew
part for genuinely complex data) is asserted at the matrix level.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from conespectra.discretize import (
    RadialGrid,
    TIP_FLOOR_RATIO,
    WeightedSobolevParams,
    assemble_embedding_grams,
    assemble_mode_pencil,
    cutoff,
    export_pencil,
    load_pencil,
)
from conespectra.model import ClosedLink, ConeModelOperator, ExtensionDomain, SectorLink
from conespectra.spectral import embedding_singular_values

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


class TestRadialGrid:
    def test_geometric_keeps_mild_ratio(self):
        g = RadialGrid.geometric(1.0, 20, 0.9)
        assert g.ratio == pytest.approx(0.9, abs=1e-15)
        assert g.nodes[0] == pytest.approx(0.9**19, rel=1e-12)
        assert g.nodes[-1] == 1.0
        assert g.count == 20

    def test_geometric_floors_aggressive_grading(self):
        # q = 0.9 at 400 nodes would put node_1 at ~5.7e-19; the factory
        # raises the effective ratio so node_1 sits at the tip floor
        g = RadialGrid.geometric(1.0, 400, 0.9)
        assert g.nodes[0] == pytest.approx(TIP_FLOOR_RATIO * 1.0, rel=1e-10)
        assert g.ratio == pytest.approx(TIP_FLOOR_RATIO ** (1.0 / 399.0), rel=1e-12)

    def test_geometric_ratio_invariant_holds(self):
        g = RadialGrid.geometric(2.0, 100, 0.9)
        r = g.nodes[:-1] / g.nodes[1:]
        assert np.allclose(r, g.ratio, rtol=1e-12, atol=0)

    def test_nodes_strictly_increasing_and_positive(self):
        for g in (RadialGrid.geometric(1.0, 50, 0.85), RadialGrid.uniform(3.0, 40)):
            assert g.nodes[0] > 0
            assert np.all(np.diff(g.nodes) > 0)

    def test_uniform_spacing(self):
        g = RadialGrid.uniform(2.0, 16)
        assert g.grading == "uniform"
        assert g.ratio is None
        assert np.allclose(np.diff(g.nodes), 2.0 / 16)

    def test_bad_inputs_rejected(self):
        with pytest.raises(ValueError):
            RadialGrid.geometric(1.0, 10, 1.1)
        with pytest.raises(ValueError):
            RadialGrid.geometric(-1.0, 10, 0.9)
        with pytest.raises(ValueError):
            RadialGrid.uniform(1.0, 1)


class TestCutoff:
    def test_plateau_and_support(self):
        x = np.array([0.01, 0.25, 0.3, 0.49, 0.5, 0.8, 1.0])
        w, wp, wpp = cutoff(x, 1.0)
        assert w[0] == 1.0 and w[1] == 1.0
        assert w[4] == 0.0 and w[5] == 0.0 and w[6] == 0.0
        assert 0.0 < w[2] < 1.0 and 0.0 < w[3] < 1.0
        # derivatives vanish on both plateaus
        assert wp[0] == wp[1] == wp[4] == wp[5] == 0.0
        assert wpp[0] == wpp[1] == wpp[4] == wpp[5] == 0.0

    def test_derivatives_match_finite_differences(self):
        xs = np.linspace(0.26, 0.49, 40)
        h = 1e-6
        w, wp, wpp = cutoff(xs, 1.0)
        wp_fd = (cutoff(xs + h, 1.0)[0] - cutoff(xs - h, 1.0)[0]) / (2 * h)
        wpp_fd = (cutoff(xs + h, 1.0)[1] - cutoff(xs - h, 1.0)[1]) / (2 * h)
        assert np.allclose(wp, wp_fd, atol=1e-7)
        assert np.allclose(wpp, wpp_fd, atol=1e-5)

    def test_scales_with_outer_radius(self):
        w2, _, _ = cutoff(np.array([0.49, 0.51, 0.99, 1.01]), 2.0)
        assert w2[0] == 1.0 and w2[1] < 1.0
        assert w2[2] > 0.0 and w2[3] == 0.0


def quad_complex(f, a, b, **kw):
    re = quad(lambda x: f(x).real, a, b, **kw)[0]
    im = quad(lambda x: f(x).imag, a, b, **kw)[0]
    return re + 1j * im


@pytest.fixture(scope="module")
def grid():
    return RadialGrid.geometric(1.0, 48, 0.9)


class TestPencilAssembly:
    def test_shapes_and_labels(self, grid):
        pen = assemble_mode_pencil(CLOSED, 0, grid, ExtensionDomain.line([1.0, 1.0]))
        n_hats = grid.count - 2
        assert pen.size == n_hats + 1
        assert pen.basis_labels[0] == "hat_2"
        assert pen.basis_labels[n_hats - 1] == f"hat_{grid.count - 1}"
        assert pen.basis_labels[-1].startswith("enrichment")
        assert pen.K.shape == pen.M.shape == (pen.size, pen.size)

    def test_friedrichs_pencil_has_no_enrichment(self, grid):
        pen = assemble_mode_pencil(CLOSED, 0, grid, None)
        assert pen.size == grid.count - 2
        assert all(label.startswith("hat_") for label in pen.basis_labels)
        assert pen.enrichment_coeffs is None

    def test_matrices_are_frozen(self, grid):
        pen = assemble_mode_pencil(CLOSED, 0, grid, ExtensionDomain.line([1.0, 0.0]))
        with pytest.raises(ValueError):
            pen.K[0, 0] = 1.0
        with pytest.raises(ValueError):
            pen.M[0, 0] = 1.0

    def test_mass_is_hermitian_positive_definite(self, grid):
        for model, k, ab in ((CLOSED, 0, (1.0, 1.0)), (SECTOR, 1, (1.0, 1.0j))):
            pen = assemble_mode_pencil(model, k, grid, ExtensionDomain.line(list(ab)))
            assert np.max(np.abs(pen.M - pen.M.conj().T)) <= 1e-13 * np.max(np.abs(pen.M))
            w = np.linalg.eigvalsh(pen.M)
            assert w.min() > 0.0

    @pytest.mark.parametrize("model,k,ab", [
        (CLOSED, 0, (1.0, 0.0)),
        (CLOSED, 0, (1.0, 1.0)),
        (SECTOR, 1, (0.0, 1.0)),
        (SECTOR, 1, (1.0, -2.0)),
    ])
    def test_stiffness_hermitian_for_real_extension(self, grid, model, k, ab):
        pen = assemble_mode_pencil(model, k, grid, ExtensionDomain.line(list(ab)))
        scale = np.max(np.abs(pen.K))
        assert np.max(np.abs(pen.K - pen.K.conj().T)) <= 1e-10 * scale

    @pytest.mark.parametrize("model,k", [(CLOSED, 0), (SECTOR, 1)])
    def test_stiffness_skew_part_for_complex_extension(self, grid, model, k):
        pen = assemble_mode_pencil(model, k, grid, ExtensionDomain.line([1.0, 1.0j]))
        scale = np.max(np.abs(pen.K))
        skew = np.max(np.abs(pen.K - pen.K.conj().T))
        assert skew >= 1e-3 * scale

    @pytest.mark.parametrize("model,k,ab,nu", [
        (CLOSED, 0, (1.0, 1.0), 0.0),
        (CLOSED, 0, (2.0, -1.0 + 0.5j), 0.0),
        (SECTOR, 1, (1.0, 1.0), 2.0 / 3.0),
        (SECTOR, 1, (1.0, 1.0j), 2.0 / 3.0),
    ])
    def test_enrichment_mass_matches_quadrature(self, grid, model, k, ab, nu):
        # M[E,E] = integral of |omega s0|^2 x dx, tip part in closed form
        a, b = ab
        pen = assemble_mode_pencil(model, k, grid, ExtensionDomain.line([a, b]))
        if nu == 0.0:
            s0 = lambda x: a + b * np.log(x)
        else:
            s0 = lambda x: a * x**nu + b * x ** (-nu)

        def integrand(x):
            w = cutoff(np.array([x]), 1.0)[0][0]
            return abs(w * s0(x)) ** 2 * x

        kw = dict(limit=400, epsabs=1e-14, epsrel=1e-13)
        ref = quad(integrand, 0.0, 0.25, points=[grid.nodes[0]], **kw)[0]
        ref += quad(integrand, 0.25, 0.5, **kw)[0]
        assert pen.M[-1, -1].real == pytest.approx(ref, rel=1e-10)
        assert abs(pen.M[-1, -1].imag) <= 1e-13 * abs(ref)

    def test_hat_enrichment_mass_matches_quadrature(self, grid):
        # spot-check one coupling row entry against direct quadrature
        a, b = 1.0, 1.0
        pen = assemble_mode_pencil(CLOSED, 0, grid, ExtensionDomain.line([a, b]))
        # row i is the hat peaked at nodes[i+1] with support [nodes[i], nodes[i+2]]
        i = 5
        xl, xm, xr = grid.nodes[i], grid.nodes[i + 1], grid.nodes[i + 2]

        def hat(x):
            if xl <= x <= xm:
                return (x - xl) / (xm - xl)
            if xm < x <= xr:
                return (xr - x) / (xr - xm)
            return 0.0

        def integrand(x):
            w = cutoff(np.array([x]), 1.0)[0][0]
            return hat(x) * w * (a + b * math.log(x)) * x

        ref = quad(integrand, xl, xr, points=[xm], limit=200)[0]
        assert pen.M[i, -1] == pytest.approx(ref, rel=1e-9)

    def test_coupling_row_is_conjugate_column(self, grid):
        pen = assemble_mode_pencil(SECTOR, 1, grid, ExtensionDomain.line([1.0, 1.0j]))
        assert np.array_equal(pen.K[-1, :-1], pen.K[:-1, -1].conj())

    def test_preconditions(self, grid):
        bad_gamma = ConeModelOperator(
            order_m=2, dim_n=2, weight_gamma=0.0, geometry=ClosedLink(), outer_radius_R=1.0
        )
        with pytest.raises(ValueError, match="weight_gamma"):
            assemble_mode_pencil(bad_gamma, 0, grid, None)
        with pytest.raises(ValueError, match="coarse"):
            assemble_mode_pencil(CLOSED, 0, RadialGrid.geometric(1.0, 12, 0.8), None)
        with pytest.raises(ValueError, match="outer"):
            assemble_mode_pencil(CLOSED, 0, RadialGrid.geometric(2.0, 48, 0.9), None)
        with pytest.raises(ValueError, match="node_1"):
            assemble_mode_pencil(
                CLOSED, 0, RadialGrid.geometric(1.0, 16, 0.99), ExtensionDomain.line([1.0, 0.0])
            )
        narrow = ConeModelOperator(
            order_m=2, dim_n=2, weight_gamma=-1.0, geometry=SectorLink(alpha=1.0), outer_radius_R=1.0
        )
        with pytest.raises(ValueError):
            assemble_mode_pencil(narrow, 1, grid, ExtensionDomain.line([1.0, 1.0]))


class TestEmbeddingGrams:
    HIGH = WeightedSobolevParams(smoothness_s=1, weight=1.0, dim_n=1)
    LOW = WeightedSobolevParams(smoothness_s=0, weight=0.0, dim_n=1)

    def test_shapes_and_definiteness(self):
        gh, gl = assemble_embedding_grams(self.HIGH, self.LOW, 10.0, 32)
        assert gh.shape == gl.shape == (33, 33)
        assert np.allclose(gh, gh.T) and np.allclose(gl, gl.T)
        assert np.linalg.eigvalsh(gh).min() > 0
        assert np.linalg.eigvalsh(gl).min() > 0

    def test_singular_values_bounded_and_sorted(self):
        gh, gl = assemble_embedding_grams(self.HIGH, self.LOW, 20.0, 100)
        sv = embedding_singular_values(gh, gl)
        assert sv[0] <= 1.0 + 1e-10
        assert np.all(np.diff(sv) <= 1e-14)
        assert sv[-1] > 0

    def test_low_modes_stable_under_domain_doubling(self):
        # the leading singular values are set by the weight decay, not
        # by the truncation point, once t_max is comfortably large
        sv1 = embedding_singular_values(*assemble_embedding_grams(self.HIGH, self.LOW, 20.0, 200))
        sv2 = embedding_singular_values(*assemble_embedding_grams(self.HIGH, self.LOW, 40.0, 400))
        for j in range(10):
            assert sv2[j] == pytest.approx(sv1[j], rel=5e-2)

    def test_validators(self):
        with pytest.raises(ValueError, match="one-dimensional"):
            assemble_embedding_grams(
                WeightedSobolevParams(1, 1.0, 2), self.LOW, 10.0, 32
            )
        with pytest.raises(ValueError, match="smoothness"):
            assemble_embedding_grams(
                WeightedSobolevParams(2, 1.0, 1), self.LOW, 10.0, 32
            )
        with pytest.raises(ValueError, match="smoothness_s"):
            assemble_embedding_grams(self.LOW, self.LOW, 10.0, 32)
        with pytest.raises(ValueError, match="weight"):
            assemble_embedding_grams(
                WeightedSobolevParams(1, 0.0, 1), self.LOW, 10.0, 32
            )
        with pytest.raises(ValueError, match="t_max"):
            assemble_embedding_grams(self.HIGH, self.LOW, 0.0, 32)
        with pytest.raises(ValueError, match="N_h"):
            assemble_embedding_grams(self.HIGH, self.LOW, 10.0, 8)


class TestPersistence:
    def test_round_trip_preserves_everything(self, tmp_path):
        grid = RadialGrid.geometric(1.0, 32, 0.9)
        pen = assemble_mode_pencil(SECTOR, 1, grid, ExtensionDomain.line([1.0, 1.0j]))
        path = tmp_path / "pencil.bin"
        export_pencil(pen, path)
        back = load_pencil(path)
        assert np.array_equal(back.K, pen.K)
        assert np.array_equal(back.M, pen.M)
        assert back.basis_labels == pen.basis_labels
        assert back.nu == pen.nu
        assert back.outer_radius_R == pen.outer_radius_R
        assert back.enrichment_coeffs == pen.enrichment_coeffs

    def test_export_is_deterministic(self, tmp_path):
        grid = RadialGrid.geometric(1.0, 32, 0.9)
        pen = assemble_mode_pencil(CLOSED, 0, grid, ExtensionDomain.line([1.0, 1.0]))
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        export_pencil(pen, p1)
        export_pencil(pen, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_load_rejects_garbage(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"\x00" * 64)
        with pytest.raises(ValueError):
            load_pencil(path)
