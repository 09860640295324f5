import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from opqlog.rh import (BesselPoint, Kind, LensContour, LocalProblem, Matrix2C, RayProximityError,
                       Sector, Segment, bessel_core, jump_matrix, local_parametrix, matching_defect,
                       outer_parametrix_N, parametrix_growth_scan, parametrix_jump_residual,
                       psi_matrix, psi_ray_residual, xi_map)
from opqlog.szego import phi


def close(a, b, tol):
    return (a - b).norm() < tol


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 3), st.booleans())
def test_outer_parametrix_det_and_symmetry(x, y, lower_half):
    with mp.workdps(30):
        z = mp.mpc(x, -y if lower_half else y)
        N = outer_parametrix_N(z)
        assert abs(N.det() - 1) < mp.mpf(10) ** -25
        s3 = Matrix2C.diag(1, -1)
        assert close(outer_parametrix_N(mp.conj(z)), s3 @ N.conj() @ s3, mp.mpf(10) ** -25)


def test_outer_parametrix_identity_at_infinity():
    with mp.workdps(30):
        assert (outer_parametrix_N(mp.mpf(10) ** 8) - Matrix2C.identity()).norm() < 1e-7
        with pytest.raises(ValueError):
            outer_parametrix_N(mp.mpf("0.2"))


def test_xi_map_local_behaviour():
    with mp.workdps(40):
        h = mp.mpf(10) ** -15
        z0 = mp.mpc(-1 - mp.mpf("0.01"))
        deriv = (xi_map(-1 + h * 1j) - xi_map(-1 - h * 1j)) / (2j * h)
        assert abs(deriv + mp.mpf(1) / 2) < 1e-10
        v = xi_map(z0)
        assert v.real > 0 and abs(v.imag) < mp.mpf(10) ** -35
        z = mp.mpc("-0.95", "0.03")
        assert abs(xi_map(mp.conj(z)) - mp.conj(xi_map(z))) < mp.mpf(10) ** -35


@pytest.mark.parametrize("nu", [0, 1])
def test_psi_determinant(nu):
    with mp.workdps(40):
        for zeta in (mp.mpc(3, 1), mp.mpc(-2, 5), mp.mpc(-4, -1), mp.mpc(0.2, -0.1)):
            assert abs(psi_matrix(nu, BesselPoint.at(zeta), 40).det() - 1) < mp.mpf(10) ** -35


@pytest.mark.parametrize("nu", [0, 1])
@pytest.mark.parametrize("ray", ["gamma1", "gamma2", "gamma3"])
@pytest.mark.parametrize("radius", ["0.3", "5", "400"])
def test_psi_jumps(nu, ray, radius):
    assert psi_ray_residual(nu, ray, mp.mpf(radius), 40) < mp.mpf(10) ** -35


def test_bessel_point_guards():
    with mp.workdps(40):
        near_ray = 2 * mp.expjpi(mp.mpf(2) / 3) + mp.mpf(10) ** -25
        with pytest.raises(RayProximityError):
            BesselPoint.at(near_ray, 40)
        assert BesselPoint.at(mp.mpc(1, 1), 40).sector is Sector.RIGHT
        with pytest.raises(ValueError):
            BesselPoint(mp.mpc(-1, 0.01), Sector.RIGHT)
        with pytest.raises(ValueError):
            BesselPoint(0, Sector.RIGHT)


def test_psi_large_argument_stable():
    # |2 sqrt(zeta)| = 30 sits where asymptotic and series evaluations meet
    for zeta in (mp.mpc(225), mp.mpc(-225, 0), 225 * mp.expjpi(mp.mpf(1) / 2)):
        with mp.workdps(80):
            lo = psi_matrix(1, BesselPoint.at(zeta), 40)
            hi = psi_matrix(1, BesselPoint.at(zeta), 80)
            assert (lo - hi).norm() / hi.norm() < mp.mpf(10) ** -38


def test_contour_geometry():
    c = LensContour()
    with mp.workdps(30):
        assert abs(c.r_exit - mp.mpf("0.12768")) < 1e-4
        cross = c.boundary_crossings()
        assert cross[0] == 0 and abs(cross[1] - mp.mpf("1.0102")) < 1e-3
        for seg in (Segment.SIGMA1, Segment.SIGMA2, Segment.INTERVAL):
            for p in c.inside_points(seg):
                assert abs(p.z + 1) < c.radius
        for p in c.outside_points(Segment.SIGMA1):
            assert abs(p.z + 1) > c.radius and p.z.imag > 0
        # inner lobe maps onto the ray arg xi = -2 pi / 3
        p = c.inside_points(Segment.SIGMA1)[2]
        assert abs(mp.arg(xi_map(p.z)) + 2 * mp.pi / 3) < mp.mpf(10) ** -25
        rim = c.rim_points()
        assert 10 <= len(rim) < 16 and all(abs(abs(s + 1) - c.radius) < mp.mpf(10) ** -25 for s in rim)
        with pytest.raises(ValueError):
            c.inside_points(Segment.RIGHT)


def test_jump_matrix_examples():
    c = LensContour()
    problem = LocalProblem(Kind.PTILDE, 40)
    with mp.workdps(40):
        v = jump_matrix(c.inside_points(Segment.INTERVAL)[0], problem, 10)
        assert v.entries() == (0, 1, -1, 0)
        p = c.outside_points(Segment.SIGMA1)[2]
        v = jump_matrix(p, problem, 10)
        assert abs(v.entries()[2] - phi(p.z) ** -20) < mp.mpf(10) ** -35
        assert v.entries()[:2] == (1, 0)
        assert abs(v.det() - 1) < mp.mpf(10) ** -35


@pytest.mark.parametrize("kind", [Kind.PHAT, Kind.PTILDE, Kind.P])
def test_parametrix_jumps(kind, d0):
    problem = LocalProblem(kind, 40, d0=d0 if kind is Kind.PHAT else None)
    c = LensContour()
    for seg in (Segment.SIGMA1, Segment.SIGMA2, Segment.INTERVAL):
        for point in c.inside_points(seg, 2):
            assert parametrix_jump_residual(problem, point, 16) < mp.mpf(10) ** -35


@pytest.mark.parametrize("kind", [Kind.PHAT, Kind.PTILDE])
def test_parametrix_det(kind, d0):
    problem = LocalProblem(kind, 40, d0=d0 if kind is Kind.PHAT else None)
    for z in (mp.mpc(-1.1, 0.05), mp.mpc(-0.9, -0.1), mp.mpc(-1.01, -0.001)):
        P = local_parametrix(problem, z, 20)
        with mp.workdps(40):
            assert abs(P.det() - 1) < mp.mpf(10) ** -30


def test_matching_defect_order_one_over_n(d0):
    problem = LocalProblem(Kind.PHAT, 40, d0=d0)
    scaled = [n * matching_defect(problem, n) for n in (16, 32, 64)]
    assert max(scaled) / min(scaled) < mp.mpf("1.5")


def test_growth_scan_bounded(d0):
    problem = LocalProblem(Kind.PHAT, 40, d0=d0)
    maxima = [parametrix_growth_scan(problem, n, points=5).max_ratio for n in (20, 80)]
    assert max(maxima) / min(maxima) <= 2


def test_ptilde_logarithmic_blowup():
    problem = LocalProblem(Kind.PTILDE, 40)
    ratios = []
    for e in (2, 5, 9):
        t = mp.mpf(10) ** -e
        P = local_parametrix(problem, -1 + t * mp.expjpi(mp.mpf(1) / 2), 4)
        ratios.append(P.norm() / abs(mp.log(t)))
    assert max(ratios) / min(ratios) < mp.mpf("1.5")


def test_nu_zero_core_growth():
    # for nu = 0 the core grows like sqrt(n) |log c| at z + 1 = c / n^2
    c = mp.mpf(10) ** -3
    scaled = []
    for n in (10, 40, 160):
        z = -1 + c / n ** 2 * mp.expjpi(mp.mpf(1) / 2)
        scaled.append(bessel_core(0, z, n).norm() / (mp.sqrt(n) * abs(mp.log(c))))
    assert max(scaled) / min(scaled) < mp.mpf("1.05")


def test_jump_difference_model_decays_in_n(d0):
    c = LensContour()
    P, Ph = LocalProblem(Kind.P, 34), LocalProblem(Kind.PHAT, 34, d0=d0)
    point = c.outside_points(Segment.SIGMA1)[2]
    with mp.workdps(44):
        diffs = [(jump_matrix(point, P, n) - jump_matrix(point, Ph, n)).norm() for n in (10, 20, 40)]
    assert diffs[0] > diffs[1] > diffs[2]
    assert diffs[2] < diffs[0] ** 3


def test_jump_difference_tilde_inverse_log_near_plus_one():
    P = LocalProblem(Kind.P, 34)
    with mp.workdps(44):
        scaled = []
        for e in (4, 8, 16):
            t = mp.mpf(10) ** -e
            z = 1 + t * mp.expjpi(mp.mpf(1) / 2)
            scaled.append(abs(P.f2w(z) - 1) * abs(mp.log(t)))
    assert max(scaled) / min(scaled) < mp.mpf("1.2")
