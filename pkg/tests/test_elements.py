import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from nrho2llo.constants import BODIES
from nrho2llo.elements import (
    ClassicalElements,
    MeeState,
    cartesian_to_mee,
    coe_to_mee,
    eci_from_mci,
    lvlh_basis,
    lvlh_from_angles,
    mci_from_eci,
    mee_to_cartesian,
    mee_to_coe,
    synodic_frame,
    to_synodic,
    wrap_angle,
)

MU = BODIES.mu_moon


def coe_deg(a, e, i, raan, argp, ta):
    return ClassicalElements(a, e, *np.deg2rad([i, raan, argp, ta]))


# values frozen from a direct high-precision evaluation of the defining
# formulas for the departure row (a=2.327e4 km, e=0.866, i=97.916 deg,
# raan=-62.647 deg, argp=84.175 deg, ta=166.97 deg)
TABLE_ROW = coe_deg(2.327e4, 0.866, 97.916, -62.647, 84.175, 166.97)
TABLE_ROW_MEE = dict(
    p=5818.52388,
    l=0.80558641162015179,
    m=0.31778378406232023,
    n=0.52777945835330237,
    s=-1.0202372866828345,
    q=-2.9932745737553151,
)


def random_elliptic(rng, n):
    """Random well-conditioned elliptic element sets."""
    for _ in range(n):
        yield ClassicalElements(
            a=rng.uniform(1.1, 50.0),
            e=rng.uniform(0.0, 0.99),
            i=rng.uniform(0.0, np.deg2rad(179.0)),
            raan=rng.uniform(-np.pi, np.pi),
            argp=rng.uniform(-np.pi, np.pi),
            true_anomaly=rng.uniform(-np.pi, np.pi),
        )


class TestCoeToMee:
    def test_departure_row_against_frozen_oracle(self):
        mee = coe_to_mee(TABLE_ROW)
        for name, want in TABLE_ROW_MEE.items():
            assert getattr(mee, name) == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_circular_equatorial_zeros(self):
        coe = coe_deg(8000.0, 0.0, 0.0, 10.0, 20.0, 30.0)
        mee = coe_to_mee(coe)
        assert mee.l == mee.m == mee.n == mee.s == 0.0
        assert mee.q == pytest.approx(wrap_angle(np.deg2rad(60.0)), abs=1e-14)

    def test_polar_makes_unit_tan_half(self):
        mee = coe_to_mee(coe_deg(8000.0, 0.0, 90.0, 0.0, 0.0, 0.0))
        assert mee.n == pytest.approx(1.0, rel=1e-15)
        assert mee.s == 0.0

    def test_retrograde_equatorial_rejected(self):
        with pytest.raises(ValueError, match="i = pi"):
            coe_to_mee(ClassicalElements(8000.0, 0.0, np.pi, 0.0, 0.0, 0.0))

    def test_hyperbolic_semilatus_rejected(self):
        with pytest.raises(ValueError):
            coe_to_mee(ClassicalElements(-8000.0, 0.5, 0.1, 0.0, 0.0, 0.0))

    def test_mass_ratio_passthrough(self):
        assert coe_to_mee(TABLE_ROW, mass_ratio=0.95).mass_ratio == 0.95


class TestMeeToCoe:
    def test_departure_row_round_trip(self):
        mee = coe_to_mee(TABLE_ROW)
        back = mee_to_coe(mee)
        again = coe_to_mee(back)
        for f in ("p", "l", "m", "n", "s"):
            assert getattr(again, f) == pytest.approx(getattr(mee, f), rel=1e-12, abs=1e-12)
        assert wrap_angle(again.q - mee.q) == pytest.approx(0.0, abs=1e-12)

    def test_circular_convention(self):
        mee = MeeState(p=5000.0, l=0.0, m=0.0, n=0.3, s=0.1, q=1.0)
        coe = mee_to_coe(mee)
        assert coe.e == 0.0
        # angle folds into the true anomaly: raan + argp + ta must equal q
        assert wrap_angle(coe.raan + coe.argp + coe.true_anomaly - mee.q) == pytest.approx(0.0, abs=1e-12)

    def test_round_trip_residual_random(self):
        rng = np.random.default_rng(42)
        for coe in random_elliptic(rng, 200):
            mee = coe_to_mee(coe)
            back = coe_to_mee(mee_to_coe(mee))
            assert back.p == pytest.approx(mee.p, rel=1e-12)
            for f in ("l", "m", "n", "s"):
                assert getattr(back, f) == pytest.approx(getattr(mee, f), abs=2e-12)
            assert wrap_angle(back.q - mee.q) == pytest.approx(0.0, abs=1e-11)


@st.composite
def mee_states(draw):
    e = draw(st.floats(0.0, 0.95))
    lon = draw(st.floats(-np.pi, np.pi))
    tan_half = draw(st.floats(0.0, 5.0))
    raan = draw(st.floats(-np.pi, np.pi))
    return MeeState(
        p=draw(st.floats(1.0, 100.0)),
        l=e * np.cos(lon),
        m=e * np.sin(lon),
        n=tan_half * np.cos(raan),
        s=tan_half * np.sin(raan),
        q=draw(st.floats(-np.pi, np.pi)),
    )


@settings(max_examples=300, deadline=None)
@given(mee_states())
def test_mee_coe_mee_property(mee):
    back = coe_to_mee(mee_to_coe(mee))
    assert back.p == pytest.approx(mee.p, rel=1e-12)
    for f in ("l", "m", "n", "s"):
        assert getattr(back, f) == pytest.approx(getattr(mee, f), abs=5e-12)
    assert wrap_angle(back.q - mee.q) == pytest.approx(0.0, abs=1e-11)


class TestMeeToCartesian:
    def test_circular_reference_point(self):
        mee = MeeState(p=1837.4, l=0.0, m=0.0, n=0.0, s=0.0, q=0.0)
        r, v = mee_to_cartesian(mee, MU)
        assert r == pytest.approx([1837.4, 0.0, 0.0], abs=1e-9)
        assert np.linalg.norm(v) == pytest.approx(np.sqrt(MU / 1837.4), rel=1e-14)

    def test_arrival_row_radius(self):
        coe = coe_deg(1.837e3, 1.653e-6, 90.0, -17.719, 88.297, -38.025)
        r, _ = mee_to_cartesian(coe_to_mee(coe), MU)
        assert np.linalg.norm(r) == pytest.approx(1837.4, abs=0.5)

    def test_energy_momentum_identities(self):
        rng = np.random.default_rng(7)
        for coe in random_elliptic(rng, 300):
            mee = coe_to_mee(coe)
            r, v = mee_to_cartesian(mee, MU)
            energy = 0.5 * np.dot(v, v) - MU / np.linalg.norm(r)
            assert energy == pytest.approx(-MU / (2 * coe.a), rel=1e-10)
            hmag = np.linalg.norm(np.cross(r, v))
            assert hmag == pytest.approx(np.sqrt(MU * mee.p), rel=1e-10)

    def test_cartesian_round_trip(self):
        rng = np.random.default_rng(11)
        for coe in random_elliptic(rng, 200):
            mee = coe_to_mee(coe)
            r, v = mee_to_cartesian(mee, MU)
            back = cartesian_to_mee(r, v, MU)
            for f in ("p", "l", "m", "n", "s"):
                assert getattr(back, f) == pytest.approx(getattr(mee, f), rel=1e-9, abs=1e-9)
            assert wrap_angle(back.q - mee.q) == pytest.approx(0.0, abs=1e-9)


class TestLvlh:
    def test_axis_aligned(self):
        basis = lvlh_basis([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        assert basis == pytest.approx(np.eye(3), abs=1e-15)

    def test_normal_along_x(self):
        basis = lvlh_basis([0.0, 1.0, 0.0], [0.0, 0.0, 1.0])
        assert basis[2] == pytest.approx([1.0, 0.0, 0.0], abs=1e-15)

    def test_rejects_rectilinear(self):
        with pytest.raises(ValueError, match="degenerate"):
            lvlh_basis([1.0, 0.0, 0.0], [2.0, 0.0, 0.0])

    def test_chain_equals_geometric_construction(self):
        rng = np.random.default_rng(3)
        for coe in random_elliptic(rng, 100):
            r, v = mee_to_cartesian(coe_to_mee(coe), MU)
            geometric = lvlh_basis(r, v)
            chained = lvlh_from_angles(coe.raan, coe.i, coe.argp + coe.true_anomaly)
            assert np.max(np.abs(geometric - chained)) < 1e-10

    def test_orthonormality(self):
        rng = np.random.default_rng(5)
        for coe in random_elliptic(rng, 100):
            r, v = mee_to_cartesian(coe_to_mee(coe), MU)
            basis = lvlh_basis(r, v)
            assert np.max(np.abs(basis @ basis.T - np.eye(3))) < 1e-12
            assert np.linalg.det(basis) == pytest.approx(1.0, abs=1e-12)


class TestSynodic:
    def test_earth_at_origin_moon_on_x(self):
        rot, origin = synodic_frame([0, 0, 0], [0, 0, 0], [3.844e5, 0, 0], [0, 1.0, 0])
        assert rot == pytest.approx(np.eye(3), abs=1e-15)
        # barycenter sits on the Earth-Moon line
        assert origin[1] == origin[2] == 0.0
        assert 0.0 < origin[0] < 3.844e5

    def test_moon_maps_to_fixed_point(self):
        moon = np.array([3.844e5, 0.0, 0.0])
        rot, _ = synodic_frame([0, 0, 0], [0, 0, 0], moon, [0, 1.0, 0])
        assert to_synodic(moon, rot, moon) == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)

    def test_orthonormal_for_random_inputs(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            re, ve = rng.normal(size=3), rng.normal(size=3)
            rm = re + rng.normal(size=3) * 10 + np.array([50.0, 0, 0])
            vm = ve + rng.normal(size=3)
            rot, _ = synodic_frame(re, ve, rm, vm)
            assert np.max(np.abs(rot @ rot.T - np.eye(3))) < 1e-12
            assert np.linalg.det(rot) == pytest.approx(1.0, abs=1e-12)
            assert abs(np.dot(rot[0], rot[2])) < 1e-12


class TestEciMci:
    def test_rotation_is_orthonormal(self):
        R = mci_from_eci()
        assert np.max(np.abs(R @ R.T - np.eye(3))) < 1e-15
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-15)

    def test_inverse_pair(self):
        assert mci_from_eci() @ eci_from_mci() == pytest.approx(np.eye(3), abs=1e-15)

    def test_vernal_axis_shared(self):
        # both frames keep the first (vernal) axis
        assert mci_from_eci() @ np.array([1.0, 0, 0]) == pytest.approx([1.0, 0, 0], abs=1e-15)


def test_bulk_round_trip_ten_thousand():
    """Round-trip residual below 1e-12 over 1e4 random elliptic states
    (e <= 0.99, i <= 179 deg)."""
    rng = np.random.default_rng(2024)
    n = 10_000
    a = rng.uniform(1.05, 60.0, n)
    e = rng.uniform(0.0, 0.99, n)
    i = rng.uniform(0.0, np.deg2rad(179.0), n)
    ang = rng.uniform(-np.pi, np.pi, (3, n))
    worst = 0.0
    for k in range(n):
        mee = coe_to_mee(ClassicalElements(a[k], e[k], i[k], ang[0, k], ang[1, k], ang[2, k]))
        back = coe_to_mee(mee_to_coe(mee))
        worst = max(
            worst,
            abs(back.p - mee.p) / mee.p,
            abs(back.l - mee.l), abs(back.m - mee.m),
            abs(back.n - mee.n) / max(1.0, abs(mee.n)),
            abs(back.s - mee.s) / max(1.0, abs(mee.s)),
            abs(wrap_angle(back.q - mee.q)),
        )
    assert worst < 1e-12
