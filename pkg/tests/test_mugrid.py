"""Half-mass grid tests.

Split points for piecewise-linear CDFs can be solved by hand (linear
interpolation to the half-mass level), which gives the frozen endpoints
below.  Everything heavier is checked against the plain dyadic module via
the equal-mass reduction, or against invariants (equal masses, tie-break
determinism, removable-segment nullity).
"""

import random
from fractions import Fraction as F

import pytest

from rhi_lab.core import Cube, DomainError, Interval, ParseError, canonical_json
from rhi_lab.dyadicnd import (
    DyadicWeight,
    GridCube,
    dyadic_fujii_wilson,
    local_dyadic_maximal,
    verify_dyadic_rhi,
)
from rhi_lab.mugrid import (
    AtomlessMeasure1D,
    MuCellWeight,
    MuDyadicGrid,
    build_mu_grid,
    grid_to_json,
    measure_to_json,
    mu_dyadic_maximal,
    mu_strong_fujii_wilson,
    parse_measure,
    verify_mu_rhi,
    _refine,
)
from rhi_lab.rhi import RangeError, TheoremId, verify


LEB = AtomlessMeasure1D(((0, 0), (1, 1)))
KINKED = AtomlessMeasure1D(((0, 0), (F(1, 4), F(1, 2)), (1, 1)))
FLAT = AtomlessMeasure1D(((0, 0), (F(1, 4), F(1, 2)), (F(1, 2), F(1, 2)), (1, 1)))


def rand_measure(rng, pieces=4):
    """Random strictly-increasing CDF on (0,1) with rational knots."""
    xs = sorted(rng.sample(range(1, 32), pieces - 1))
    fs = sorted(rng.sample(range(1, 32), pieces - 1))
    knots = [(F(0), F(0))]
    knots += [(F(x, 32), F(f, 32)) for x, f in zip(xs, fs)]
    knots.append((F(1), F(1)))
    return AtomlessMeasure1D(tuple(knots))


# ---------------------------------------------------------------------------
# measures


def test_cdf_interpolation():
    assert KINKED.cdf(F(1, 8)) == F(1, 4)
    assert KINKED.cdf(F(1, 4)) == F(1, 2)
    assert KINKED.cdf(F(5, 8)) == F(3, 4)
    assert KINKED.mass(Interval(F(1, 8), F(5, 8))) == F(1, 2)


def test_cdf_outside_domain():
    with pytest.raises(DomainError, match="outside"):
        KINKED.cdf(2)


def test_measure_validation():
    with pytest.raises(DomainError, match="two knots"):
        AtomlessMeasure1D(((0, 0),))
    with pytest.raises(DomainError, match="strictly increasing"):
        AtomlessMeasure1D(((0, 0), (0, 1)))
    with pytest.raises(DomainError, match="nondecreasing"):
        AtomlessMeasure1D(((0, 0), (1, 1), (2, F(1, 2))))
    with pytest.raises(DomainError, match="zero total mass"):
        AtomlessMeasure1D(((0, 1), (1, 1)))


def test_half_split_linear():
    assert LEB.half_split(Interval(0, 1)) == F(1, 2)
    assert KINKED.half_split(Interval(0, 1)) == F(1, 4)
    # within the steep first piece: masses 1/4 and 1/4 around x = 1/8
    assert KINKED.half_split(Interval(0, F(1, 4))) == F(1, 8)


def test_half_split_flat_tie_break():
    assert FLAT.half_split(Interval(0, 1)) == F(1, 4)


def test_flat_segments():
    segs = FLAT.flat_segments(Interval(0, 1))
    assert segs == (Interval(F(1, 4), F(1, 2)),)
    assert FLAT.flat_segments(Interval(0, F(1, 4))) == ()
    assert LEB.flat_segments(Interval(0, 1)) == ()


# ---------------------------------------------------------------------------
# grid construction


def test_lebesgue_grid_is_dyadic():
    g = build_mu_grid(LEB, depth=2)
    assert g.axis_points[0] == (0, F(1, 4), F(1, 2), F(3, 4), 1)
    assert g.leaf_mass() == F(1, 4)


def test_kinked_grid_split():
    g = build_mu_grid(KINKED, depth=1)
    assert g.axis_points[0] == (0, F(1, 4), 1)


def test_flat_grid_tie_break_and_flag():
    g = build_mu_grid(FLAT, depth=1)
    assert g.axis_points[0] == (0, F(1, 4), 1)
    assert g.removable[0] == (Interval(F(1, 4), F(1, 2)),)


def test_zero_mass_root_rejected():
    with pytest.raises(DomainError, match="zero mass"):
        build_mu_grid(FLAT, root=[Interval(F(1, 4), F(1, 2))], depth=1)


def test_root_outside_domain_rejected():
    with pytest.raises(DomainError, match="outside the CDF domain"):
        build_mu_grid(LEB, root=[Interval(0, 2)], depth=1)


def test_depth_validation():
    with pytest.raises(DomainError, match="depth"):
        build_mu_grid(LEB, depth=-1)


def test_root_defaults_to_domain():
    g = build_mu_grid([LEB, KINKED], depth=1)
    assert g.root == (Interval(0, 1), Interval(0, 1))
    assert g.dimension == 2 and g.n_leaves == 4


def test_sub_root_grid():
    g = build_mu_grid(KINKED, root=[Interval(0, F(1, 4))], depth=1)
    assert g.axis_points[0] == (0, F(1, 8), F(1, 4))
    assert g.total_mass == F(1, 2)


def test_equal_mass_split_invariant():
    rng = random.Random(5)
    for _ in range(12):
        mu = rand_measure(rng)
        g = build_mu_grid(mu, depth=3)
        total = mu.mass(Interval(0, 1))
        for level in range(4):
            pts = g.axis_endpoints(0, level)
            masses = {mu.mass(Interval(a, b)) for a, b in zip(pts, pts[1:])}
            assert masses == {total / (1 << level)}


def test_tie_break_determinism():
    blob1 = canonical_json(grid_to_json(build_mu_grid(FLAT, depth=3)))
    blob2 = canonical_json(grid_to_json(build_mu_grid(FLAT, depth=3)))
    assert blob1 == blob2


def test_removable_segments_are_null_and_excluded():
    rng = random.Random(17)
    flats = AtomlessMeasure1D(
        ((0, 0), (F(1, 8), F(1, 4)), (F(3, 8), F(1, 4)), (F(1, 2), F(3, 4)), (F(5, 8), F(3, 4)), (1, 1))
    )
    g = build_mu_grid(flats, depth=3)
    pts = g.axis_points[0]
    for seg in g.removable[0]:
        assert flats.mass(seg) == 0 and seg.length > 0
        # splits never land strictly inside a flagged segment
        assert all(not seg.contains_point(p) for p in pts)
        # and evaluation intervals exclude it entirely
        for leaf in range(len(pts) - 1):
            for ev in g.evaluation_intervals(0, leaf):
                assert ev.intersect(seg) is None
    # evaluation intervals keep the full leaf mass
    for leaf in range(len(pts) - 1):
        kept = sum((flats.mass(ev) for ev in g.evaluation_intervals(0, leaf)), F(0))
        assert kept == g.leaf_mass()


# ---------------------------------------------------------------------------
# maximal function and the grid constant


def test_maximal_uniform_reduction():
    rng = random.Random(23)
    for n, K in ((1, 3), (2, 2)):
        g = build_mu_grid([LEB] * n, depth=K)
        cells = tuple(F(rng.randint(1, 9)) for _ in range(g.n_leaves))
        w = MuCellWeight(g, cells)
        model = DyadicWeight(Cube.of([0] * n, 1), K, cells)
        assert mu_dyadic_maximal(g, w).cells == local_dyadic_maximal(model).cells


def test_maximal_constant():
    g = build_mu_grid(KINKED, depth=2)
    w = MuCellWeight(g, (F(3, 7),) * 4)
    assert mu_dyadic_maximal(g, w).cells == (F(3, 7),) * 4


def test_maximal_2d_example():
    g = build_mu_grid([LEB, KINKED], depth=1)
    w = MuCellWeight(g, (1, 1, 1, 5))
    assert mu_dyadic_maximal(g, w).cells == (2, 2, 2, 5)


def test_maximal_on_subbox():
    g = build_mu_grid(KINKED, depth=2)
    w = MuCellWeight(g, (1, 3, 2, 6))
    right = GridCube(1, (1,))
    mx = mu_dyadic_maximal(g, w, box=right)
    assert mx.cells == (4, 6)  # averages within the right half only
    assert mx.grid == g.subgrid(right)


def test_maximal_grid_mismatch():
    g1 = build_mu_grid(KINKED, depth=1)
    g2 = build_mu_grid(LEB, depth=1)
    with pytest.raises(DomainError, match="different grid"):
        mu_dyadic_maximal(g1, MuCellWeight(g2, (1, 3)))


def test_fw_two_cells():
    g = build_mu_grid(KINKED, depth=1)
    rep = mu_strong_fujii_wilson(g, MuCellWeight(g, (1, 3)))
    assert rep.value.exact == F(5, 4)
    assert rep.is_lower_bound is True
    assert rep.kind.value == "MuStrongFujiiWilson"
    assert rep.refinement_depth == 1


def test_fw_constant_one():
    g = build_mu_grid(FLAT, depth=2)
    rep = mu_strong_fujii_wilson(g, MuCellWeight(g, (5, 5, 5, 5)))
    assert rep.value.exact == 1


def test_fw_matches_dyadic_on_cells():
    rng = random.Random(31)
    for _ in range(10):
        mu = rand_measure(rng)
        g = build_mu_grid(mu, depth=3)
        cells = tuple(F(rng.randint(1, 9)) for _ in range(8))
        got = mu_strong_fujii_wilson(g, MuCellWeight(g, cells)).value.exact
        want = dyadic_fujii_wilson(DyadicWeight(Cube.of([0], 1), 3, cells)).value.exact
        assert got == want


def test_fw_monotone_in_depth():
    rng = random.Random(41)
    for _ in range(8):
        mu = rand_measure(rng)
        g = build_mu_grid(mu, depth=2)
        w = MuCellWeight(g, tuple(F(rng.randint(1, 9)) for _ in range(4)))
        shallow = mu_strong_fujii_wilson(g, w).value.exact
        deeper_w = _refine(g, w, 2)
        deep = mu_strong_fujii_wilson(deeper_w.grid, deeper_w).value.exact
        assert deep >= shallow


def test_refine_preserves_integrals():
    g = build_mu_grid(KINKED, depth=1)
    w = MuCellWeight(g, (1, 3))
    fine = _refine(g, w, 2)
    assert fine.grid.depth == 3
    assert fine.cells == (1, 1, 1, 1, 3, 3, 3, 3)
    assert fine.mu_average() == w.mu_average()


# ---------------------------------------------------------------------------
# the measure-weighted reverse Hölder check


def test_mu_rhi_kinked_two_cells():
    g = build_mu_grid(KINKED, depth=1)
    v = verify_mu_rhi(g, MuCellWeight(g, (1, 3)), r=F(3, 2))
    assert v.theorem == "cor4.3"
    assert v.holds
    assert float(v.lhs) == pytest.approx(3.098076211353316, abs=1e-12)
    assert float(v.rhs) == pytest.approx(4.714045207910317, abs=1e-12)
    assert v.params["delta"] == F(5, 4)
    assert v.delta_source == "mu-grid FW lower bound, depth=1"


def test_mu_rhi_constant_equality():
    g = build_mu_grid(FLAT, depth=2)
    v = verify_mu_rhi(g, MuCellWeight(g, (4, 4, 4, 4)), r=2)
    assert v.holds and v.exact
    assert v.ratio.exact == 1


def test_mu_rhi_uniform_reduction_bitwise():
    rng = random.Random(47)
    for n, K in ((1, 3), (2, 2)):
        g = build_mu_grid([LEB] * n, depth=K)
        cells = tuple(F(rng.randint(1, 9)) for _ in range(g.n_leaves))
        w = MuCellWeight(g, cells)
        model = DyadicWeight(Cube.of([0] * n, 1), K, cells)
        delta = dyadic_fujii_wilson(model).value.exact
        hi = 1 + 1 / ((1 << n) * (delta - 1)) if delta > 1 else F(3)
        r = 1 + (hi - 1) / 3
        vm = verify_mu_rhi(g, w, r=r)
        vd = verify_dyadic_rhi(model, r=r, which=TheoremId.T1_1)
        assert vm.lhs.value == vd.lhs.value
        assert vm.rhs.value == vd.rhs.value
        assert vm.ratio.value == vd.ratio.value
        assert vm.holds == vd.holds


def test_mu_rhi_random_instances_hold():
    rng = random.Random(53)
    for _ in range(15):
        mu = rand_measure(rng)
        g = build_mu_grid(mu, depth=3)
        w = MuCellWeight(g, tuple(F(rng.randint(1, 9)) for _ in range(8)))
        delta = mu_strong_fujii_wilson(g, w).value.exact
        if delta == 1:
            continue
        hi = 1 + 1 / (2 * (delta - 1))
        for frac in (F(1, 3), F(2, 3)):
            v = verify_mu_rhi(g, w, r=1 + (hi - 1) * frac)
            assert v.holds


def test_mu_rhi_needs_r():
    g = build_mu_grid(KINKED, depth=1)
    with pytest.raises(DomainError, match="exponent"):
        verify_mu_rhi(g, MuCellWeight(g, (1, 3)))


def test_mu_rhi_out_of_range():
    g = build_mu_grid(KINKED, depth=1)
    with pytest.raises(RangeError):
        verify_mu_rhi(g, MuCellWeight(g, (1, 3)), r=3)


def test_mu_rhi_dispatch_through_verify():
    g = build_mu_grid(KINKED, depth=1)
    v = verify("cor4.3", MuCellWeight(g, (1, 3)), r=F(3, 2))
    assert v.theorem == "cor4.3" and v.holds


# ---------------------------------------------------------------------------
# cell weight validation and serialization


def test_cell_weight_validation():
    g = build_mu_grid(KINKED, depth=1)
    with pytest.raises(DomainError, match="cells"):
        MuCellWeight(g, (1, 2, 3))
    with pytest.raises(DomainError, match="positive"):
        MuCellWeight(g, (1, 0))


def test_measure_json_roundtrip():
    blob = canonical_json(measure_to_json(KINKED))
    back = parse_measure(blob)
    assert back == KINKED
    assert measure_to_json(KINKED)["knots"][1] == ["1/4", "1/2"]


def test_parse_measure_rejects():
    with pytest.raises(ParseError, match="cdf"):
        parse_measure({"kind": "dyadic"})
    with pytest.raises(ParseError, match="invalid JSON"):
        parse_measure("{oops")
    with pytest.raises(ParseError, match="knots"):
        parse_measure({"kind": "cdf"})
    with pytest.raises(ParseError, match="nondecreasing"):
        parse_measure({"kind": "cdf", "knots": [["0", "1"], ["1", "0"]]})


def test_grid_dump_shape():
    g = build_mu_grid(KINKED, depth=1)
    d = grid_to_json(g)
    assert d["kind"] == "mugrid" and d["dim"] == 1 and d["depth"] == 1
    assert d["root"] == [{"lo": "0", "hi": "1"}]
    assert len(d["generations"]) == 2
    leaves = d["generations"][1]["boxes"]
    assert leaves == [
        {"box": [{"lo": "0", "hi": "1/4"}], "mass": "1/2"},
        {"box": [{"lo": "1/4", "hi": "1"}], "mass": "1/2"},
    ]
