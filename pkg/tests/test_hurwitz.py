import random

import pytest

from geolab.errors import BoundaryPointError
from geolab.gaussian import GaussianInt, Mat2
from geolab.hurwitz import (
    NOT_ADJACENT,
    Cline,
    Partition,
    apply_f,
    apply_fhat,
    branch_matrix,
    build_partition,
    in_region,
    inverse_branch_point,
    nearest_gaussian,
    part_image,
    to_s_coordinates,
)


@pytest.mark.parametrize(
    "z, expected",
    [(0.3 + 0.4j, GaussianInt(0)), (2.6 + 0.2j, GaussianInt(3)), (1.5 + 0.25j, GaussianInt(1))],
)
def test_nearest_gaussian(z, expected):
    assert nearest_gaussian(z) == expected


def test_apply_fhat_examples():
    assert apply_fhat(2.3 + 0.2j) == pytest.approx(-2.3076923076923 + 1.5384615384615j, abs=1e-12)
    assert apply_fhat(2.75 + 0.25j) == pytest.approx(2 + 2j, abs=1e-12)


def test_apply_fhat_rejects_boundary_and_outside_points():
    with pytest.raises(BoundaryPointError):
        apply_fhat(2.5 + 0.3j)
    with pytest.raises(BoundaryPointError):
        apply_fhat(1.3 + 1.0j)
    with pytest.raises(ValueError):
        apply_fhat(0.3 + 0.3j)


def test_lower_branch_lands_in_upper_half_plane():
    rng = random.Random(1)
    checked = 0
    while checked < 200:
        z = complex(rng.uniform(-3.5, 3.5), rng.uniform(0.01, 3.5))
        if not in_region(z):
            continue
        checked += 1
        assert apply_fhat(z).imag > 0, f"f({z}) left the upper half-plane"


def test_every_part_lies_inside_the_radius(partition4):
    for part in partition4:
        assert part.modulus_range()[1] < 4, f"part {part.label} reaches beyond R = 4"


def test_square_part_left_of_three_is_present():
    partition = build_partition(3.05)
    parts = partition.find((5, 0))
    assert len(parts) == 1
    assert parts[0].flags == (NOT_ADJACENT, NOT_ADJACENT)
    assert parts[0].round_target == GaussianInt(3)
    assert parts[0].branch_sign == 0


def test_partition_is_monotone_in_radius(partition4, partition5):
    assert len(partition4) < len(partition5)
    assert (partition4.label_map(partition5) >= 0).all()


def test_partition_rejects_small_radius():
    with pytest.raises(ValueError):
        build_partition(2.5)


def test_partition_labels_are_sorted(partition4):
    keys = [part.key for part in partition4]
    assert keys == sorted(keys)
    assert [part.label for part in partition4] == list(range(len(partition4)))


def test_partition_json_round_trip(partition4):
    restored = Partition.from_json(partition4.to_json())
    assert restored.dumps() == partition4.dumps()
    assert [p.clipped_by for p in restored] == [p.clipped_by for p in partition4]


def test_branch_matrix_for_round_target_three():
    part = build_partition(4).find((5, 0))[0]
    branch = branch_matrix(part)
    assert branch.forward == Mat2.of(0, -1, 1, -3)
    assert branch.inverse == Mat2.of(-3, 1, -1, 0)
    assert branch.forward @ branch.inverse == Mat2.identity()


def test_branch_action_matches_fhat(partition4):
    for part in partition4:
        branch = branch_matrix(part)
        assert branch.forward.det() == GaussianInt(1)
        for z in partition4.samples(part.label)[:20]:
            z = complex(z)
            assert branch.forward.mobius(z) == pytest.approx(apply_fhat(z), abs=1e-12)
            assert inverse_branch_point(part, apply_fhat(z)) == pytest.approx(z, abs=1e-12)


def test_branches_expand(partition4):
    for part in partition4:
        m = complex(part.round_target)
        for z in partition4.samples(part.label):
            assert abs(complex(z) - m) < 1, f"branch of part {part.label} does not expand at {z}"


def test_s_image_of_region_lies_in_the_small_box(partition4):
    for part in partition4:
        for z in partition4.samples(part.label):
            u = to_s_coordinates(complex(z))
            assert abs(u.real) < 0.5 and 0 < u.imag < 0.5


def test_conjugate_map_agrees_with_fhat(partition4):
    for part in list(partition4)[::7]:
        for z in partition4.samples(part.label)[:5]:
            z = complex(z)
            assert apply_f(to_s_coordinates(z)) == pytest.approx(to_s_coordinates(apply_fhat(z)), abs=1e-12)


def test_part_image_clines_are_exact(partition4):
    for part in partition4:
        for constraint in part_image(part):
            cline = constraint.cline
            assert isinstance(cline.a, int) and isinstance(cline.c, int)
            assert constraint.side in (-1, 1)


def test_cline_image_round_trip():
    circle = Cline.circle(GaussianInt(1, 1))
    m = Mat2.of(0, -1, 1, -3)
    assert circle.image(m).image(m.inverse()) == circle
