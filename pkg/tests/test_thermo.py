import json
import math
import random

import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.stats import linregress

from geolab.errors import BoundaryPointError
from geolab.geodesics import length_holonomy, periodic_point, semigroup_ball, word_to_matrix
from geolab.thermo import (
    CylinderLevels,
    DeltaEstimate,
    birkhoff_distortion_check,
    birkhoff_sum,
    cylinder_contains,
    cylinder_weight,
    delta_trend,
    dense_pressure,
    distortion_decay,
    full_shift_pressure,
    periodic_birkhoff_sum,
    pressure,
    pressure_model,
    solve_delta,
    spectral_radius,
    tail_bound,
    tau,
    tau_s,
    write_delta_json,
    write_pressure_csv,
)


def _periodic_word(transitions, rng: random.Random, max_length: int = 4):
    while True:
        word = [rng.randrange(transitions.size)]
        for _ in range(rng.randint(0, max_length - 1)):
            word.append(rng.choice(transitions.successors(word[-1])))
        if transitions.bits[word[-1], word[0]]:
            return tuple(word)


@pytest.fixture(scope="module")
def levels4(alphabet4, transitions4):
    return CylinderLevels(alphabet4, transitions4)


@pytest.fixture(scope="module")
def delta4(partition4, transitions4, alphabet4):
    return solve_delta(partition4, depths=(2, 3), transitions=transitions4, alphabet=alphabet4)


def test_tau_values():
    assert tau(2.3 + 0.2j) == pytest.approx(2 * math.log(abs(2.3 + 0.2j)), abs=1e-15)
    assert tau_s(0.5) == pytest.approx(2 * math.log(2), abs=1e-15)
    assert tau_s(0.3 + 0.4j) == pytest.approx(2 * math.log(2), abs=1e-15)


def test_tau_rejects_boundary_and_outside():
    with pytest.raises(BoundaryPointError):
        tau(2.5 + 0.3j)
    with pytest.raises(ValueError):
        tau(0.2 + 0.2j)
    with pytest.raises(ValueError):
        tau_s(0)


def test_self_loop_sum_is_the_geodesic_length(partition4, alphabet4):
    label = partition4.find((5, 0))[0].label
    length, _ = length_holonomy(alphabet4.forward[label])
    assert length == pytest.approx(2 * math.log((3 + math.sqrt(5)) / 2), abs=1e-12)
    assert periodic_birkhoff_sum(alphabet4, (label,)) == pytest.approx(length, abs=1e-10)


def test_periodic_sums_match_geodesic_lengths(alphabet4, transitions4):
    rng = random.Random(53)
    for _ in range(200):
        word = _periodic_word(transitions4, rng)
        length, _ = length_holonomy(word_to_matrix(alphabet4, word))
        assert abs(periodic_birkhoff_sum(alphabet4, word) - length) < 1e-8, f"orbit sum of {word} is off"


def test_birkhoff_sums_are_additive(alphabet4, transitions4):
    rng = random.Random(59)
    for _ in range(100):
        word = _periodic_word(transitions4, rng, 6)
        if len(word) < 2:
            continue
        z = periodic_point(alphabet4, word)
        n = rng.randrange(1, len(word))
        shifted = z
        for letter in word[:n]:
            shifted = alphabet4.forward[letter].mobius(shifted)
        total = birkhoff_sum(alphabet4, word[:n], z) + birkhoff_sum(alphabet4, word[n:], shifted)
        assert birkhoff_sum(alphabet4, word, z) == pytest.approx(total, rel=1e-12)


def test_cylinder_representatives_lie_in_their_cylinders(partition4, alphabet4, transitions4):
    rng = random.Random(61)
    for _ in range(100):
        word = _periodic_word(transitions4, rng)
        weight = cylinder_weight(alphabet4, transitions4, word)
        assert cylinder_contains(partition4, alphabet4, word, weight.rep_point, tol=1e-7)
        assert weight.weight_log == pytest.approx(periodic_birkhoff_sum(alphabet4, word), abs=1e-10)
        assert weight.weight_log > 0


def test_spectral_radius_bounds():
    bound = spectral_radius(csr_matrix(np.array([[2.0, 1.0], [1.0, 2.0]])))
    assert bound.converged
    assert bound.lower <= 3.0 <= bound.upper
    assert bound.estimate == pytest.approx(3.0, rel=1e-10)


@pytest.mark.parametrize("k, c, s, n", [(2, 1.0, 0.5, 2), (3, 0.7, 1.3, 2), (5, 2.0, 0.4, 3)])
def test_full_shift_control(k, c, s, n):
    estimate = full_shift_pressure(k, c, s, n)
    exact = math.log(k) - s * c
    assert estimate.lower - 1e-12 <= exact <= estimate.upper + 1e-12
    assert estimate.center == pytest.approx(exact, abs=1e-10)


def test_pressure_decreases_in_s(alphabet4, transitions4):
    model = pressure_model(alphabet4, transitions4, 2)
    grid = [0.6, 1.0, 1.4, 1.8]
    estimates = [model.estimate(s) for s in grid]
    for left, right in zip(estimates, estimates[1:]):
        assert left.upper > right.upper
        assert left.lower > right.lower
        assert left.center > right.center
    for e in estimates:
        assert e.lower <= e.center <= e.upper


def test_pressure_rejects_nonpositive_exponent(alphabet4, transitions4):
    with pytest.raises(ValueError):
        pressure(0.0, transitions4, alphabet4)


def test_brackets_nest_in_depth(alphabet4, transitions4, levels4):
    estimates = [pressure_model(alphabet4, transitions4, n, levels4).estimate(1.5) for n in (1, 2, 3)]
    for coarse, fine in zip(estimates, estimates[1:]):
        assert fine.lower >= coarse.lower - 1e-9
        assert fine.upper <= coarse.upper + 1e-9
    assert estimates[2].width < estimates[0].width


def test_dense_spectrum_lies_in_the_bracket(alphabet4, transitions4, levels4):
    for n in (1, 2):
        model = pressure_model(alphabet4, transitions4, n, levels4)
        for s in (0.8, 1.5):
            estimate = model.estimate(s)
            inf_log, sup_log = dense_pressure(model, s)
            assert estimate.lower - 1e-9 <= inf_log <= sup_log <= estimate.upper + 1e-9


def test_delta_lies_in_its_bracket(delta4):
    assert 0 < delta4.lo <= delta4.delta <= delta4.hi < 2
    assert delta4.R == 4
    assert delta4.depth in (2, 3)
    if delta4.delta > 1:
        assert delta4.tail is not None and delta4.tail > 0


def test_delta_solver_validates_input(partition4):
    with pytest.raises(ValueError):
        solve_delta(partition4, tol=1e-5)


def test_delta_solver_rejects_small_radius():
    from geolab.hurwitz import build_partition

    with pytest.raises(ValueError):
        solve_delta(build_partition(3.5))


def test_tail_bound_shrinks_with_radius():
    assert tail_bound(8, 1.5) < tail_bound(4, 1.5)
    assert tail_bound(4, 1.8) < tail_bound(4, 1.5)
    with pytest.raises(ValueError):
        tail_bound(4, 1.0)


def test_distortion_is_uniform_in_prefix_length(alphabet4, transitions4):
    short = birkhoff_distortion_check(alphabet4, transitions4, 4, samples=200, seed=3)
    long = birkhoff_distortion_check(alphabet4, transitions4, 8, samples=200, seed=3)
    assert long <= 1.5 * short + 1e-12, f"distortion grew from {short} to {long}"


def test_pressure_csv_and_delta_json(tmp_path, alphabet4, transitions4, delta4):
    model = pressure_model(alphabet4, transitions4, 1)
    path = tmp_path / "pressure.csv"
    write_pressure_csv(4, [model.estimate(s) for s in (1.0, 1.5)], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "R,s,n,lower,upper,center"
    assert lines[1].startswith("4,1,1,")

    json_path = tmp_path / "delta.json"
    write_delta_json(delta4, json_path)
    data = json.loads(json_path.read_text())
    assert set(data) == {"R", "delta", "lo", "hi", "certified", "depth", "tail"}
    assert float(data["delta"]) == delta4.delta


def test_delta_estimate_model():
    estimate = DeltaEstimate(R=4, delta=1.2, lo=1.1, hi=1.3, certified=False, depth=2)
    assert estimate.tail is None
    assert estimate.model_dump()["certified"] is False


@pytest.mark.slow
def test_delta_grows_with_radius(partition4, transitions4, partition6, transitions6):
    from geolab.hurwitz import build_partition
    from geolab.subshift import build_transitions

    partition8 = build_partition(8)
    deltas = [
        solve_delta(partition4, depths=(2,), transitions=transitions4).delta,
        solve_delta(partition6, depths=(2,), transitions=transitions6).delta,
        solve_delta(partition8, depths=(2,), transitions=build_transitions(partition8, certify=False)).delta,
    ]
    assert all(0 < d < 2 for d in deltas)
    assert deltas == sorted(deltas) and len(set(deltas)) == 3


@pytest.mark.slow
def test_delta_trend_toward_two():
    trend = [e.delta for e in delta_trend((4, 8, 16, 32), depth=1)]
    assert trend == sorted(trend), f"delta is not increasing in R: {trend}"
    assert trend[-1] < 2


@pytest.mark.slow
def test_ball_count_slope_matches_delta(alphabet4, transitions4, delta4):
    radii = [8, 16, 32, 64]
    counts = [len(semigroup_ball(alphabet4, transitions4, X)) for X in radii]
    slope = linregress(np.log(radii), np.log(counts)).slope
    assert abs(slope - 2 * delta4.delta) < 0.15, f"slope {slope} against 2 delta = {2 * delta4.delta}"


@pytest.mark.slow
def test_distortion_decays_geometrically(alphabet4, transitions4):
    assert distortion_decay(alphabet4, transitions4) <= -0.9 * math.log(2)
