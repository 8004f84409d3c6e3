import cmath
import itertools
import math
import random

import numpy as np
import pytest

from geolab.charsums import (
    AdditiveCharacter,
    all_characters,
    characters_of_order,
    charsum_margins,
    check_kloosterman,
    factor_character,
    kloosterman,
    sl2_charsum,
    sl2_charsum_bound,
    sl2_charsum_factored,
    sl2_charsum_strata,
    standard_character,
    write_margins_csv,
)
from geolab.congruence import enumerate_sl2, sl2_order
from geolab.gaussian import GaussianInt, ResidueRing, gaussian_primes_up_to

SMALL_PRIMES = [GaussianInt(1, 1), GaussianInt(2, 1), GaussianInt(1, 2), GaussianInt(3), GaussianInt(3, 2)]


def _moduli(limit: int):
    for re in range(1, 8):
        for im in range(0, 8):
            q = GaussianInt(re, im)
            if 1 < q.norm() <= limit:
                yield q


def _random_xi(ring: ResidueRing, rng: random.Random):
    return tuple(ring.element(rng.randrange(ring.size)) for _ in range(4))


def test_mod_one_plus_i_has_two_characters():
    ring = ResidueRing(GaussianInt(1, 1))
    assert len(all_characters(ring)) == 2
    assert len(characters_of_order(ring, 1)) == 1
    assert len(characters_of_order(ring, 2)) == 1
    assert characters_of_order(ring, 1)[0].is_trivial()


@pytest.mark.parametrize("q", list(_moduli(50)))
def test_character_tables_are_complete_and_orthogonal(q):
    ring = ResidueRing(q)
    divisors = [k for k in range(1, ring.size + 1) if ring.size % k == 0]
    assert sum(len(characters_of_order(ring, k)) for k in divisors) == ring.size
    assert [chi.is_trivial() for chi in characters_of_order(ring, 1)] == [True]
    for chi in all_characters(ring):
        values = chi.values()
        assert ring.size % chi.order == 0
        if not chi.is_trivial():
            assert abs(values.sum()) < 1e-9, f"complete sum of {chi.multiplier} mod {q} does not vanish"
        assert np.allclose(values[ring.add_table], values[:, None] * values[None, :], atol=1e-12)


def test_characters_of_order_rejects_non_divisors():
    with pytest.raises(ValueError):
        characters_of_order(ResidueRing(GaussianInt(2, 1)), 3)


def test_character_evaluation_matches_table():
    chi = standard_character(ResidueRing(GaussianInt(3, 2)))
    for k, z in enumerate(chi.ring.elements):
        assert chi(z) == pytest.approx(chi.values()[k], abs=1e-12)
    assert chi(GaussianInt(1)) == pytest.approx(cmath.exp(2j * math.pi / 13), abs=1e-12)


def test_kloosterman_example():
    chi = standard_character(ResidueRing(GaussianInt(2, 1)))
    value = kloosterman(chi, GaussianInt(1), GaussianInt(1))
    assert value.real == pytest.approx(2 + 2 * math.cos(4 * math.pi / 5), abs=1e-12)
    assert value.real == pytest.approx(0.38197, abs=1e-5)
    assert value.imag == pytest.approx(0.0, abs=1e-12)


def test_ramanujan_sum_for_units():
    ring = ResidueRing(GaussianInt(3, 2))
    for chi in all_characters(ring)[1:]:
        for a in ring.units:
            assert kloosterman(chi, ring.element(a), GaussianInt(0)) == pytest.approx(-1.0, abs=1e-9)


@pytest.mark.parametrize("p", [p for p in gaussian_primes_up_to(25)])
def test_kloosterman_weil_bound_and_symmetry(p):
    ring = ResidueRing(p)
    for chi in all_characters(ring):
        if chi.is_trivial():
            continue
        assert check_kloosterman(chi) <= 2 * math.sqrt(ring.size) + 1e-9
        for a, b in itertools.product(ring.elements, repeat=2):
            assert kloosterman(chi, a, b) == pytest.approx(kloosterman(chi, b, a), abs=1e-9)


def test_kloosterman_rejects_trivial_and_composite():
    with pytest.raises(ValueError):
        kloosterman(AdditiveCharacter(ResidueRing(GaussianInt(2, 1)), GaussianInt(0)), 1, 1)
    with pytest.raises(ValueError):
        kloosterman(standard_character(ResidueRing(GaussianInt(3, 1))), 1, 1)


def test_trivial_character_counts_the_group():
    ring = ResidueRing(GaussianInt(2, 1))
    trivial = AdditiveCharacter(ring, GaussianInt(0))
    assert sl2_charsum(GaussianInt(2, 1), trivial, (1, 1, 1, 1)) == pytest.approx(120.0, abs=1e-9)
    assert sl2_charsum_strata(GaussianInt(2, 1), trivial, (1, 1, 1, 1)) == 120


@pytest.mark.parametrize("q", [GaussianInt(2, 1), GaussianInt(3)])
def test_c_zero_stratum_vanishes_for_unit_y(q):
    ring = ResidueRing(q)
    group = enumerate_sl2(q)
    upper = group[group[:, 2] == ring.zero]
    mul, add = ring.mul_table, ring.add_table
    rng = random.Random(71)
    for chi in all_characters(ring)[1:]:
        values = chi.values()
        for _ in range(10):
            x, z, w = (rng.randrange(ring.size) for _ in range(3))
            y = rng.choice(ring.units)
            dots = add[add[mul[upper[:, 0], x], mul[upper[:, 1], y]], add[mul[upper[:, 2], z], mul[upper[:, 3], w]]]
            assert abs(values[dots].sum()) < 1e-9


@pytest.mark.parametrize("q", SMALL_PRIMES)
def test_strata_reduction_matches_direct_sum(q):
    ring = ResidueRing(q)
    rng = random.Random(73)
    for chi in all_characters(ring):
        for _ in range(12):
            xi = _random_xi(ring, rng)
            direct = sl2_charsum(q, chi, xi)
            assert abs(sl2_charsum_strata(q, chi, xi) - direct) < 1e-8, f"strata mismatch mod {q} at {xi}"


@pytest.mark.parametrize("q", [GaussianInt(1, 1), GaussianInt(2, 1), GaussianInt(3)])
def test_sl2_sums_respect_the_bound(q):
    rows = charsum_margins(q)
    ring = ResidueRing(q)
    assert len(rows) == (ring.size - 1) * len(ring.units) ** 4
    assert all(row.margin >= -1e-9 for row in rows)
    assert all(row.bound == sl2_charsum_bound(q) for row in rows)


@pytest.mark.slow
def test_sl2_sums_respect_the_bound_mod_3_plus_2i():
    q = GaussianInt(3, 2)
    rows = charsum_margins(q)
    ring = ResidueRing(q)
    assert len(rows) == (ring.size - 1) * len(ring.units) ** 4
    assert all(row.margin >= -1e-9 for row in rows)
    assert all(row.bound == sl2_charsum_bound(q) for row in rows)


def test_margins_agree_with_direct_sums():
    q = GaussianInt(2, 1)
    ring = ResidueRing(q)
    characters = all_characters(ring)[1:3]
    xis = [(1, 2, 3, 4), (1, 1, 0, 2)]
    rows = charsum_margins(q, characters, xis)
    assert len(rows) == 4
    for row in rows:
        direct = sl2_charsum(q, characters[row.character_index], row.xi)
        assert row.magnitude == pytest.approx(abs(direct), abs=1e-9)


def test_composite_sums_factor_over_primes():
    q = GaussianInt(1, 1) * GaussianInt(2, 1)
    ring = ResidueRing(q)
    assert sl2_order(q) == 6 * 120
    rng = random.Random(79)
    for chi in all_characters(ring)[:6]:
        components = factor_character(chi)
        assert [c.prime for c in components] == [GaussianInt(1, 1), GaussianInt(2, 1)]
        for z in ring.elements:
            local = np.prod([c.character(z) for c in components])
            assert chi(z) == pytest.approx(local, abs=1e-9)
        xi = _random_xi(ring, rng)
        assert abs(sl2_charsum_factored(q, chi, xi) - sl2_charsum(q, chi, xi)) < 1e-8


def test_margins_csv(tmp_path):
    q = GaussianInt(1, 1)
    rows = charsum_margins(q)
    path = tmp_path / "charsum_margins.csv"
    write_margins_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "q,character_index,xi,abs_sum,bound,margin"
    assert len(lines) == len(rows) + 1
