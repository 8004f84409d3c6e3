import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from geolab import sieve
from geolab.congruence import beta, enumerate_sl2, sl2_order
from geolab.errors import NormBoundError
from geolab.gaussian import GaussianInt, ResidueRing, gaussian_primes_up_to, is_squarefree
from geolab.geodesics import word_to_matrix
from geolab.hurwitz import build_partition
from geolab.sieve import (
    SiftingSet,
    TraceTally,
    almost_prime_count,
    build_sifting_set,
    count_U,
    count_U_by_levels,
    dimension_product,
    harvest,
    mertens_check,
    most_populous_slice,
    sieve_ledger,
    squarefree_disc_shortcut,
    squarefree_moduli,
    trace_multiplicity_bruteforce,
    write_harvest_csv,
    write_ledger_csv,
)
from geolab.subshift import build_transitions, is_admissible


@pytest.fixture(scope="module")
def partition8():
    return build_partition(8)


@pytest.fixture(scope="module")
def transitions8(partition8):
    return build_transitions(partition8, certify=False)


@pytest.fixture(scope="module")
def tiny(partition4, partition8):
    return build_sifting_set(4, X=2.5, Y=3, Z=2.5, partition=partition4, glue_partition=partition8)


@pytest.fixture(scope="module")
def tiny_words(tiny):
    return tiny.materialize()


@pytest.fixture(scope="module")
def tiny_traces(tiny, tiny_words):
    return Counter(word_to_matrix(tiny.alphabet, w).trace() for w in tiny_words)


@pytest.fixture(scope="module")
def harvest32(alphabet4, transitions4):
    return harvest(alphabet4, transitions4, 32, delta=1.2)


def _synthetic(traces: np.ndarray, counts: np.ndarray) -> SiftingSet:
    return SiftingSet(
        R=4, X=2, Y=2, Z=2, l_x=1, l_z=1, xi=[], aleph=[], omega=[], alphabet=None, glue=None,
        _tally=TraceTally(traces, counts, 0),
    )


def test_most_populous_slice_prefers_shorter_ties():
    words = [((1,), None), ((2,), None), ((1, 2), None), ((2, 1), None), ((1, 2, 3), None)]
    assert most_populous_slice(words) == (1, [(1,), (2,)])
    with pytest.raises(ValueError):
        most_populous_slice([])


def test_factor_lists_have_fixed_lengths(tiny):
    assert tiny.xi and tiny.aleph and tiny.omega
    assert all(len(w) == tiny.l_x for w in tiny.xi)
    assert all(len(w) == tiny.l_z for w in tiny.omega)
    for word in tiny.xi:
        assert word_to_matrix(tiny.alphabet, word).frobenius_sq() < tiny.X ** 2
    for word in tiny.omega:
        assert word_to_matrix(tiny.alphabet, word).frobenius_sq() < tiny.Z ** 2
    for word in tiny.aleph:
        assert word_to_matrix(tiny.alphabet, word).frobenius_sq() < tiny.Y ** 2


def test_glued_words_are_admissible_and_distinct(tiny, tiny_words, transitions8):
    assert len(tiny_words) == tiny.size == len(tiny.xi) * len(tiny.aleph) * len(tiny.omega)
    assert len(set(tiny_words)) == tiny.size
    assert all(is_admissible(transitions8, w) for w in tiny_words)


def test_tally_matches_materialized_traces(tiny, tiny_words, tiny_traces):
    tally = tiny.tally()
    assert tally.total == tiny.size
    assert tally.as_dict() == dict(tiny_traces)
    worst = max(word_to_matrix(tiny.alphabet, w).frobenius_sq() for w in tiny_words)
    assert tally.max_frob_sq == worst
    assert tiny.constant() == pytest.approx(math.sqrt(worst) / tiny.N)


def test_materialize_limit(tiny):
    with pytest.raises(NormBoundError):
        tiny.materialize(limit=tiny.size - 1)


def test_tally_refuses_products_beyond_exact_floats(tiny, monkeypatch):
    original = sieve._complex
    monkeypatch.setattr(sieve, "_complex", lambda alphabet, word: original(alphabet, word) * 2 ** 27)
    with pytest.raises(NormBoundError, match="exact float"):
        sieve._tally_traces(tiny)


def test_count_for_one_plus_i_is_the_even_trace_count(tiny, tiny_traces):
    even = sum(c for t, c in tiny_traces.items() if (t.re + t.im) % 2 == 0)
    assert count_U(tiny, GaussianInt(1, 1)) == even


def test_unit_modulus_counts_everything(tiny):
    assert count_U(tiny, GaussianInt(1)) == tiny.size
    assert count_U(tiny, GaussianInt(0, 1)) == tiny.size


def test_counts_decompose_over_trace_levels(tiny, tiny_traces):
    for q in squarefree_moduli(50):
        direct = count_U(tiny, q)
        assert direct == count_U_by_levels(tiny, q), f"trace-level split fails mod {q}"
        ring = ResidueRing(q)
        assert direct == sum(c for t, c in tiny_traces.items() if ring.is_zero(t * t - 4))


def test_count_rejects_square_moduli(tiny):
    with pytest.raises(ValueError):
        count_U(tiny, GaussianInt(2))


@pytest.mark.parametrize("p", [GaussianInt(1, 1), GaussianInt(2, 1), GaussianInt(3), GaussianInt(3, 2)])
def test_beta_is_the_density_over_the_whole_group(p):
    ring = ResidueRing(p)
    group = enumerate_sl2(p)
    trace_index = ring.add_table[group[:, 0], group[:, 3]]
    levels, counts = np.unique(trace_index, return_counts=True)
    traces = np.array([[ring.element(int(k)).re, ring.element(int(k)).im] for k in levels], dtype=np.int64)
    synthetic = _synthetic(traces, counts.astype(np.int64))
    assert Fraction(count_U(synthetic, p), sl2_order(p)) == beta(p)


def test_squarefree_moduli():
    moduli = squarefree_moduli(10)
    assert moduli[0] == GaussianInt(1)
    assert GaussianInt(2) not in moduli
    assert GaussianInt(1, 3) in moduli
    assert all(is_squarefree(q) for q in moduli[1:])
    with pytest.raises(NormBoundError):
        squarefree_moduli(201)


def test_ledger_rows(tiny):
    ledger = sieve_ledger(tiny, 30)
    assert ledger.size == tiny.size
    first = ledger.rows[0]
    assert first.q == GaussianInt(1) and first.U == tiny.size and first.remainder == 0
    for row in ledger.rows:
        assert row.U == row.main + row.remainder
        assert row.beta == beta(row.q)
        assert row.main == beta(row.q) * tiny.size
    assert ledger.health == pytest.approx(float(ledger.total_remainder) / tiny.size)


def test_ledger_csv(tmp_path, tiny):
    ledger = sieve_ledger(tiny, 10)
    path = tmp_path / "ledger.csv"
    write_ledger_csv(ledger, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "q_re,q_im,Uq,beta_num,beta_den,main,remainder"
    assert lines[1] == f"1,0,{tiny.size},1,1,{tiny.size},0"
    assert len(lines) == len(ledger.rows) + 1


def test_almost_prime_count(tiny, tiny_traces):
    counts = [almost_prime_count(tiny, level) for level in (2, 5, 10, 25)]
    assert counts == sorted(counts, reverse=True)
    assert counts[0] <= tiny.size
    primes = gaussian_primes_up_to(10)
    expected = sum(
        c for t, c in tiny_traces.items()
        if not any(ResidueRing(p).is_zero(t * t - 4) for p in primes)
    )
    assert almost_prime_count(tiny, 10) == expected


def test_mertens_small_sample():
    report = mertens_check(10)
    assert report.exact == "91/90"
    assert report.total == pytest.approx(91 / 90)
    with pytest.raises(ValueError):
        mertens_check(9)


@pytest.mark.parametrize("n", [10**3, 10**4, 10**5])
def test_mertens_sum_is_bounded(n):
    assert abs(mertens_check(n).deviation) < 1


def test_dimension_product_is_stable():
    reports = [dimension_product(w, z) for w, z in ((10, 10**2), (10, 10**3), (10**2, 10**4))]
    ratios = [r.ratio for r in reports]
    assert max(ratios) / min(ratios) < 3, f"ratios {ratios}"
    assert reports[0].exact is not None
    assert Fraction(reports[0].exact) > 1


def test_dimension_product_edges():
    empty = dimension_product(10, 10)
    assert empty.product == 1.0 and empty.exact == "1"
    assert dimension_product(10, 100).product <= dimension_product(10, 1000).product
    with pytest.raises(ValueError):
        dimension_product(1, 10)


def test_squarefree_shortcut_matches_factorization():
    for re in range(-50, 50):
        for im in range(-50, 50):
            t = GaussianInt(re, im)
            D = t * t - 4
            if not D:
                assert not squarefree_disc_shortcut(t)
                continue
            assert squarefree_disc_shortcut(t) == is_squarefree(D), f"shortcut disagrees at t = {t}"


def test_trace_multiplicity_bruteforce():
    # identity, four [[1, u], [0, 1]] and four [[1, 0], [u, 1]]
    assert trace_multiplicity_bruteforce(2, 2) == 9
    with pytest.raises(NormBoundError):
        trace_multiplicity_bruteforce(9, 2)


def test_harvest_multiplicities_respect_the_trivial_bound(alphabet4, transitions4):
    report = harvest(alphabet4, transitions4, 8)
    assert sum(row.multiplicity for row in report.rows) == report.words
    for row in report.rows[:25]:
        assert row.multiplicity <= trace_multiplicity_bruteforce(8, row.trace), f"M({row.trace}) too large"


def test_harvest_discriminants(harvest32):
    assert harvest32.discriminants, "no square-free discriminants at R = 4, X = 32"
    traces = {row.trace for row in harvest32.rows}
    for D in harvest32.discriminants:
        assert is_squarefree(D)
        assert any(t * t - 4 == D for t in traces)
    assert harvest32.threshold_count is not None
    assert 0 <= harvest32.threshold_count <= len(harvest32.squarefree_traces)


def test_harvest_csv(tmp_path, harvest32):
    path = tmp_path / "harvest.csv"
    write_harvest_csv(harvest32, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t_re,t_im,M,disc_re,disc_im,squarefree"
    assert len(lines) == len(harvest32.rows) + 1


@pytest.mark.slow
def test_mertens_split_sums_drift_slowly():
    small, large = mertens_check(10**4), mertens_check(10**6)
    assert abs(large.deviation) < 1
    assert abs(large.split_one_drift - small.split_one_drift) < 0.1
    assert abs(large.split_three_drift - small.split_three_drift) < 0.1


@pytest.mark.slow
def test_ledger_health_improves_with_aleph(partition4, partition8):
    healths = []
    for Y in (3, 5):
        sifting = build_sifting_set(4, X=8, Y=Y, Z=4, partition=partition4, glue_partition=partition8)
        healths.append(sieve_ledger(sifting, 50).health)
    assert healths[1] < healths[0]
