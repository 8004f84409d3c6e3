import random

import numpy as np
import pytest

from geolab.errors import CertificationError, InadmissibleWordError
from geolab.gaussian import GaussianInt
from geolab.hurwitz import NOT_ADJACENT, Cline, Constraint
from geolab.subshift import (
    _PartTable,
    TransitionMatrix,
    build_glue_table,
    canonical_periodic,
    check_irreducible_aperiodic,
    count_words,
    enumerate_words,
    glue,
    is_admissible,
    is_primitive,
    require_admissible,
    write_words,
)


@pytest.fixture
def full_shift():
    return TransitionMatrix(np.ones((4, 4), dtype=bool))


def _random_word(matrix: TransitionMatrix, length: int, rng: random.Random):
    word = [rng.randrange(matrix.size)]
    while len(word) < length:
        word.append(rng.choice(matrix.successors(word[-1])))
    return tuple(word)


@pytest.mark.parametrize("radius", [4, 5, 6])
def test_subshift_is_irreducible_and_aperiodic(radius, request):
    transitions = request.getfixturevalue(f"transitions{radius}")
    report = check_irreducible_aperiodic(transitions)
    assert report.irreducible, f"R = {radius} subshift is reducible"
    assert report.period == 1, f"R = {radius} subshift has period {report.period}"
    assert report.primitivity_index is not None and report.primitivity_index <= 3


def test_cycle_control_has_period_three():
    cycle = TransitionMatrix.from_edges(3, [(0, 1), (1, 2), (2, 0)])
    report = check_irreducible_aperiodic(cycle)
    assert report.irreducible
    assert report.period == 3
    assert report.primitivity_index is None


def test_reducible_control():
    report = check_irreducible_aperiodic(TransitionMatrix.from_edges(2, [(0, 0), (0, 1), (1, 1)]))
    assert not report.irreducible


def test_every_part_has_a_successor(transitions4):
    assert transitions4.bits.any(axis=1).all()


def test_square_part_left_of_three_follows_itself(partition4, transitions4):
    label = partition4.find((5, 0))[0].label
    assert transitions4.bits[label, label]


def test_transitions_agree_on_common_letters(partition4, transitions4, transitions5, partition5):
    mapping = partition4.label_map(partition5)
    assert np.array_equal(transitions5.bits[np.ix_(mapping, mapping)], transitions4.bits)
    assert np.array_equal(transitions5.restrict(mapping).bits, transitions4.bits)


def _open_cell_part(partition):
    return next(p for p in partition if not p.clipped_by and set(p.flags) == {NOT_ADJACENT})


def test_line_between_samples_is_undecidable(partition4):
    table = _PartTable(partition4)
    part = _open_cell_part(partition4)
    k = part.cell[0]
    # x = k/2 + 1/512 lies left of every sample column but inside the cell
    constraint = Constraint(Cline(0, GaussianInt(256, 0), -(256 * k + 1)), +1)
    all_in, _ = table.sampled(constraint)
    assert all_in[part.label]
    assert table.exact_sign(constraint.cline)[part.label] == 0
    with pytest.raises(CertificationError, match="undecidable"):
        table.decide(constraint, 0)


def test_small_circle_near_origin_misses_every_part(partition4):
    table = _PartTable(partition4)
    # centre 1/3, radius 1/3
    circle = Cline(3, GaussianInt(-1, 0), 0)
    assert table.decide(Constraint(circle, +1), 0).all()
    assert not table.decide(Constraint(circle, -1), 0).any()


def test_exact_sign_on_own_boundaries(partition4):
    table = _PartTable(partition4)
    for part in partition4:
        for constraint in part.constraints():
            normal = constraint.normalized()
            assert table.exact_sign(normal.cline)[part.label] == normal.side


def test_exact_sign_of_grid_lines_matches_cells(partition4):
    table = _PartTable(partition4)
    line = Cline(0, GaussianInt(1, 0), -3)  # x = 3/2
    sign = table.exact_sign(line)
    ks = np.array([p.cell[0] for p in partition4])
    assert np.array_equal(sign, np.where(ks >= 3, 1, -1))


def test_word_enumeration_small_lengths(transitions4):
    assert list(enumerate_words(transitions4, 0)) == [()]
    assert list(enumerate_words(transitions4, 1)) == [(x,) for x in range(transitions4.size)]
    assert len(list(enumerate_words(transitions4, 2))) == transitions4.nnz


def test_word_enumeration_is_lexicographic_and_admissible(transitions4):
    words = list(enumerate_words(transitions4, 3))
    assert words == sorted(words)
    assert len(words) == count_words(transitions4, 3)
    assert all(is_admissible(transitions4, w) for w in words)


def test_pinned_enumeration(transitions4):
    x, y = 0, transitions4.size - 1
    words = list(enumerate_words(transitions4, 4, start=x, end=y))
    assert all(w[0] == x and w[-1] == y for w in words)
    assert len(words) == count_words(transitions4, 4, start=x, end=y)


def test_word_counts_compose(transitions4):
    n, m = 2, 3
    for x in range(0, transitions4.size, 5):
        for y in range(0, transitions4.size, 7):
            through = sum(
                count_words(transitions4, n, start=x, end=z) * count_words(transitions4, m, start=z, end=y)
                for z in range(transitions4.size)
            )
            assert count_words(transitions4, n + m - 1, start=x, end=y) == through


def test_canonical_periodic_examples(full_shift):
    assert canonical_periodic(full_shift, (3, 1, 2)).word == (1, 2, 3)
    assert canonical_periodic(full_shift, (1, 2, 1, 2)).primitive is False
    single = canonical_periodic(full_shift, (2,))
    assert single.word == (2,) and single.primitive


def test_canonical_periodic_rejects_cyclic_break():
    matrix = TransitionMatrix.from_edges(3, [(0, 1), (1, 2), (2, 2)])
    with pytest.raises(InadmissibleWordError):
        canonical_periodic(matrix, (0, 1, 2))
    with pytest.raises(InadmissibleWordError):
        canonical_periodic(matrix, ())


def test_canonical_periodic_is_rotation_invariant(transitions4):
    rng = random.Random(4)
    checked = 0
    while checked < 100:
        word = _random_word(transitions4, rng.randint(1, 6), rng)
        if not transitions4.bits[word[-1], word[0]]:
            continue
        checked += 1
        canonical = canonical_periodic(transitions4, word)
        assert canonical_periodic(transitions4, canonical.word) == canonical
        k = rng.randrange(len(word))
        assert canonical_periodic(transitions4, word[k:] + word[:k]).word == canonical.word


@pytest.mark.parametrize("word, expected", [((1, 2, 1, 2), False), ((1, 2, 1), True), ((5, 5, 5), False), ((7,), True)])
def test_is_primitive(word, expected):
    assert is_primitive(word) is expected


def test_require_admissible_reports_position():
    matrix = TransitionMatrix.from_edges(2, [(0, 1), (1, 0)])
    with pytest.raises(InadmissibleWordError) as info:
        require_admissible(matrix, (0, 1, 1, 0))
    assert info.value.position == 1


def test_glue_table_covers_all_pairs(transitions4):
    table = build_glue_table(transitions4)
    assert table.is_complete()
    for x in range(transitions4.size):
        for y in range(transitions4.size):
            assert is_admissible(transitions4, (x,) + table.connector(x, y) + (y,))


def test_glue_random_words(transitions4):
    table = build_glue_table(transitions4)
    rng = random.Random(9)
    for _ in range(100):
        a = _random_word(transitions4, rng.randint(1, 5), rng)
        b = _random_word(transitions4, rng.randint(1, 5), rng)
        glued = glue(a, b, table)
        assert len(glued) == len(a) + len(b) + 3
        assert is_admissible(transitions4, glued)
        assert glued[len(a): len(a) + 3] == table.connector(a[-1], b[0])


def test_transition_csv_and_word_dump(tmp_path, transitions4):
    path = tmp_path / "transitions.csv"
    transitions4.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "from_label,to_label"
    assert len(lines) == transitions4.nnz + 1

    words_path = tmp_path / "words.txt"
    write_words([(1, 2, 3), (4,)], words_path)
    assert words_path.read_text() == "1,2,3\n4\n"
