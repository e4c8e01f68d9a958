from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.errors import AlphabetMismatchError, DiscretizationError, HistoryIndexError, ShapeError
from core.history import ActionSymbol, Alphabet, HistoryTape, PerceptSymbol, build_tape, loss_grid
from core.numeric import accumulate, argmin_first, format_number, is_normalized, parse_probability, product

from tests.conftest import A0, A1, X0, X1

BITS = Alphabet(2)


def empty_tape(loss_levels=None):
    return HistoryTape.empty(BITS, BITS, loss_grid(loss_levels) if loss_levels else None)


class TestHistoryTape:
    def test_append_to_empty_tape(self):
        tape = empty_tape().append_cycle(A0, X1)
        assert tape.length == 1
        assert tape.cycles == ((A0, X1),)

    def test_append_second_cycle(self):
        tape = empty_tape().append_cycle(A0, X1).append_cycle(A1, X0)
        assert len(tape) == 2
        assert tape.actions == (A0, A1)
        assert tape.percepts == (X1, X0)

    def test_append_leaves_original_untouched(self):
        tape = empty_tape()
        tape.append_cycle(A0, X1)
        assert tape.length == 0

    def test_action_outside_alphabet(self):
        with pytest.raises(AlphabetMismatchError):
            empty_tape().append_cycle(ActionSymbol(5), X0)

    def test_loss_level_on_plain_tape(self):
        with pytest.raises(AlphabetMismatchError):
            empty_tape().append_cycle(A0, PerceptSymbol(0, 1))

    def test_embedded_tape_needs_loss_level(self):
        tape = empty_tape(loss_levels=2)
        with pytest.raises(AlphabetMismatchError):
            tape.append_cycle(A0, X0)
        assert tape.append_cycle(A0, PerceptSymbol(0, 1)).length == 1

    def test_views_at_first_cycle(self):
        tape = empty_tape().append_cycle(A1, X0)
        assert tape.history_views(1) == ((), (A1,))

    def test_views_at_second_cycle(self):
        tape = empty_tape().append_cycle(A0, X1).append_cycle(A1, X0)
        assert tape.history_views(2) == ((X1,), (A0, A1))

    def test_views_beyond_tape(self):
        tape = empty_tape().append_cycle(A0, X1)
        with pytest.raises(HistoryIndexError):
            tape.history_views(3)
        with pytest.raises(HistoryIndexError):
            tape.history_views(0)

    def test_views_include_pending_action(self):
        tape = empty_tape().append_cycle(A0, X1).with_action(A1)
        assert tape.history_views(2) == ((X1,), (A0, A1))
        assert tape.complete_cycle(X0).cycles == ((A0, X1), (A1, X0))

    def test_pending_action_blocks_append(self):
        with pytest.raises(HistoryIndexError):
            empty_tape().with_action(A0).append_cycle(A0, X0)

    def test_parse_serialized_history(self):
        tape = HistoryTape.parse("0:1/0 1:0/1", BITS, BITS, loss_grid(2))
        assert tape.cycles == ((A0, PerceptSymbol(1, 0)), (A1, PerceptSymbol(0, 1)))
        assert tape.serialize() == "0:1/0 1:0/1"

    def test_build_tape(self):
        tape = build_tape(BITS, BITS, [A0, A1], [X1, X1])
        assert tape.serialize() == "0:1 1:1"

    def test_build_tape_length_mismatch(self):
        with pytest.raises(ShapeError):
            build_tape(BITS, BITS, [A0, A1], [X1])
        with pytest.raises(ShapeError):
            build_tape(BITS, BITS, [A0], [X1, X0])


class TestLossGrid:
    def test_values(self):
        grid = loss_grid(3)
        assert [grid.value(i) for i in range(3)] == [0, Fraction(1, 2), 1]

    def test_index_of(self):
        grid = loss_grid(3)
        assert grid.index_of(0.5) == 1
        assert grid.index_of(Fraction(1)) == 2

    def test_off_grid_value(self):
        with pytest.raises(DiscretizationError):
            loss_grid(3).index_of(0.3)

    def test_single_level_grid(self):
        grid = loss_grid(1)
        assert grid.index_of(0) == 0
        with pytest.raises(DiscretizationError):
            grid.index_of(1)

    def test_alphabet_needs_symbols(self):
        with pytest.raises(ValueError):
            Alphabet(0)


class TestNumeric:
    def test_parse_probability(self):
        assert parse_probability("3/4") == Fraction(3, 4)
        assert isinstance(parse_probability(0.5), float)

    def test_exact_arithmetic_stays_exact(self):
        assert accumulate([Fraction(1, 3)] * 3) == 1
        assert product([Fraction(7, 10), Fraction(7, 10), Fraction(3, 10)]) == Fraction(147, 1000)

    def test_is_normalized(self):
        assert is_normalized([Fraction(1, 4), Fraction(3, 4)])
        assert is_normalized([0.1] * 10)
        assert not is_normalized([0.5, 0.6])

    def test_argmin_ties_go_to_smallest_index(self):
        assert argmin_first([Fraction(1, 2), Fraction(1, 2)]) == 0
        assert argmin_first([0.3, 0.3 - 1e-15]) == 0
        assert argmin_first([0.3, 0.2]) == 1

    def test_format_number(self):
        assert format_number(Fraction(3, 4)) == "3/4"
        assert format_number(Fraction(1)) == "1"
        assert format_number(0.25) == "0.25"


plain_cycles = st.lists(st.tuples(st.integers(0, 2), st.integers(0, 1)), min_size=0, max_size=64)
graded_cycles = st.lists(st.tuples(st.integers(0, 2), st.integers(0, 1), st.integers(0, 2)), min_size=0, max_size=64)


@pytest.mark.property
class TestTapeProperties:
    @settings(max_examples=200, deadline=None)
    @given(plain_cycles)
    def test_appended_cycles_read_back(self, cycles):
        tape = HistoryTape.empty(Alphabet(3), BITS)
        for y, x in cycles:
            tape = tape.append_cycle(ActionSymbol(y), PerceptSymbol(x))
        assert tape.length == len(cycles)
        assert tape.actions == tuple(ActionSymbol(y) for y, _ in cycles)
        assert tape.percepts == tuple(PerceptSymbol(x) for _, x in cycles)
        for t in range(1, len(cycles) + 1):
            xs, ys = tape.history_views(t)
            assert xs == tape.percepts[:t - 1]
            assert ys == tape.actions[:t]

    @settings(max_examples=200, deadline=None)
    @given(graded_cycles)
    def test_serialized_tape_parses_back(self, cycles):
        grid = loss_grid(3)
        tape = HistoryTape.empty(Alphabet(3), BITS, grid)
        for y, x, level in cycles:
            tape = tape.append_cycle(ActionSymbol(y), PerceptSymbol(x, level))
        parsed = HistoryTape.parse(tape.serialize(), Alphabet(3), BITS, grid)
        assert parsed == tape
        assert build_tape(Alphabet(3), BITS, tape.actions, tape.percepts, grid) == tape
