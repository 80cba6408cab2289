"""Label algebra: join/dominance semantics, order axioms, text form."""

from __future__ import annotations

import random

import pytest

from skillgate.errors import LabelError
from skillgate.lattice import Label, dominated_by, join, parse_label


def L(rank, comps=(), cavs=()):
    return Label(rank=rank, compartments=frozenset(comps), caveats=frozenset(cavs))


class TestJoin:
    def test_join_formula(self):
        a = L(2, {"A"}, {"X", "Y"})
        b = L(3, {"B"}, {"Y"})
        assert join(a, b) == L(3, {"A", "B"}, {"Y"})

    def test_join_idempotent(self):
        for x in (L(0), L(2, {"A"}, {"X"}), L(4, {"A", "B"}, {"X", "Y"})):
            assert join(x, x) == x

    def test_join_empty_caveat_intersection(self):
        assert join(L(0, (), {"X"}), L(1)) == L(1)


class TestDominatedBy:
    def test_reflexive(self):
        x = L(2, {"A"}, {"X"})
        assert dominated_by(x, x)

    def test_componentwise_containment(self):
        assert dominated_by(L(1, {"A"}, {"X"}), L(2, {"A", "B"}, {"X"}))

    def test_rank_violation(self):
        assert not dominated_by(L(2), L(1))

    def test_compartment_violation(self):
        assert not dominated_by(L(1, {"A", "C"}), L(2, {"A", "B"}))

    def test_caveat_contravariance(self):
        # Fewer caveats means more releasable, hence higher in the order.
        assert dominated_by(L(1, (), {"X", "Y"}), L(1, (), {"X"}))
        assert not dominated_by(L(1, (), {"X"}), L(1, (), {"X", "Y"}))


def random_label(rng: random.Random) -> Label:
    pool_c = ["A", "B", "C", "D"]
    pool_r = ["X", "Y", "Z"]
    return Label(
        rank=rng.randint(0, 4),
        compartments=frozenset(rng.sample(pool_c, rng.randint(0, len(pool_c)))),
        caveats=frozenset(rng.sample(pool_r, rng.randint(0, len(pool_r)))),
    )


class TestAlgebraProperties:
    def test_join_commutative_associative_and_lub(self):
        rng = random.Random(20310811)
        for _ in range(2000):
            a, b, c = (random_label(rng) for _ in range(3))
            assert join(a, b) == join(b, a)
            assert join(a, join(b, c)) == join(join(a, b), c)
            j = join(a, b)
            assert dominated_by(a, j) and dominated_by(b, j)
            if dominated_by(a, c) and dominated_by(b, c):
                assert dominated_by(j, c)

    def test_partial_order_axioms(self):
        rng = random.Random(42)
        for _ in range(2000):
            a, b, c = (random_label(rng) for _ in range(3))
            assert dominated_by(a, a)
            if dominated_by(a, b) and dominated_by(b, a):
                assert a == b
            if dominated_by(a, b) and dominated_by(b, c):
                assert dominated_by(a, c)


class TestTextForm:
    def test_render_sorted(self):
        assert L(2, {"B", "A"}, {"Y", "X"}).to_text() == "2:A,B:X,Y"

    def test_empty_segments(self):
        assert L(0).to_text() == "0::"

    def test_parse_round_trip(self):
        for text in ("0::", "2:A,B:X,Y", "4::Z", "1:only:"):
            assert parse_label(text).to_text() == text

    @pytest.mark.parametrize(
        "bad",
        ["", "1:", "1:a", "5::", "-1::", "1:a,,b:", "1:a,a:", "1:a b:", "x::", "1:a:b:c"],
    )
    def test_parse_rejects(self, bad):
        with pytest.raises(LabelError):
            parse_label(bad)

    def test_max_rank_is_configurable(self):
        assert parse_label("7::", max_rank=9).rank == 7
        with pytest.raises(LabelError):
            parse_label("7::", max_rank=6)


class TestValidation:
    def test_negative_rank(self):
        with pytest.raises(LabelError):
            Label(rank=-1)

    def test_empty_identifier(self):
        with pytest.raises(LabelError):
            Label(rank=0, compartments=frozenset({""}))

    def test_identifier_charset(self):
        with pytest.raises(LabelError):
            Label(rank=0, caveats=frozenset({"has space"}))
