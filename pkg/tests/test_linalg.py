import io
import random
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qifpipe import (
    Channel,
    Matrix,
    RRParams,
    SingularMatrixError,
    identity,
    invert,
    is_deterministic,
    is_stochastic,
    kron_power,
    kronecker,
    left_inverse,
    matmul,
    random_response,
    read_matrix_csv,
    write_matrix_csv,
)
from qifpipe.linalg import format_rational, matrix_from_json, matrix_to_json, parse_rational, to_rational
from qifpipe.pipelines import PostProcessor, boolean_aggregator, counting_query, sum_query, tally

import randgen

RR_HALF = random_response(RRParams(2, F(1, 2)), labels=("Yes", "No"))


class TestMatrix:
    def test_shape_and_lookup(self):
        m = Matrix(["a", "b"], [0, 1, 2], [[1, 2, 3], ["1/2", "0.25", 0]])
        assert m.shape == (2, 3)
        assert m["b", 1] == F(1, 4)
        assert m.row("a") == (1, 2, 3)
        assert m.column(0) == (1, F(1, 2))

    def test_rejects_bad_shapes_and_duplicate_labels(self):
        with pytest.raises(ValueError):
            Matrix([0], [0, 1], [[1]])
        with pytest.raises(ValueError):
            Matrix([0, 0], [0], [[1], [1]])
        with pytest.raises(ValueError):
            Matrix([0], [1, 1], [[1, 0]])

    def test_immutable(self):
        m = identity([0, 1])
        with pytest.raises(AttributeError):
            m.rows = (5,)

    def test_floats_refused(self):
        with pytest.raises(TypeError):
            to_rational(0.5)

    def test_channel_validation(self):
        with pytest.raises(ValueError):
            Channel([0], [0, 1], [["1/2", "1/3"]])
        with pytest.raises(ValueError):
            Channel([0], [0, 1], [[2, -1]])


class TestKronecker:
    def test_identity(self):
        i4 = kronecker(identity([0, 1]), identity([0, 1]))
        assert i4.entries_equal(identity(range(4)))

    def test_rr_pair_row(self):
        k = kronecker(RR_HALF, RR_HALF)
        assert k.row(("Yes", "Yes")) == (F(9, 16), F(3, 16), F(3, 16), F(1, 16))
        assert k.cols == (("Yes", "Yes"), ("Yes", "No"), ("No", "Yes"), ("No", "No"))

    def test_shape_rule(self):
        rng = random.Random(1)
        assert kronecker(randgen.rational_matrix(rng, 2, 3), randgen.rational_matrix(rng, 3, 2)).shape == (6, 6)

    def test_entry_rule(self):
        rng = random.Random(2)
        a, b = randgen.rational_matrix(rng, 2, 3), randgen.rational_matrix(rng, 3, 2)
        k = kronecker(a, b)
        for x in a.rows:
            for xp in b.rows:
                for y in a.cols:
                    for yp in b.cols:
                        assert k[(x, xp), (y, yp)] == a[x, y] * b[xp, yp]

    def test_channels_stay_channels(self):
        rng = random.Random(3)
        k = kronecker(randgen.stochastic(rng, range(3), range(2)), randgen.stochastic(rng, range(2), range(4)))
        assert isinstance(k, Channel) and is_stochastic(k)

    def test_power_zero_and_one(self):
        z = kron_power(RR_HALF, 0)
        assert z.shape == (1, 1) and z.data == ((1,),)
        one = kron_power(RR_HALF, 1)
        assert one.entries_equal(RR_HALF)
        assert one.rows == (("Yes",), ("No",))

    def test_power_two_is_rr_pair_channel(self):
        expected = [
            ["9/16", "3/16", "3/16", "1/16"],
            ["3/16", "9/16", "1/16", "3/16"],
            ["3/16", "1/16", "9/16", "3/16"],
            ["1/16", "3/16", "3/16", "9/16"],
        ]
        assert kron_power(RR_HALF, 2).entries_equal(expected)

    def test_power_recursion(self):
        rng = random.Random(4)
        a = randgen.rational_matrix(rng, 2, 2)
        for n in range(1, 4):
            assert kron_power(a, n).entries_equal(kronecker(kron_power(a, n - 1), a))

    @pytest.mark.parametrize("seed", range(10))
    def test_algebra(self, seed):
        rng = random.Random(seed)
        a, b, c = (randgen.rational_matrix(rng, rng.randint(1, 3), rng.randint(1, 3)) for _ in range(3))
        # associativity
        assert kronecker(kronecker(a, b), c).entries_equal(kronecker(a, kronecker(b, c)))
        # bilinearity
        b2 = randgen.rational_matrix(rng, *b.shape)
        assert kronecker(a, b + b2).entries_equal(kronecker(a, b) + kronecker(a, b2))
        assert kronecker(a.scale(F(3, 7)), b).entries_equal(kronecker(a, b).scale(F(3, 7)))
        # mixed product
        c = randgen.rational_matrix(rng, a.shape[1], rng.randint(1, 3))
        d = randgen.rational_matrix(rng, b.shape[1], rng.randint(1, 3))
        assert matmul(kronecker(a, b), kronecker(c, d)).entries_equal(kronecker(matmul(a, c), matmul(b, d)))

    @pytest.mark.parametrize("seed", range(8))
    def test_inverse_of_product(self, seed):
        rng = random.Random(100 + seed)
        a, b = randgen.invertible(rng, rng.choice((2, 3))), randgen.invertible(rng, rng.choice((2, 3)))
        assert invert(kronecker(a, b)).entries_equal(kronecker(invert(a), invert(b)))


class TestMatmul:
    def test_identity_right(self):
        rng = random.Random(5)
        c = randgen.stochastic(rng, range(3), range(4))
        assert matmul(c, identity(range(4))) == c

    def test_counting_row(self):
        t = counting_query(boolean_aggregator(("Yes", "No"), {"Yes"}), 2)
        row = matmul(kron_power(RR_HALF, 2), t).row(("Yes", "Yes"))
        # binomial(2, 3/4) read from zero successes upward
        assert row == (F(1, 16), F(6, 16), F(9, 16))

    def test_mismatch(self):
        with pytest.raises(ValueError):
            matmul(identity(range(2)), identity(range(3)))

    def test_channel_product_is_channel(self):
        rng = random.Random(6)
        p = matmul(randgen.stochastic(rng, range(2), range(3)), randgen.stochastic(rng, range(3), range(2)))
        assert isinstance(p, Channel)


class TestPredicates:
    def test_identity(self):
        assert is_deterministic(identity(range(3)))

    def test_rr(self):
        assert is_stochastic(RR_HALF) and not is_deterministic(RR_HALF)

    def test_tally(self):
        assert tally(2).shape == (4, 3) and is_deterministic(tally(2))

    def test_unused_column_not_deterministic(self):
        assert not is_deterministic(Matrix([0, 1], [0, 1], [[1, 0], [1, 0]]))


class TestLeftInverse:
    def test_identity(self):
        assert left_inverse(identity(range(3))) == identity(range(3))

    def test_counting_query(self):
        t = counting_query(boolean_aggregator(("Yes", "No"), {"Yes"}), 2)
        li = left_inverse(t)
        picks = [li.rows[i] for i in range(3)], [li.cols[r.index(1)] for r in li.data]
        assert picks == ([0, 1, 2], [("No", "No"), ("Yes", "No"), ("Yes", "Yes")])
        assert matmul(li, t).entries_equal(identity(range(3)))

    def test_outlier_aggregator(self):
        li = left_inverse(boolean_aggregator(range(3), {0, 2}))
        assert li.entries_equal([[1, 0, 0], [0, 1, 0]])

    def test_rejects_stochastic(self):
        with pytest.raises(ValueError):
            left_inverse(RR_HALF)

    @pytest.mark.parametrize("seed", range(10))
    def test_random_post_processors(self, seed):
        rng = random.Random(seed)
        p = randgen.deterministic(rng, range(rng.randint(1, 7)), rng.randint(1, 4))
        assert matmul(left_inverse(p), p).entries_equal(identity(p.cols))

    @pytest.mark.parametrize(
        "p",
        [sum_query(range(3), 2), counting_query(boolean_aggregator(range(3), {1}), 3), tally(3)],
        ids=["sum", "count", "tally"],
    )
    def test_pipeline_post_processors(self, p):
        assert isinstance(p, PostProcessor)
        assert matmul(left_inverse(p), p).entries_equal(identity(p.cols))


class TestInvert:
    def test_identity(self):
        assert invert(identity(range(3))).entries_equal(identity(range(3)))

    def test_singular(self):
        with pytest.raises(SingularMatrixError):
            invert(Matrix(range(2), range(2), [[1, 2], [1, 2]]))

    @pytest.mark.parametrize("seed", range(5))
    def test_inverse_property(self, seed):
        rng = random.Random(seed)
        a = randgen.invertible(rng, 3)
        assert matmul(a, invert(a)).entries_equal(identity(range(3)))


rationals = st.fractions(max_denominator=10**12)


@given(rationals)
def test_rational_round_trip(r):
    assert parse_rational(format_rational(r)) == r


def test_decimal_literal_is_exact():
    assert parse_rational("0.36") == F(9, 25)
    assert parse_rational("0.3125") == F(5, 16)


@given(st.lists(st.lists(rationals, min_size=3, max_size=3), min_size=1, max_size=4))
def test_csv_round_trip(grid):
    m = Matrix([(i, "x") for i in range(len(grid))], ["a", 2, (0, 1)], grid)
    back = read_matrix_csv(io.StringIO(write_matrix_csv(m)))
    assert back == m


def test_json_round_trip():
    k = kron_power(RR_HALF, 2)
    assert matrix_from_json(matrix_to_json(k), Channel) == k


def test_csv_errors_name_the_line():
    with pytest.raises(ValueError, match="line 3"):
        read_matrix_csv(io.StringIO(",a\nr,1\ns,zz\n"))
    with pytest.raises(ValueError):
        read_matrix_csv(io.StringIO(""))
