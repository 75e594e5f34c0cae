import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chaosbounds.errors import CapacityError, ValidationError
from chaosbounds.partitions import (MAX_ENUMERATION_SIZE, SetPartition, bell_number, check_partition,
                                    enumerate_partitions, partition_Ik, partition_jk, partition_PI,
                                    partitions_of_size)

BELL = [1, 1, 2, 5, 15, 52, 203, 877]


def stirling2(n, k):
    # explicit inclusion-exclusion formula, independent of the recursion used anywhere else
    return sum((-1) ** i * math.comb(k, i) * (k - i) ** n for i in range(k + 1)) // math.factorial(k)


def test_bell_sequence():
    assert [bell_number(n) for n in range(8)] == BELL


@pytest.mark.parametrize("n", range(1, 8))
def test_enumeration_counts_match_bell(n):
    parts = enumerate_partitions(range(1, n + 1))
    assert len(parts) == BELL[n]
    assert len({p.blocks for p in parts}) == len(parts)


@pytest.mark.parametrize("n", range(1, 8))
def test_partitions_of_size_match_stirling(n):
    for s in range(1, n + 1):
        assert len(partitions_of_size(range(1, n + 1), s)) == stirling2(n, s)


def test_spec_examples_enumeration():
    assert len(enumerate_partitions([1])) == 1
    assert len(enumerate_partitions([1, 2, 3])) == 5
    assert len(enumerate_partitions(range(1, 6))) == 52
    assert len(partitions_of_size([1, 2, 3], 2)) == 3
    assert [str(p) for p in partitions_of_size([1, 2, 3], 3)] == ["{1|2|3}"]
    assert [str(p) for p in partitions_of_size([1, 2, 3], 1)] == ["{1,2,3}"]


def test_arbitrary_ground_set():
    parts = enumerate_partitions([7, 3, 5])
    assert all(p.ground == (3, 5, 7) for p in parts)
    assert str(parts[0]) == "{3,5,7}"


def test_guards():
    with pytest.raises(CapacityError):
        enumerate_partitions(range(1, MAX_ENUMERATION_SIZE + 2))
    with pytest.raises(ValidationError):
        enumerate_partitions([])
    with pytest.raises(ValidationError):
        partitions_of_size([1, 2], 3)
    with pytest.raises(ValidationError):
        partitions_of_size([1, 2], 0)


@given(st.integers(1, 6))
def test_every_partition_is_canonical(n):
    for p in enumerate_partitions(range(1, n + 1)):
        check_partition(p.ground, p.blocks)
        assert [b[0] for b in p.blocks] == sorted(b[0] for b in p.blocks)


def test_special_partitions():
    assert str(partition_jk(3, 1, 2)) == "{2,3}"
    assert partition_jk(3, 1, 2).ground == (2, 3)
    assert str(partition_jk(4, 2, 1)) == "{1,4|3}"
    assert str(partition_jk(4, 1, 3)) == "{2|3,4}"
    assert str(partition_Ik(4, [1], 2)) == "{2,4|3}"
    assert str(partition_Ik(4, [1, 2], 3)) == "{3,4}"
    assert str(partition_Ik(5, [2], 4)) == "{1|3|4,5}"
    assert str(partition_PI(3, [1])) == "{1,3|2}"
    assert str(partition_PI(3, [1, 2])) == "{1,2,3}"
    assert str(partition_PI(4, [2, 3])) == "{1|2,3,4}"


def test_special_partition_errors():
    with pytest.raises(ValidationError):
        partition_jk(3, 1, 1)
    with pytest.raises(ValidationError):
        partition_jk(3, 1, 3)
    with pytest.raises(ValidationError):
        partition_jk(2, 1, 2)
    with pytest.raises(ValidationError):
        partition_Ik(4, [1], 1)
    with pytest.raises(ValidationError):
        partition_PI(4, [])


@given(st.integers(3, 7), st.data())
def test_special_partition_sizes(d, data):
    I = data.draw(st.sets(st.integers(1, d - 1), min_size=1, max_size=d - 1))
    assert len(partition_PI(d, I)) == d - len(I)
    j, k = data.draw(st.lists(st.integers(1, d - 1), min_size=2, max_size=2, unique=True))
    assert len(partition_jk(d, j, k)) == d - 2


def test_parse_roundtrip_and_refines():
    p = SetPartition.parse("{3,1|2}")
    assert str(p) == "{1,3|2}"
    assert SetPartition.parse(str(p)) == p
    fine = SetPartition.parse("{1|2|3}")
    assert fine.refines(p) and not p.refines(fine)
    assert p.to_unit_range() == p
    assert str(SetPartition.parse("{4|2,6}").to_unit_range()) == "{1,3|2}"
    for bad in ["1,2", "{}", "{1||2}", "{a}", "{1,1}"]:
        with pytest.raises(ValidationError):
            SetPartition.parse(bad)


def test_invalid_partition_rejected():
    with pytest.raises(ValidationError):
        SetPartition((1, 2), ((1,),))
    with pytest.raises(ValidationError):
        SetPartition((1, 2), ((2,), (1,)))
