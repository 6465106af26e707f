import pytest
from hypothesis import given, strategies as st

from setcon.calculus import (
    UNIT,
    Collection,
    CollectionError,
    ObjectSpec,
    agreement_table,
    al,
    brute_force_al,
    complete,
    normalize,
    parse_collection,
    scn,
    solvable,
    witness,
)


def specs_from(pairs):
    return [ObjectSpec(a, b) for a, b in pairs]


@st.composite
def collections(draw, max_ell=14):
    pairs = draw(st.lists(st.integers(1, max_ell).flatmap(
        lambda ell: st.tuples(st.just(ell), st.integers(1, ell))), min_size=0, max_size=4))
    return normalize(specs_from(pairs))


# parsing and normal form


def test_parse_is_order_and_duplicate_insensitive():
    assert parse_collection("5:2,2:1,5:2") == parse_collection("1:1,2:1,5:2")
    assert str(parse_collection("5:2,2:1,5:2")) == "1:1,2:1,5:2"


@pytest.mark.parametrize("text", ["", "3", "3:", "a:1", "0:1", "2:0", "-1:1", "2:3", "3:1;4:2"])
def test_parse_rejects(text):
    with pytest.raises(CollectionError):
        parse_collection(text)


def test_normalize_drops_dominated():
    assert normalize(specs_from([(6, 3), (6, 2)])).specs == (UNIT, ObjectSpec(6, 2))
    assert normalize(specs_from([(3, 2), (4, 2)])).specs == (UNIT, ObjectSpec(4, 2))


def test_normalize_keeps_unit_under_consensus_objects():
    c = normalize(specs_from([(2, 1)]))
    assert c.specs == (UNIT, ObjectSpec(2, 1))


def test_collection_invariants():
    with pytest.raises(CollectionError):
        Collection((ObjectSpec(2, 1),))
    with pytest.raises(CollectionError):
        Collection((UNIT, ObjectSpec(5, 3), ObjectSpec(4, 2)))
    with pytest.raises(CollectionError):
        ObjectSpec(2, 3)


@given(collections())
def test_normal_form_is_strictly_increasing(c):
    ells = [s.ell for s in c]
    js = [s.j for s in c]
    assert c.specs[0] == UNIT
    assert ells == sorted(set(ells))
    assert js[1:] == sorted(set(js[1:]))
    assert normalize(c.specs) == c


# completion


def test_completion_golden():
    got = complete(parse_collection("1:1,3:2,10:6"), 11)
    assert got == tuple(specs_from([(1, 1), (3, 2), (7, 6), (8, 6), (9, 6), (10, 6)]))


def test_completion_truncates_at_n():
    assert complete(parse_collection("1:1,5:2"), 3) == tuple(specs_from([(1, 1), (3, 2)]))
    assert al(parse_collection("1:1,5:2"), 3) == 2


def test_completion_skips_species_with_j_at_least_n():
    assert complete(parse_collection("1:1,10:6"), 5) == (UNIT,)


@given(collections(), st.integers(1, 12))
def test_completion_is_sound(c, n):
    # partial use of an object: t <= ell processes at cost j
    assert al(c, n) == brute_force_al(c, n, use_completion=False)


# agreement levels


REF = parse_collection("1:1,13:5,20:9")


def test_reference_table():
    want = [0, 1, 2, 3, 4] + [5] * 9 + [6, 7, 8] + [9] * 4 + [10] * 6
    assert list(agreement_table(REF, 26).levels) == want


def test_worked_example():
    c = parse_collection("1:1,2:1,5:2")
    assert list(agreement_table(c, 10).levels[1:]) == [1, 1, 2, 2, 2, 3, 3, 4, 4, 4]
    assert not solvable(c, 9, 3) and solvable(c, 9, 4)


def test_only_unit_is_identity():
    c = parse_collection("1:1")
    assert [al(c, n) for n in range(1, 8)] == list(range(1, 8))
    assert scn(c, 5) == 5


def test_table_tsv():
    text = agreement_table(parse_collection("1:1,2:1"), 3).to_tsv()
    assert text == "r\tAL\n0\t0\n1\t1\n2\t1\n3\t2\n"


@pytest.mark.parametrize("bad", [0, -1, 1.5])
def test_bad_n(bad):
    with pytest.raises(CollectionError):
        al(REF, bad)


@given(collections(), st.integers(1, 30))
def test_monotone_in_n(c, n):
    assert al(c, n) <= al(c, n + 1) <= al(c, n) + 1


@given(collections(), st.integers(1, 12), st.integers(1, 14).flatmap(
    lambda ell: st.tuples(st.just(ell), st.integers(1, ell))))
def test_more_objects_never_hurt(c, n, pair):
    assert al(c.with_spec(ObjectSpec(*pair)), n) <= al(c, n)


@given(collections(), st.integers(1, 12))
def test_dp_matches_oracle(c, n):
    assert al(c, n) == brute_force_al(c, n)


def test_brute_force_refuses_large_n():
    with pytest.raises(CollectionError):
        brute_force_al(REF, 15)


# set-consensus numbers


def test_scn_example():
    c = parse_collection("2:1,5:2")
    assert [scn(c, j) for j in range(1, 5)] == [2, 5, 7, 10]


@given(collections(), st.integers(1, 10))
def test_duality(c, j):
    s = scn(c, j)
    assert al(c, s) <= j < al(c, s + 1)


# witnesses


@pytest.mark.parametrize("n, parts", [
    (16, [(13, 5), (1, 1), (1, 1), (1, 1)]),
    (17, [(20, 9)]),
    (21, [(20, 9), (1, 1)]),
    (22, [(13, 5), (13, 5)]),
])
def test_reference_witnesses(n, parts):
    assert list(witness(REF, n).parts) == parts


def test_witness_for_nine():
    w = witness(parse_collection("1:1,2:1,5:2"), 9)
    assert str(w) == "5:2,5:2" and w.total_t == 10 and w.total_s == 4


@given(collections(), st.integers(1, 30))
def test_witness_is_sound(c, n):
    w = witness(c, n)
    assert w.total_t >= n
    assert w.total_s == al(c, n)
    assert all(ObjectSpec(t, s) in c.specs for t, s in w.parts)
