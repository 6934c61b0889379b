import numpy as np
import pytest
from hypothesis import given, strategies as st

from cm_duel.constellation import (
    ConstellationError,
    LABELING_ALIASES,
    average_symbol_energy,
    bits_to_symbols,
    error_vector,
    format_symbols,
    from_cli_name,
    is_corner_pair,
    is_gray,
    make_pam,
    map_bits,
    parse_symbols,
    symbols_to_bits,
)


@pytest.mark.parametrize("m, expected", [(2, [-3, -1, 1, 3]), (3, [-7, -5, -3, -1, 1, 3, 5, 7])])
def test_points_are_odd_multiples_of_d(m, expected):
    c = make_pam(m, "SP", d=0.5)
    np.testing.assert_allclose(c.points, 0.5 * np.array(expected))


@pytest.mark.parametrize(
    "name, labels",
    [
        ("G1", ["00", "01", "11", "10"]),
        ("G2", ["00", "10", "11", "01"]),
        ("G3", ["01", "00", "10", "11"]),
        ("G4", ["10", "00", "01", "11"]),
    ],
)
def test_gray_labelings_table(name, labels):
    c = make_pam(2, name)
    assert ["".join(str(b) for b in c.bits[i]) for i in range(4)] == labels


def test_four_distinct_gray_labelings():
    codes = {make_pam(2, n).labeling for n in ("G1", "G2", "G3", "G4")}
    assert len(codes) == 4
    assert all(is_gray(make_pam(2, n)) for n in ("G1", "G2", "G3", "G4"))


@pytest.mark.parametrize("m, name, gray", [(2, "SP", False), (3, "SP", False), (3, "BRGC", True), (2, "BRGC", True)])
def test_is_gray(m, name, gray):
    assert is_gray(make_pam(m, name)) is gray


def test_brgc_equals_g1():
    assert make_pam(2, "BRGC").labeling == make_pam(2, "G1").labeling


@pytest.mark.parametrize("m, es", [(2, 5.0), (3, 21.0)])
def test_average_energy(m, es):
    assert average_symbol_energy(make_pam(m, "BRGC", d=2.0)) == pytest.approx(4 * es)


@given(st.sampled_from(sorted(LABELING_ALIASES)), st.data())
def test_bits_symbols_roundtrip(alias, data):
    c = from_cli_name(alias)
    idx = np.array(data.draw(st.lists(st.integers(0, c.M - 1), min_size=1, max_size=12)))
    bits = symbols_to_bits(c, idx)
    assert bits.shape == (len(idx) * c.m,)
    np.testing.assert_array_equal(bits_to_symbols(c, bits), idx)


def test_map_bits_inverts_labels(gray):
    for i in range(4):
        assert map_bits(gray, gray.bits[i]) == i


def test_error_vector_and_corners(gray):
    assert error_vector(gray, 0, 0).tolist() == [0, 0]
    # Neighbours differ in exactly one bit; corners are s1 and s4.
    for i in range(3):
        assert error_vector(gray, i, i + 1).sum() == 1
    assert is_corner_pair(0, 3) and is_corner_pair(3, 0)
    assert not is_corner_pair(1, 2)


def test_symbol_text_roundtrip():
    assert parse_symbols("s1,s4,s3,s2") == [0, 3, 2, 1]
    assert format_symbols([0, 3]) == "[s1,s4]"
    assert parse_symbols(" S2, s3 ") == [1, 2]


@pytest.mark.parametrize("bad", ["s0", "x1", "s1,q", "s-1"])
def test_bad_symbol_tokens(bad):
    with pytest.raises(ConstellationError):
        parse_symbols(bad)


@pytest.mark.parametrize(
    "call",
    [
        lambda: make_pam(4, "SP"),
        lambda: make_pam(3, "G1"),
        lambda: from_cli_name("g5"),
        lambda: make_pam(2, "G1", d=0.0),
    ],
)
def test_invalid_constellations(call):
    with pytest.raises(ConstellationError):
        call()


def test_bit_length_must_fill_symbols():
    with pytest.raises(ConstellationError):
        bits_to_symbols(make_pam(3, "BRGC"), [0, 1])
