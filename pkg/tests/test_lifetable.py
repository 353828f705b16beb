import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from alphacoda.errors import DataGapError, DomainError, FormatError, ParseError
from alphacoda.lifetable import (
    CompositionSeries,
    LifeTableRecord,
    build_series,
    parse_hmd_lifetable,
    qx_from_death_composition,
    read_series_csv,
    rebuild_dx_from_qx,
    survivors_from_qx,
    write_series_csv,
)

HEADER = "Australia, Life tables (period 1x1), Females\tLast modified: 01 Jan 2024\n\n" \
         "  Year          Age         mx       qx    ax      lx      dx      Lx       Tx     ex\n"


def table_text(years=(1921, 1922), ages=111, q=0.01):
    lines = [HEADER]
    for y in years:
        for a in range(ages):
            tok = "110+" if a == 110 else str(a)
            qx = 1.0 if a == 110 else q
            lines.append(f"  {y}  {tok:>11}  0.010050 {qx:.5f}  0.50  100000  1000  99500  7000000  70.00\n")
    return "".join(lines)


# --- parsing -----------------------------------------------------------------


def test_parse_row_maps_fields():
    text = HEADER + "  1921            0  0.068000 0.06500  0.20  100000    6500   94800  6300000  63.00\n"
    (rec,) = parse_hmd_lifetable(text)
    assert rec.year == 1921 and rec.age == 0
    assert rec.qx == pytest.approx(0.065) and rec.lx == 100000 and rec.dx == 6500


def test_open_age_group_token():
    recs = parse_hmd_lifetable(table_text(years=(1921,)))
    assert recs[-1].age == 110 and recs[-1].qx == 1.0


def test_short_row_names_line():
    text = table_text(years=(1921,)) + "  1922  0  0.1 0.2 0.3\n"
    with pytest.raises(ParseError, match=r"line 115"):
        parse_hmd_lifetable(text)


def test_missing_qx_is_data_gap():
    text = HEADER + "  1921  0  0.068000 .  0.20  100000  6500  94800  6300000  63.00\n"
    with pytest.raises(DataGapError):
        parse_hmd_lifetable(text)


def test_abridged_ages_rejected():
    text = HEADER + "  1921  1-4  0.068000 0.01  0.20  100000  6500  94800  6300000  63.00\n"
    with pytest.raises(ParseError, match="abridged"):
        parse_hmd_lifetable(text)


def test_no_header_rejected():
    with pytest.raises(ParseError):
        parse_hmd_lifetable("  1921  0  0.068 0.065 0.2 100000 6500 94800 6300000 63.0\n")


def test_bytes_and_file_objects_accepted():
    text = table_text(years=(1921,))
    assert len(parse_hmd_lifetable(text.encode())) == 111
    assert len(parse_hmd_lifetable(io.StringIO(text))) == 111


# --- life-table recursion ----------------------------------------------------


def test_rebuild_first_age():
    q = np.full(111, 0.02)
    q[0] = 0.01
    d = rebuild_dx_from_qx(q, 1e5)
    assert d[0] == pytest.approx(1000)
    assert survivors_from_qx(q, 1e5)[1] == pytest.approx(99000)


def test_rebuild_absorbing_first_age():
    q = np.full(111, 0.3)
    q[0] = 1.0
    d = rebuild_dx_from_qx(q, 1e5)
    assert d[0] == 1e5 and np.all(d[1:] == 0)


def test_rebuild_closes_last_age():
    q = np.full(111, 0.05)
    d = rebuild_dx_from_qx(q, 1e5)
    assert d.sum() == pytest.approx(1e5, rel=1e-12)


def test_rebuild_rejects_bad_q():
    with pytest.raises(DomainError):
        rebuild_dx_from_qx([0.1, 1.2, 1.0])


@given(arrays(np.float64, 111, elements=st.floats(0.0, 1.0)))
def test_life_table_identities(q):
    radix = 1e5
    d = rebuild_dx_from_qx(q, radix)
    q = q.copy()
    q[-1] = 1.0
    lx = survivors_from_qx(q, radix)
    assert abs(d.sum() - radix) <= 1e-6 * radix
    assert np.all(np.diff(lx) <= 0)
    np.testing.assert_allclose(d, lx - np.append(lx[1:], 0.0), atol=1e-9 * radix)


@given(arrays(np.float64, 111, elements=st.floats(1e-4, 0.9)))
def test_q_recovered_from_death_distribution(q):
    q = q.copy()
    q[-1] = 1.0
    d = rebuild_dx_from_qx(q) / 1e5
    np.testing.assert_allclose(qx_from_death_composition(d)[0], q, rtol=1e-8, atol=1e-12)


# --- series assembly ---------------------------------------------------------


def test_build_series_shape_and_closure():
    years = range(1921, 2021)
    recs = parse_hmd_lifetable(table_text(years=years))
    s = build_series(recs)
    assert (s.n, s.D) == (100, 111)
    np.testing.assert_allclose(s.values.sum(axis=1), 1.0, atol=1e-12)
    assert s.years[0] == 1921 and s.years[-1] == 2020


def test_missing_cell_names_year_and_age():
    recs = [r for r in parse_hmd_lifetable(table_text()) if not (r.year == 1922 and r.age == 57)]
    with pytest.raises(DataGapError, match=r"year=1922, age=57"):
        build_series(recs)


def test_year_gap_rejected():
    recs = parse_hmd_lifetable(table_text(years=(1921, 1923)))
    with pytest.raises(DataGapError):
        build_series(recs)


def test_raw_dx_keeps_exact_zeros():
    recs = [LifeTableRecord(2000, a, 1.0 if a == 2 else 0.5, dx=[5.0, 0.0, 5.0][a]) for a in range(3)]
    s = build_series(recs, rebuild_from_qx=False, n_ages=3)
    assert s.values[0, 1] == 0.0 and s.zero_cells() == 1


def test_rebuild_has_no_more_zeros_than_raw(synthetic_tables):
    recs = parse_hmd_lifetable(synthetic_tables["female"])
    raw = build_series(recs, rebuild_from_qx=False)
    rebuilt = build_series(recs, rebuild_from_qx=True)
    assert rebuilt.zero_cells() < raw.zero_cells()


def test_series_validation():
    with pytest.raises(FormatError):
        CompositionSeries([2000], [0, 1], [[0.5, 0.6]])
    with pytest.raises(DataGapError):
        CompositionSeries([2000, 2002], [0, 1], [[0.5, 0.5], [0.5, 0.5]])


def test_subset():
    s = build_series(parse_hmd_lifetable(table_text(years=range(1921, 1931))))
    sub = s.subset(slice(2, 5))
    assert list(sub.years) == [1923, 1924, 1925]


# --- CSV ---------------------------------------------------------------------


def test_csv_round_trip(synthetic_series):
    s = synthetic_series["male"]
    back = read_series_csv(write_series_csv(s))
    np.testing.assert_allclose(back.values, s.values, atol=1e-9)
    assert back.radix == pytest.approx(s.radix)
    np.testing.assert_array_equal(back.years, s.years)


def test_csv_to_file_handle(synthetic_series):
    buf = io.StringIO()
    write_series_csv(synthetic_series["male"], buf)
    assert buf.getvalue().startswith("year,age,value\n")


@pytest.mark.parametrize("text", ["", "   \n"])
def test_csv_empty_rejected(text):
    with pytest.raises(FormatError):
        read_series_csv(text)


def test_csv_header_only_lists_columns():
    with pytest.raises(FormatError, match="year,age,value"):
        read_series_csv("year,age,value\n")


def test_csv_wrong_header():
    with pytest.raises(FormatError, match="year,age,value"):
        read_series_csv("yr,age,value\n2000,0,1\n")


def test_csv_inconsistent_grid():
    with pytest.raises(FormatError):
        read_series_csv("year,age,value\n2000,0,1\n2000,1,1\n2001,0,1\n")


def test_csv_duplicate_cell():
    with pytest.raises(FormatError):
        read_series_csv("year,age,value\n2000,0,1\n2000,0,1\n")
