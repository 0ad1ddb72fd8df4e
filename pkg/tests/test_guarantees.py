import io
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from keysec import guarantees as gu


def test_markov_worked_example():
    g = gu.markov_individualize(2.0 ** -20)
    assert g.bound == 2.0 ** -10
    assert g.confidence == 1 - 2.0 ** -10
    assert g.to_json()["log2_bound"] == -10.0


@given(st.floats(1e-300, 1 - 1e-12))
def test_markov_halves_the_exponent(eps):
    g = gu.markov_individualize(eps)
    assert math.log2(g.bound) == pytest.approx(0.5 * math.log2(eps), abs=1e-9)
    assert g.confidence == 1 - g.bound


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 2.0])
def test_markov_domain(bad):
    with pytest.raises(ValueError):
        gu.markov_individualize(bad)


def test_subset_bound_and_vacuity():
    b = gu.delta_subset_bound(0.125, 4)
    assert b.value == 0.1875 and not b.vacuous
    v = gu.delta_subset_bound(0.6, 1)
    assert v.value == 1.0 and v.vacuous


def test_criterion_validation():
    with pytest.raises(ValueError):
        gu.CriterionSpec("d", 0.1, 8)
    with pytest.raises(ValueError):
        gu.CriterionSpec("p1", 1.5, 8)
    with pytest.raises(ValueError):
        gu.CriterionSpec("p1", 0.1, 8, m=9)


def test_table_cells_values():
    rows = gu.table1_report(gu.CriterionSpec("delta_E", 2.0 ** -10, 16, False, 4)).rows
    assert rows[0].value == 2.0 ** -10 + 2.0 ** -16
    assert rows[1].value == 2.0 ** -10 + 2.0 ** -4
    assert rows[2].formula == "f ~ 0" and rows[2].value == 0.0
    qm_rows = gu.table1_report(gu.CriterionSpec("I_E", 2.0 ** -10, 16, True, 4)).rows
    assert qm_rows[-1].value == pytest.approx(10.0)
    assert qm_rows[1].value == pytest.approx(4 * 2.0 ** -10)


def test_information_whole_key_row_is_attained():
    row = gu.table1_report(gu.CriterionSpec("I_E", 2.0 ** -3, 64)).rows[0]
    assert row.value == 0.125
    assert "I_E/n" in row.caveat


def test_unknown_cell_kept_open():
    rep = gu.table1_report(gu.CriterionSpec("delta_E", 0.01, 8, True))
    last = rep.rows[-1]
    assert last.formula == "f ~ ?" and last.value is None and last.provenance == gu.PAPER
    assert "-" in rep.to_table().splitlines()[-1]


def test_csv_has_fixed_columns_and_17_digits():
    rep = gu.table1_report(gu.CriterionSpec("delta_E", 0.1, 8, False, 3))
    buf = io.StringIO()
    gu.write_csv(rep.csv_rows(), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "criterion,epsilon,n,metric,value,provenance"
    assert lines[1].startswith("delta_E,0.10000000000000001,8,raw:whole key,")
    assert float(lines[1].split(",")[4]) == 0.1 + 2.0 ** -8


def test_benchmark_compares_in_log_space():
    rep = gu.benchmark_vs_conventional(gu.CriterionSpec("delta_E", 2.0 ** -10, 1000), width=10, m=4,
                                       rate=1000.0, l=10)
    whole = rep.rows[0]
    assert whole["conventional"] == 2.0 ** -10
    assert whole["better"] == "tie"  # 2^-10 + 2^-1000 equals 2^-10 in double precision
    assert rep.rows[1]["better"] == "conventional"  # 2^-4 against 2^-10 + 2^-4
    assert rep.kpa["recovered_unique"] and rep.kpa["conventional_provenance"] == gu.COMPUTED
    assert rep.rate["r_prime"] == pytest.approx(10.0)


def test_benchmark_tie_and_winner():
    assert gu._compare(2.0 ** -10, 2.0 ** -10) == "tie"
    assert gu._compare(2.0 ** -20, 2.0 ** -10) == "conventional"
    assert gu._compare(2.0 ** -10, 2.0 ** -20) == "qkd"


def test_pa_rate_reduction():
    assert gu.pa_rate_reduction(1e6, 10, 1000) == pytest.approx(1e4)
