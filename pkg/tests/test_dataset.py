import io
import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abreformat.dataset import (
    RECORD_COLUMNS,
    DataError,
    SignatureSet,
    aggregate_by_signature,
    expand_signatures,
    parse_records,
    sec_label,
    signature_id,
    write_records,
)
from conftest import record

HEADER = ",".join(RECORD_COLUMNS)


def csv_text(*rows):
    return "\n".join([HEADER, *rows]) + "\n"


def test_three_valid_rows_parse():
    text = csv_text(
        "a,EVQ,DIQ,L1,VH_VL,F1,C1,1,10.5,95",
        "b,EVQ,DIQ,L2,VL_VH,F1,C1,0,,",
        "c,QVQ,EIV,L1,VH_VL,F2,C2,,3.2,80",
    )
    recs = parse_records(text)
    assert [r.record_id for r in recs] == ["a", "b", "c"]
    assert recs[1].yield_ng_per_ul is None and recs[1].qc_pass == 0
    assert recs[2].qc_pass is None


def test_invalid_letter_rejected_with_row_and_letter():
    diags = []
    recs = parse_records(csv_text("a,EVQ,DIQ,L1,VH_VL,F1,C1,1,1,95", "b,EBQ,DIQ,L1,VH_VL,F1,C1,1,1,95"),
                         diags)
    assert len(recs) == 1
    assert len(diags) == 1 and diags[0].row == 3 and "B" in diags[0].message


def test_header_only_warns(caplog):
    with caplog.at_level(logging.WARNING):
        assert parse_records(HEADER + "\n") == []
    assert "no records" in caplog.text


def test_missing_column_is_fatal():
    with pytest.raises(DataError):
        parse_records("record_id,vh_seq\nx,EVQ\n")


def test_bad_cells_rejected():
    diags = []
    parse_records(csv_text(
        "a,EVQ,DIQ,L1,SIDEWAYS,F1,C1,1,1,95",
        "b,EVQ,DIQ,L1,VH_VL,F1,C1,2,1,95",
        "c,EVQ,DIQ,L1,VH_VL,F1,C1,1,-1,95",
        "d,EVQ,DIQ,L1,VH_VL,F1,C1,1,1,101",
        "e,EVQ,DIQ,L1,VH_VL,F1,C1,,,",
    ), diags)
    assert [d.row for d in diags] == [2, 3, 4, 5, 6]


def test_write_then_parse_roundtrip():
    recs = [record(0, qc=1, yld=12.25, sec=None), record(1, vh="QVQ", qc=None, yld=3.0, sec=91.5)]
    buf = io.StringIO()
    write_records(recs, buf)
    assert parse_records(buf.getvalue()) == recs


def test_qc_tie_passes():
    s = aggregate_by_signature([record(0, qc=1), record(1, qc=0)])
    assert len(s) == 1
    assert s[0].qc_mean == 0.5 and s[0].qc_label == 1


def test_yield_mean():
    s = aggregate_by_signature([record(0, yld=10.0), record(1, yld=20.0)])
    assert s[0].yield_mean == 15.0


def test_dedup_counts():
    s = aggregate_by_signature([record(0), record(1), record(2, linker="L2")])
    assert len(s) == 2
    assert sorted(x.replicate_count for x in s) == [1, 2]


def test_conflicting_family_is_fatal():
    with pytest.raises(DataError):
        aggregate_by_signature([record(0, family="F1"), record(1, family="F2")])


@pytest.mark.parametrize("purity,label", [(95.0, 1), (90.0, 1), (89.99, 0)])
def test_sec_label(purity, label):
    assert sec_label(purity) == label


def test_sec_label_range():
    with pytest.raises(ValueError):
        sec_label(100.5)


def test_signature_ids_stable_and_distinct():
    a = record(0).sig_key
    b = record(1, orientation="VL_VH").sig_key
    assert signature_id(a) == signature_id(a)
    assert signature_id(a) != signature_id(b)


def test_jsonl_roundtrip():
    s = aggregate_by_signature([record(0), record(1, vh="QVQ", family="F2", qc=0)])
    buf = io.StringIO()
    s.to_jsonl(buf)
    buf.seek(0)
    back = SignatureSet.from_jsonl(buf)
    assert back.signatures == s.signatures
    assert back.family_index == s.family_index


# -- properties -------------------------------------------------------------

records_strategy = st.lists(
    st.builds(
        lambda i, vh, linker, orient, qc, yld: record(
            i, vh=vh, linker=linker, orientation=orient, family=f"F{vh}", qc=qc, yld=yld),
        st.integers(0, 10**6),
        st.sampled_from(["EVQ", "QVQ", "DIQ"]),
        st.sampled_from(["L1", "L2"]),
        st.sampled_from(["VH_VL", "VL_VH"]),
        st.one_of(st.none(), st.integers(0, 1)),
        st.floats(0.1, 500.0),
    ),
    min_size=1,
    max_size=40,
)


@settings(max_examples=100, deadline=None)
@given(records_strategy)
def test_aggregation_invariants(recs):
    s = aggregate_by_signature(recs)
    assert sum(x.replicate_count for x in s) == len(recs)
    keys = [x.sig_key for x in s]
    assert keys == sorted(keys) and len(set(keys)) == len(keys)
    for x in s:
        if x.qc_mean is not None:
            assert 0.0 <= x.qc_mean <= 1.0
            assert x.qc_label == int(x.qc_mean >= 0.5)


@settings(max_examples=100, deadline=None)
@given(records_strategy)
def test_aggregation_idempotent(recs):
    s = aggregate_by_signature(recs)
    again = aggregate_by_signature(expand_signatures(s))
    strip = lambda x: {**x.to_dict(), "replicate_count": None}  # noqa: E731
    assert [strip(x) for x in again] == [strip(x) for x in s]
    assert all(x.replicate_count == 1 for x in again)
