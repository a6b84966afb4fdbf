import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from congruent import data
from congruent.data import CurveRecord, GenerateOptions
from congruent.errors import ConfigurationError, DataError, SchemaError


def test_generate_small():
    recs = list(data.generate_records(10))
    assert [r.D for r in recs] == [1, 2, 3, 5, 6, 7, 10]
    assert [r.s2 for r in recs] == [0, 0, 0, 1, 1, 1, 0]
    assert recs[1].s2_method == "oracle" and recs[0].s2_method == "matrix"
    assert recs[3].status == "CONGRUENT_CERTIFIED"


def test_make_record_rejects_non_squarefree():
    with pytest.raises(DataError):
        data.make_record(12)


finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=100, deadline=None)
@given(finite, finite, st.one_of(st.none(), st.integers(0, 5)), st.booleans())
def test_round_trip_exact(tmp_path_factory, omega, l1, rank, odd):
    rec = CurveRecord(
        7, 7, 7, 7, 1, 1, "matrix", "UNKNOWN", mw_rank=rank, omega_period=omega, l1=l1, l_bsd_odd=odd, tamagawa=8
    )
    path = tmp_path_factory.mktemp("rt") / "r.csv"
    data.save_records([rec], str(path), preamble=["run 1"])
    (back,) = data.load_records(str(path))
    assert back == rec


def test_format_value():
    assert data.format_value(0.1) == "0.10000000000000001"
    assert data.format_value(None) == "" and data.format_value(True) == "true"
    assert math.isnan(data.parse_value("nan", float))


def test_load_requires_columns(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("D,s2\r\n1,0\r\n")
    with pytest.raises(SchemaError):
        data.load_records(str(p))
    assert data.load_records(str(p), required=("D",))[0].residue8 == 1


def test_checkpoint_resume_identical(tmp_path):
    whole = tmp_path / "whole.csv"
    part = tmp_path / "part.csv"
    opts = GenerateOptions(chunk_size=150, search_height=50)
    n = data.generate_to_csv(1000, str(whole), opts)
    with pytest.raises(data.BudgetExceeded) as exc:
        data.generate_to_csv(1000, str(part), GenerateOptions(chunk_size=150, search_height=50, time_budget=0.0))
    assert exc.value.resume_token["written"] == 150
    assert data.generate_to_csv(1000, str(part), opts) == n
    assert part.read_bytes() == whole.read_bytes()
    assert not (tmp_path / "part.csv.ckpt").exists()


def test_parallel_matches_serial(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    data.generate_to_csv(600, str(a), GenerateOptions(chunk_size=100, search_height=50))
    data.generate_to_csv(600, str(b), GenerateOptions(chunk_size=100, search_height=50, workers=2))
    assert a.read_bytes() == b.read_bytes()


def test_checkpoint_mismatch(tmp_path):
    p = tmp_path / "c.csv"
    with pytest.raises(data.BudgetExceeded):
        data.generate_to_csv(800, str(p), GenerateOptions(chunk_size=100, time_budget=0.0))
    with pytest.raises(ConfigurationError):
        data.generate_to_csv(900, str(p))


def _write(tmp_path, text, name="in.csv"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_ingest_sentinel_and_duplicates(tmp_path):
    path = _write(tmp_path, "D,rank\n5,1\n34,-1\n6,1\n6,0\n")
    res = data.ingest_csv(path)
    assert res.values[34]["mw_rank"] is None
    assert res.values[6]["mw_rank"] == 0 and res.duplicates == 1


def test_ingest_malformed_rows(tmp_path):
    rows = "".join(f"{D},0\n" for D in range(1, 2001)) + "x,1\n"
    res = data.ingest_csv(_write(tmp_path, "D,rank\n" + rows))
    assert len(res.errors) == 1 and res.rows == 2001
    with pytest.raises(DataError):
        data.ingest_csv(_write(tmp_path, "D,rank\n1,0\nx,1\n", "bad.csv"))


def test_ingest_schema_text(tmp_path):
    schema = data.IngestSchema.parse("D n int\nsel3_dim sel3 int\nregulator reg float nan\n# comment\n")
    path = _write(tmp_path, "n,sel3,reg\n5,1,2.5\n7,0,nan\n")
    res = data.ingest_csv(path, schema)
    assert res.values[5] == {"sel3_dim": 1, "regulator": 2.5}
    assert res.values[7]["regulator"] is None
    with pytest.raises(SchemaError):
        data.IngestSchema.parse("mw_rank rank int\n")
    with pytest.raises(SchemaError):
        data.ingest_csv(path, data.DEFAULT_SCHEMA)


def test_merge_and_validate(tmp_path):
    recs = list(data.generate_records(10))
    clean = data.merge_and_validate(recs, data.ingest_csv(_write(tmp_path, "D,rank\n5,1\n6,1\n1,0\n")))
    assert clean.report.ok and clean.overlap == 3
    bad = data.merge_and_validate(recs, data.ingest_csv(_write(tmp_path, "D,rank\n5,2\n7,0\n", "b.csv")))
    assert bad.report.rank_bound == [5] and bad.report.sha_odd == [7]
    assert bad.report.to_dict()["counts"]["rank_bound"] == 1
    with pytest.raises(ConfigurationError):
        data.merge_and_validate(recs, data.ingest_csv(_write(tmp_path, "D,rank\n9999,1\n", "c.csv")))


def test_validation_flags_parity_and_residue():
    r = CurveRecord(5, 5, 5, 5, 1, 2, "matrix", None)
    rep = data.validate_records([r, CurveRecord(4, 4, 4, 4, 1, 0, "oracle", None)])
    assert rep.parity == [5] and rep.bad_residue == [4] and rep.not_squarefree == [4]
