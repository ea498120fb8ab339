import pytest

from wildtraj.core.errors import CorruptInputError, SchemaError
from wildtraj.core.ingest import (
    ColumnMap,
    dedup_same_timestamp,
    group_tracks,
    ingest_files,
    parse_fixes,
    read_fixes_csv,
    write_fixes_csv,
    write_rejections,
)
from wildtraj.core.types import iso_utc

from conftest import make_track

HEADER = "timestamp,location-lat,location-long,individual-local-identifier\n"


def test_parse_movebank_row():
    result = parse_fixes(HEADER + "2020-01-01 00:00:00, -1.5, 30.1, elephA\n",
                         study_id="S1", species="elephant")
    assert len(result.records) == 1
    fix = result.records[0]
    assert fix.animal_id == "elephA"
    assert iso_utc(fix.timestamp) == "2020-01-01T00:00:00Z"
    assert (fix.lat, fix.lon) == (-1.5, 30.1)
    assert (fix.study_id, fix.species) == ("S1", "elephant")


def test_out_of_range_latitude_is_rejected_and_reported():
    text = HEADER + "2020-01-01 00:00:00,95.0,30.1,a\n" + "".join(
        f"2020-01-01 0{h}:00:00,-1.5,30.1,a\n" for h in range(1, 4))
    result = parse_fixes(text, study_id="S1", species="zebra", source="f.csv")
    assert result.rejected == 1
    assert len(result.records) == 3
    assert result.report_lines() == ["f.csv:2: latitude out of range | 2020-01-01 00:00:00,95.0,30.1,a"]


def test_missing_latitude_column_is_fatal():
    with pytest.raises(SchemaError):
        parse_fixes("timestamp,location-long,individual-local-identifier\n"
                    "2020-01-01 00:00:00,30.1,a\n", study_id="S1", species="x")


@pytest.mark.parametrize("text", ["", HEADER])
def test_empty_input_is_fatal(text):
    with pytest.raises(SchemaError):
        parse_fixes(text, study_id="S1", species="x")


def test_majority_rejected_is_corrupt():
    text = HEADER + "garbage,0,0,a\n" + "2020-01-01 00:00:00,0,200,a\n" + "2020-01-01 01:00:00,0,1,a\n"
    with pytest.raises(CorruptInputError) as info:
        parse_fixes(text, study_id="S1", species="x")
    assert info.value.exit_code == 2
    assert (info.value.rejected, info.value.total) == (2, 3)


def test_species_is_never_guessed():
    with pytest.raises(SchemaError):
        parse_fixes(HEADER + "2020-01-01 00:00:00,0,0,a\n", study_id="S1")
    result = parse_fixes(HEADER + "2020-01-01 00:00:00,0,0,a\n", study_id="S1",
                         species_map={"a": "lion"})
    assert result.records[0].species == "lion"


def test_timestamps_offsets_and_fractions():
    text = HEADER + ("2020-01-01T03:00:00+03:00,0,0,a\n"
                     "2020-01-01T01:00:00.750Z,0,0,a\n"
                     "2020-01-01 05:00:00,0,0,a\n")
    result = parse_fixes(text, study_id="S1", species="x", tz_offset="+02:00")
    stamps = [iso_utc(r.timestamp) for r in result.records]
    assert stamps == ["2020-01-01T00:00:00Z", "2020-01-01T01:00:00Z", "2020-01-01T03:00:00Z"]


def test_antimeridian_longitude_normalized():
    result = parse_fixes(HEADER + "2020-01-01 00:00:00,0,-180,a\n", study_id="S1", species="x")
    assert result.records[0].lon == 180.0


def test_custom_column_map():
    cmap = ColumnMap(timestamp="t", lat="y", lon="x", animal_id="id", study_id="st",
                     species="sp")
    result = parse_fixes("t,y,x,id,st,sp\n2020-01-01 00:00:00,1,2,a,S9,gnu\n", column_map=cmap)
    assert (result.records[0].study_id, result.records[0].species) == ("S9", "gnu")


class TestDedup:
    def test_two_fixes_averaged(self):
        track = make_track([0, 0], lats=[0.0, 0.0], lons=[0.0, 2.0])
        out = dedup_same_timestamp(track)
        assert len(out.fixes) == 1
        assert (out.fixes[0].lat, out.fixes[0].lon) == (0.0, 1.0)

    def test_three_fixes_averaged(self):
        out = dedup_same_timestamp(make_track([5, 5, 5], lats=[1.0, 2.0, 3.0]))
        assert out.fixes[0].lat == 2.0

    def test_identity_without_duplicates(self):
        track = make_track([0, 60, 120])
        assert dedup_same_timestamp(track).fixes == track.fixes

    def test_idempotent_and_strictly_increasing(self):
        track = make_track([0, 0, 10, 20, 20, 20, 30], lats=[1, 2, 3, 4, 5, 6, 7])
        once = dedup_same_timestamp(track)
        assert once.is_strictly_increasing()
        assert dedup_same_timestamp(once).fixes == once.fixes

    def test_empty_track(self):
        assert dedup_same_timestamp(make_track([])).fixes == []


def test_group_tracks_sorts_and_rejects_conflicts():
    records = make_track([30, 10, 20]).fixes + make_track([5], animal_id="b1").fixes
    tracks = group_tracks(records)
    assert [t.animal_id for t in tracks] == ["a1", "b1"]
    assert [f.timestamp for f in tracks[0].fixes] == [10, 20, 30]
    clash = make_track([40], species="zebra").fixes
    with pytest.raises(SchemaError):
        group_tracks(records + clash)


def test_files_with_sidecar_round_trip(tmp_path):
    (tmp_path / "a.csv").write_text(HEADER + "2020-01-01 00:00:00,1.0,2.0,a\n"
                                    "2020-01-01 01:00:00,1.5,2.5,a\n", encoding="utf-8")
    (tmp_path / "b.csv").write_text(HEADER + "2020-01-01 00:00:00,3.0,4.0,b\n"
                                    "2020-01-01 01:00:00,91,4.0,b\n"
                                    "2020-01-01 02:00:00,3.0,4.5,b\n", encoding="utf-8")
    (tmp_path / "sidecar.csv").write_text("file,study_id,species\na.csv,S1,elephant\n"
                                          "b.csv,S2,zebra\n", encoding="utf-8")
    results = ingest_files([tmp_path / "a.csv", tmp_path / "b.csv"],
                           sidecar=tmp_path / "sidecar.csv")
    records = [r for res in results for r in res.records]
    assert {(r.animal_id, r.study_id, r.species) for r in records} == {
        ("a", "S1", "elephant"), ("b", "S2", "zebra")}

    write_fixes_csv(records, tmp_path / "fixes.csv")
    assert read_fixes_csv(tmp_path / "fixes.csv") == records
    report = write_rejections(results, tmp_path / "rejections.txt").read_text(encoding="utf-8")
    assert report.startswith("b.csv:3: latitude out of range")
