import json
import random

import pytest

from cellwatch.errors import DuplicatePoint, MalformedHeader, MalformedRow, UnknownMetric
from cellwatch.ingest import (
    CdrRecord,
    MetricInfo,
    MetricKind,
    Polarity,
    aggregate_cdr,
    load_catalog,
    parse_cdr,
    parse_metric_csv,
    save_catalog,
    write_cdr_csv,
    write_metric_csv,
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


CDR_HEADER = "cell_id,start_time,duration,dropped,source_hash,dest_hash"


class TestParseCdr:
    def test_header_only_gives_empty_list(self, tmp_path):
        p = write(tmp_path / "cdr.csv", CDR_HEADER + "\n")
        assert parse_cdr(p) == []

    def test_single_row(self, tmp_path):
        p = write(tmp_path / "cdr.csv", CDR_HEADER + "\nc1,1000,30,0,h1,h2\n")
        assert parse_cdr(p) == [CdrRecord("c1", 1000, 30.0, False, "h1", "h2")]

    def test_negative_duration_is_malformed_row_2(self, tmp_path):
        p = write(tmp_path / "cdr.csv", CDR_HEADER + "\nc1,1000,-5,0,h1,h2\n")
        with pytest.raises(MalformedRow) as exc:
            parse_cdr(p)
        assert exc.value.line_no == 2

    def test_bad_boolean_collected_with_line_numbers(self, tmp_path):
        p = write(
            tmp_path / "cdr.csv",
            CDR_HEADER + "\nc1,1000,30,0,h1,h2\nc1,1300,30,yes,h1,h2\nc1,1600,x,0,h1,h2\n",
        )
        with pytest.raises(MalformedRow) as exc:
            parse_cdr(p)
        assert exc.value.line_no == 3
        assert exc.value.all_lines == [3, 4]

    def test_wrong_header_rejected(self, tmp_path):
        p = write(tmp_path / "cdr.csv", "cell,start,dur,drop,src,dst\n")
        with pytest.raises(MalformedHeader):
            parse_cdr(p)

    def test_extra_columns_rejected(self, tmp_path):
        p = write(tmp_path / "cdr.csv", CDR_HEADER + ",billing\n")
        with pytest.raises(MalformedHeader):
            parse_cdr(p)

    def test_order_preserved(self, tmp_path):
        rows = "\n".join(f"c1,{1000 + i},10,0,h{i},g{i}" for i in range(5))
        p = write(tmp_path / "cdr.csv", CDR_HEADER + "\n" + rows + "\n")
        assert [r.start_time for r in parse_cdr(p)] == [1000, 1001, 1002, 1003, 1004]


@pytest.fixture
def catalog():
    return {
        "rtt": MetricInfo(MetricKind.KPI, Polarity.HIGHER_IS_WORSE, 300),
        "load_ms": MetricInfo(MetricKind.KQI, Polarity.HIGHER_IS_WORSE, 300),
    }


class TestParseMetricCsv:
    HEADER = "cell_id,metric_name,window_start,value"

    def test_grid_fill_inserts_missing(self, tmp_path, catalog):
        p = write(
            tmp_path / "m.csv", f"{self.HEADER}\nc1,rtt,0,1.5\nc1,rtt,600,2.5\n"
        )
        (series,) = parse_metric_csv(p, MetricKind.KPI, catalog)
        assert series.points == [(0, 1.5), (300, None), (600, 2.5)]

    def test_empty_value_field_is_missing(self, tmp_path, catalog):
        p = write(tmp_path / "m.csv", f"{self.HEADER}\nc1,rtt,0,\n")
        (series,) = parse_metric_csv(p, MetricKind.KPI, catalog)
        assert series.points == [(0, None)]

    def test_duplicate_point_rejected(self, tmp_path, catalog):
        p = write(tmp_path / "m.csv", f"{self.HEADER}\nc1,rtt,0,1\nc1,rtt,0,2\n")
        with pytest.raises(DuplicatePoint):
            parse_metric_csv(p, MetricKind.KPI, catalog)

    def test_unknown_metric_rejected(self, tmp_path, catalog):
        p = write(tmp_path / "m.csv", f"{self.HEADER}\nc1,mystery,0,1\n")
        with pytest.raises(UnknownMetric):
            parse_metric_csv(p, MetricKind.KPI, catalog)

    def test_kind_mismatch_rejected(self, tmp_path, catalog):
        p = write(tmp_path / "m.csv", f"{self.HEADER}\nc1,load_ms,0,1\n")
        with pytest.raises(MalformedRow):
            parse_metric_csv(p, MetricKind.KPI, catalog)

    def test_misaligned_window_rejected(self, tmp_path, catalog):
        p = write(tmp_path / "m.csv", f"{self.HEADER}\nc1,rtt,150,1\n")
        with pytest.raises(MalformedRow):
            parse_metric_csv(p, MetricKind.KPI, catalog)

    def test_round_trip_exact(self, tmp_path, catalog):
        rng = random.Random(7)
        rows = [f"c{c},rtt,{w * 300},{rng.random() * 100!r}" for c in range(3) for w in range(0, 20, 2)]
        rows.append("c0,rtt,300,")  # explicit missing
        p = write(tmp_path / "m.csv", self.HEADER + "\n" + "\n".join(rows) + "\n")
        series = parse_metric_csv(p, MetricKind.KPI, catalog)
        out = tmp_path / "round.csv"
        write_metric_csv(series, out)
        again = parse_metric_csv(out, MetricKind.KPI, catalog)
        assert again == series
        # and a second serialization is byte-identical
        out2 = tmp_path / "round2.csv"
        write_metric_csv(again, out2)
        assert out.read_bytes() == out2.read_bytes()


class TestAggregateCdr:
    def test_drop_rate_is_fraction_of_attempts(self):
        records = [
            CdrRecord("c1", 10, 30, False, "a", "b"),
            CdrRecord("c1", 20, 30, True, "a", "b"),
            CdrRecord("c1", 290, 30, False, "a", "b"),
        ]
        series = {s.metric_name: s for s in aggregate_cdr(records, 300)}
        assert series["drop_rate"].points == [(0, pytest.approx(1 / 3))]
        assert series["call_attempts"].points == [(0, 3.0)]

    def test_mean_duration(self):
        records = [
            CdrRecord("c1", 10, 10, False, "a", "b"),
            CdrRecord("c1", 20, 30, False, "a", "b"),
        ]
        series = {s.metric_name: s for s in aggregate_cdr(records, 300)}
        assert series["mean_duration"].points == [(0, 20.0)]

    def test_empty_input_gives_empty_list(self):
        assert aggregate_cdr([], 300) == []

    def test_empty_windows_are_zero_attempts_and_missing_rates(self):
        records = [
            CdrRecord("c1", 10, 10, False, "a", "b"),
            CdrRecord("c1", 700, 10, True, "a", "b"),
        ]
        series = {s.metric_name: s for s in aggregate_cdr(records, 300)}
        assert series["call_attempts"].points == [(0, 1.0), (300, 0.0), (600, 1.0)]
        assert series["drop_rate"].points == [(0, 0.0), (300, None), (600, 1.0)]

    def test_permutation_invariant(self):
        rng = random.Random(13)
        records = [
            CdrRecord(f"c{rng.randrange(3)}", rng.randrange(0, 3000), rng.randrange(120), rng.random() < 0.1, "s", "d")
            for _ in range(200)
        ]
        shuffled = records[:]
        rng.shuffle(shuffled)
        assert aggregate_cdr(records, 300) == aggregate_cdr(shuffled, 300)

    def test_attempt_totals_match_record_count(self):
        rng = random.Random(5)
        records = [
            CdrRecord("c1", rng.randrange(0, 6000), 10, False, "s", "d") for _ in range(137)
        ]
        series = {s.metric_name: s for s in aggregate_cdr(records, 300)}
        total = sum(v for _, v in series["call_attempts"].points if v is not None)
        assert total == 137

    def test_no_subscriber_hash_survives(self, tmp_path):
        records = [
            CdrRecord("c1", 10, 10, False, "secret-src-hash", "secret-dst-hash"),
            CdrRecord("c1", 400, 25, True, "other-src", "other-dst"),
        ]
        out = tmp_path / "agg.csv"
        write_metric_csv(aggregate_cdr(records, 300), out)
        text = out.read_text()
        for r in records:
            assert r.source_hash not in text
            assert r.dest_hash not in text


def test_catalog_round_trip(tmp_path):
    catalog = {
        "rtt": MetricInfo(MetricKind.KPI, Polarity.HIGHER_IS_WORSE, 300, (0.0, 100.0)),
        "load": MetricInfo(MetricKind.KQI, Polarity.LOWER_IS_WORSE, 600),
    }
    p = tmp_path / "catalog.json"
    save_catalog(catalog, p)
    assert load_catalog(p) == catalog
    doc = json.loads(p.read_text())
    assert doc["rtt"]["window_len_seconds"] == 300
