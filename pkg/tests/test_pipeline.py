"""Tests for smartsense/data: parsing, binning, windowing and splitting."""

import pytest

from smartsense.common import DataError, ParseError
from smartsense.data import (
    ActionEvent,
    Instance,
    Session,
    Vocabulary,
    bin_timestamp,
    build_instances,
    dataset_statistics,
    load_manifest,
    make_windows,
    parse_log_csv,
    parse_routines,
    split_instances,
)

# 2021-11-22 00:00 UTC is a Monday
MONDAY = 1637539200
HOUR = 3600

LOG = """session_id,timestamp,device,control
s1,{t2},lamp,off
s1,{t0},lamp,on
s1,{t1},tv,on
s2,{t0},door,lock
""".format(t0=MONDAY + 7 * HOUR, t1=MONDAY + 8 * HOUR, t2=MONDAY + 9 * HOUR)


def _session(n: int) -> Session:
    events = [(t, ActionEvent(t % 3, t, t % 7, t % 8)) for t in range(n)]
    return Session("s", events)


class TestBinTimestamp:
    """Tests for (day of week, 3-hour bin) mapping."""

    @pytest.mark.parametrize(
        "offset_hours,tz_minutes,expected",
        [
            (0, 0, (0, 0)),
            (2, 0, (0, 0)),
            (3, 0, (0, 1)),
            (23, 0, (0, 7)),
            (24 + 12, 0, (1, 4)),
            (6 * 24 + 21, 0, (6, 7)),
            (0, -60, (6, 7)),
            (22, 120, (1, 0)),
        ],
    )
    def test_bins(self, offset_hours, tz_minutes, expected):
        assert bin_timestamp(MONDAY + offset_hours * HOUR, tz_minutes) == expected

    @pytest.mark.parametrize("timestamp", [MONDAY * 1000, -(10**15), 10**18, -1])
    def test_total_over_integers(self, timestamp):
        """Millisecond epochs and far-out values still land in a valid bin."""
        dow, hour_bin = bin_timestamp(timestamp, 540)
        assert 0 <= dow < 7
        assert 0 <= hour_bin < 8

    def test_before_epoch(self):
        # 1969-12-31 23:00 UTC was a Wednesday
        assert bin_timestamp(-HOUR) == (2, 7)


class TestParseLog:
    """Tests for parse_log_csv."""

    def test_sessions_sorted_by_time(self, write_csv):
        """Events sort by timestamp within a session; first-appearance session order."""
        parsed = parse_log_csv(write_csv("log.csv", LOG))

        assert [s.session_id for s in parsed.sessions] == ["s1", "s2"]
        vocab = parsed.vocabulary
        labels = [vocab.control_label(e.control_id) for _, e in parsed.sessions[0].events]
        assert labels == ["lamp:on", "tv:on", "lamp:off"]
        assert parsed.skipped_rows == 0

    def test_fresh_vocabulary_sorted(self, write_csv):
        """Devices and controls are indexed in sorted name order."""
        vocab = parse_log_csv(write_csv("log.csv", LOG)).vocabulary

        assert vocab.device_names == ["door", "lamp", "tv"]
        assert [vocab.control_label(i) for i in range(vocab.n_controls)] == [
            "door:lock",
            "lamp:off",
            "lamp:on",
            "tv:on",
        ]
        assert vocab.device_of(vocab.control_id("tv", "on")) == vocab.device_id("tv")

    def test_context_binning(self, write_csv):
        parsed = parse_log_csv(write_csv("log.csv", LOG))
        first = parsed.sessions[0].events[0][1]
        assert (first.dow, first.hour_bin) == (0, 2)

    def test_frozen_vocabulary_skips_unknown(self, write_csv):
        vocab = Vocabulary()
        vocab.extend([("lamp", "on"), ("lamp", "off")])
        vocab.freeze()

        parsed = parse_log_csv(write_csv("log.csv", LOG), vocab)

        assert parsed.skipped_rows == 2
        assert [s.session_id for s in parsed.sessions] == ["s1"]
        assert len(parsed.sessions[0]) == 2
        assert vocab.n_controls == 2

    def test_open_vocabulary_extended(self, write_csv):
        vocab = Vocabulary()
        vocab.add_control("zone", "arm")
        parsed = parse_log_csv(write_csv("log.csv", LOG), vocab)
        assert parsed.vocabulary is vocab
        assert vocab.control_id("zone", "arm") == 0
        assert vocab.n_controls == 5

    def test_bad_timestamp_names_line(self, write_csv):
        path = write_csv(
            "log.csv", "session_id,timestamp,device,control\ns1,100,lamp,on\ns1,soon,lamp,off\n"
        )
        with pytest.raises(ParseError) as exc_info:
            parse_log_csv(path)
        assert exc_info.value.line == 3

    def test_millisecond_timestamps(self, write_csv):
        path = write_csv(
            "log.csv",
            "session_id,timestamp,device,control\n"
            f"s1,{MONDAY * 1000},lamp,on\n"
            f"s1,{MONDAY * 1000 + 5000},lamp,off\n",
        )
        parsed = parse_log_csv(path)
        assert len(parsed.sessions[0]) == 2
        for _, event in parsed.sessions[0].events:
            assert 0 <= event.dow < 7
            assert 0 <= event.hour_bin < 8

    def test_wrong_field_count(self, write_csv):
        path = write_csv("log.csv", "session_id,timestamp,device,control\ns1,100,lamp\n")
        with pytest.raises(ParseError, match="expected 4 fields"):
            parse_log_csv(path)

    def test_wrong_header(self, write_csv):
        path = write_csv("log.csv", "session,time,device,control\ns1,100,lamp,on\n")
        with pytest.raises(ParseError, match="expected header"):
            parse_log_csv(path)

    def test_blank_lines_and_whitespace(self, write_csv):
        path = write_csv(
            "log.csv",
            "session_id, timestamp ,device,control\n\n s1 , 100 , lamp , on \n",
        )
        parsed = parse_log_csv(path)
        assert parsed.vocabulary.control_id("lamp", "on") == 0


class TestMakeWindows:
    """Tests for stride-1 windowing."""

    def test_window_count_and_alignment(self):
        """L events give L-W+1 windows; the target is the last event of each."""
        session = _session(12)
        instances = make_windows(session, 10)

        assert len(instances) == 3
        for start, instance in enumerate(instances):
            assert len(instance.history) == 9
            assert instance.history[0].control_id == start
            assert instance.target_control_id == start + 9
            assert instance.target_dow == (start + 9) % 7
            assert instance.target_hour_bin == (start + 9) % 8

    def test_short_session_yields_nothing(self):
        assert make_windows(_session(9), 10) == []

    def test_exact_length(self):
        assert len(make_windows(_session(10), 10)) == 1

    def test_invalid_window(self):
        with pytest.raises(DataError):
            make_windows(_session(5), 1)

    def test_build_instances_concatenates(self):
        assert len(build_instances([_session(12), _session(4), _session(10)], 10)) == 4


class TestSplitInstances:
    """Tests for the seeded 7:1:2 split."""

    def _instances(self, n):
        event = ActionEvent(0, 0, 0, 0)
        return [Instance((event,), 0, 0, i) for i in range(n)]

    def test_sizes_and_partition(self):
        instances = self._instances(100)
        train, val, test = split_instances(instances, seed=3)

        assert (len(train), len(val), len(test)) == (70, 10, 20)
        labels = sorted(i.target_control_id for i in train + val + test)
        assert labels == list(range(100))

    def test_deterministic(self):
        instances = self._instances(50)
        assert split_instances(instances, 5) == split_instances(instances, 5)
        assert split_instances(instances, 5) != split_instances(instances, 6)

    def test_floor_sizes(self):
        train, val, test = split_instances(self._instances(9), 0)
        assert (len(train), len(val), len(test)) == (6, 1, 2)

    @pytest.mark.parametrize("n", [90, 170, 180, 350, 4999])
    def test_exact_cut_points(self, n):
        """Cuts are floor(7n/10) and floor(8n/10) computed exactly."""
        train, val, test = split_instances(self._instances(n), 0)
        assert len(train) == 7 * n // 10
        assert len(train) + len(val) == 8 * n // 10
        assert len(train) + len(val) + len(test) == n

    def test_ninety_instances(self):
        train, val, test = split_instances(self._instances(90), 1)
        assert (len(train), len(val), len(test)) == (63, 9, 18)



class TestParseRoutines:
    """Tests for routine parsing through a frozen vocabulary."""

    def _vocab(self):
        vocab = Vocabulary()
        vocab.extend([("lamp", "on"), ("tv", "on"), ("door", "lock")])
        return vocab.freeze()

    def test_maps_devices_in_order(self, write_csv):
        path = write_csv("routines.csv", "routine_id,devices\nevening,tv|lamp|door\n")
        routines = parse_routines(path, self._vocab())
        vocab = self._vocab()
        assert len(routines) == 1
        assert routines[0].routine_id == "evening"
        assert routines[0].devices == tuple(
            vocab.device_id(name) for name in ("tv", "lamp", "door")
        )

    def test_unknown_devices_dropped(self, write_csv):
        path = write_csv(
            "routines.csv",
            "routine_id,devices\nr1,lamp|oven|tv\nr2,lamp|oven\nr3,heater|oven\n",
        )
        routines = parse_routines(path, self._vocab())
        assert [r.routine_id for r in routines] == ["r1"]
        assert len(routines[0]) == 2

    def test_missing_routine_id(self, write_csv):
        path = write_csv("routines.csv", "routine_id,devices\n,lamp|tv\n")
        with pytest.raises(ParseError, match="routine_id"):
            parse_routines(path, self._vocab())


class TestManifestAndStatistics:
    """Tests for load_manifest and dataset_statistics."""

    def test_manifest(self, write_csv):
        path = write_csv("manifest.json", '{"tz_offset_minutes": 540, "window_length": 10}')
        manifest = load_manifest(path)
        assert manifest.tz_offset_minutes == 540
        assert manifest.window_length == 10

    @pytest.mark.parametrize(
        "text",
        ['{"window_length": 10}', "not json", '{"tz_offset_minutes": 0, "window_length": 1}'],
    )
    def test_bad_manifest(self, write_csv, text):
        with pytest.raises(DataError):
            load_manifest(write_csv("manifest.json", text))

    def test_statistics(self, write_csv):
        parsed = parse_log_csv(write_csv("log.csv", LOG))
        instances = build_instances(parsed.sessions, 2)
        stats = dataset_statistics(parsed.sessions, instances, parsed.vocabulary, [], 1)
        assert stats == {
            "sessions": 2,
            "events": 4,
            "instances": 2,
            "devices": 3,
            "device_controls": 4,
            "routines": 0,
            "routine_devices": 0,
            "skipped_rows": 1,
        }
