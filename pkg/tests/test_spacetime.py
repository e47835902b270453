import numpy as np
import pytest

from relzk.errors import ConfigurationError, MalformedTranscriptError
from relzk.protocol import SessionConfig
from relzk.spacetime import (
    LONG_DISTANCE,
    SHORT_DISTANCE,
    NoSignallingAuditor,
    SimulatedTimeline,
    SyncModel,
    TimedTranscript,
    audit_no_signalling,
    audit_records,
    format_spacetime_config,
    light_travel_ns,
    load_spacetime_config,
    min_separation_m,
    parse_spacetime_values,
    schedule_events,
    simulate_timed_session,
    timed_transcript_from_events,
)
from relzk.transcript import MemoryTranscript


class TestGeometry:
    def test_light_travel(self):
        assert light_travel_ns(60) == pytest.approx(200.14, abs=0.01)
        assert light_travel_ns(390) == pytest.approx(1300.9, abs=0.1)

    def test_min_separation(self):
        assert min_separation_m(192) == pytest.approx(57.56, abs=0.01)
        assert min_separation_m(840, 174) == pytest.approx(303.99, abs=0.01)

    def test_negative_inputs(self):
        with pytest.raises(ConfigurationError):
            light_travel_ns(-1)
        with pytest.raises(ConfigurationError):
            min_separation_m(-5)

    def test_presets(self):
        assert SHORT_DISTANCE.exchange_ns == 192
        assert SHORT_DISTANCE.sync_slack_ns == 0
        assert LONG_DISTANCE.sync_model == SyncModel.GPS
        assert LONG_DISTANCE.sync_slack_ns == 174
        assert SHORT_DISTANCE.period_ns == pytest.approx(333.33, abs=0.01)

    def test_invalid_config(self):
        with pytest.raises(ConfigurationError):
            SHORT_DISTANCE.with_separation(0)


class TestAudit:
    def test_short_distance_margin(self):
        stamps = np.array([[440, 632, 440, 632]])
        report = audit_no_signalling(TimedTranscript(np.array([0]), stamps), SHORT_DISTANCE)
        assert report.passed
        assert report.worst_margin_ns == pytest.approx(8.14, abs=0.01)

    def test_short_distance_too_close(self):
        stamps = np.array([[440, 632, 440, 632]])
        report = audit_no_signalling(TimedTranscript(np.array([3]), stamps), SHORT_DISTANCE.with_separation(57))
        assert not report.passed
        assert {(v.round, v.side) for v in report.violations} == {(3, "left"), (3, "right")}

    def test_long_distance_margin(self):
        stamps = np.array([[0, 840, 0, 840]])
        report = audit_no_signalling(TimedTranscript(np.array([0]), stamps), LONG_DISTANCE)
        assert report.worst_margin_ns == pytest.approx(286.9, abs=0.1)

    def test_empty_audit(self):
        report = NoSignallingAuditor(SHORT_DISTANCE).report()
        assert report.passed
        assert report.to_lines() == ["summary rounds=0 violations=0 worst_margin_ns=none"]

    def test_stamps_out_of_order(self):
        with pytest.raises(MalformedTranscriptError):
            TimedTranscript(np.array([0]), np.array([[500, 400, 440, 632]]))

    def test_row_count_mismatch(self):
        with pytest.raises(MalformedTranscriptError):
            TimedTranscript(np.array([0, 1]), np.array([[440, 632, 440, 632]]))


class TestTimedSession:
    def test_short_distance_session(self, demo):
        g, c = demo
        timed = simulate_timed_session(SHORT_DISTANCE, SessionConfig(g, c, seed=1, rounds=3000))
        assert timed.session.failures == 0
        assert timed.audit.passed
        assert timed.audit.rounds == 3000
        assert timed.true_violations == 0
        assert timed.worst_true_margin_ns > 0
        assert timed.simulated_duration_ns == 1_000_000

    def test_too_close_is_flagged(self, demo):
        g, c = demo
        timed = simulate_timed_session(SHORT_DISTANCE.with_separation(57), SessionConfig(g, c, seed=1, rounds=500))
        assert timed.session.failures == 0
        assert len(timed.audit.violations) == 1000

    def test_long_distance_session(self, demo):
        g, c = demo
        timed = simulate_timed_session(LONG_DISTANCE, SessionConfig(g, c, seed=2, rounds=3000))
        assert timed.audit.passed
        assert timed.true_violations == 0
        assert timed.audit.worst_margin_ns == pytest.approx(286.9, abs=0.1)

    def test_incremental_audit_matches_one_shot(self, demo):
        g, c = demo
        sink = MemoryTranscript()
        cfg = SHORT_DISTANCE.with_separation(57)
        simulate_timed_session(cfg, SessionConfig(g, c, seed=5, rounds=700), transcript_sink=sink)
        chunked = audit_records(sink.records(), cfg, chunk=64)
        whole = audit_no_signalling(TimedTranscript.from_blocks(sink.blocks), cfg)
        assert chunked.to_lines() == whole.to_lines()

    @pytest.mark.parametrize("cfg", [SHORT_DISTANCE, LONG_DISTANCE])
    def test_wider_separation_never_adds_violations(self, cfg):
        rng = np.random.default_rng(12)
        emit = rng.integers(0, 400, size=(2000, 2))
        exchange = rng.integers(100, 1000, size=(2000, 2))
        stamps = np.column_stack([emit[:, 0], emit[:, 0] + exchange[:, 0], emit[:, 1], emit[:, 1] + exchange[:, 1]])
        tt = TimedTranscript(np.arange(2000), stamps)
        previous, previous_margin = None, None
        for separation in [1, 30, 57, 57.56, 60, 120, 304, 390, 1000]:
            report = audit_no_signalling(tt, cfg.with_separation(separation))
            flagged = {(v.round, v.side) for v in report.violations}
            if previous is not None:
                assert flagged <= previous
                assert report.worst_margin_ns >= previous_margin
            previous, previous_margin = flagged, report.worst_margin_ns


class TestEventQueue:
    @pytest.mark.parametrize("cfg", [SHORT_DISTANCE, LONG_DISTANCE])
    def test_events_rebuild_the_timeline(self, cfg):
        events = schedule_events(cfg, 10, 50)
        times = [e.time_ns for e in events]
        assert times == sorted(times)
        assert len(events) == 200

        rebuilt = timed_transcript_from_events(events)
        expected = np.column_stack(SimulatedTimeline(cfg, 0).stamps(10, 50))
        assert rebuilt.rounds.tolist() == list(range(10, 60))
        assert np.array_equal(rebuilt.stamps, expected)

    def test_timeline_reads_the_queue(self, monkeypatch):
        import relzk.spacetime as spacetime

        calls = []
        original = spacetime.schedule_events

        def recording(cfg, first_round, count):
            calls.append((first_round, count))
            return original(cfg, first_round, count)

        monkeypatch.setattr(spacetime, "schedule_events", recording)
        emit_l, recv_l, emit_r, recv_r = SimulatedTimeline(SHORT_DISTANCE, 0).stamps(3, 4)
        assert calls == [(3, 4)]
        assert np.all(recv_l - emit_l == 192)
        assert np.all(recv_r - emit_r == 192)

    def test_empty_block(self):
        columns = SimulatedTimeline(SHORT_DISTANCE, 0).stamps(0, 0)
        assert [c.size for c in columns] == [0, 0, 0, 0]

    def test_incomplete_events(self):
        events = [e for e in schedule_events(SHORT_DISTANCE, 0, 2) if not (e.round == 1 and e.kind == "recv")]
        with pytest.raises(MalformedTranscriptError, match="round 1"):
            timed_transcript_from_events(events)


class TestConfigFiles:
    def test_overlay_on_preset(self):
        cfg = parse_spacetime_values({"preset": "long", "separation_m": "400"})
        assert cfg.separation_m == 400
        assert cfg.sync_model == SyncModel.GPS
        assert cfg.exchange_ns == 840

    def test_sync_model_case(self):
        assert parse_spacetime_values({"sync_model": "GPS"}).sync_model == SyncModel.GPS

    @pytest.mark.parametrize(
        "values",
        [{"distance": "60"}, {"separation_m": "sixty"}, {"sync_model": "atomic"}, {"preset": "orbit"}],
    )
    def test_bad_values(self, values):
        with pytest.raises(ConfigurationError):
            parse_spacetime_values(values)

    def test_load_written_config(self, tmp_path):
        path = tmp_path / "lab.env"
        path.write_text(format_spacetime_config(LONG_DISTANCE))
        assert load_spacetime_config(path) == LONG_DISTANCE

    def test_default_and_missing(self, tmp_path):
        assert load_spacetime_config(None) == SHORT_DISTANCE
        with pytest.raises(ConfigurationError, match="not found"):
            load_spacetime_config(tmp_path / "nope.env")
