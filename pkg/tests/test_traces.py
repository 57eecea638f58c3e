import math

import pytest

from roadwatch.detection import DetectionConfig, run_detector
from roadwatch.geocode import haversine_m
from roadwatch.traces import (
    Injection,
    ScenarioSpec,
    ScenarioError,
    TraceFormatError,
    generate_trace,
    parse_trace,
    scenario_from_json,
    write_trace,
)

ROUTE = [(32.9800, -96.7500), (32.9960, -96.7500)]


def spec(**kw):
    base = dict(
        route=ROUTE,
        cruise_speed_kmh=45.0,
        sample_rate_hz=50.0,
        fix_rate_hz=1.0,
        injections=[],
        seed=11,
        duration_ms=30_000,
    )
    base.update(kw)
    return ScenarioSpec(**base)


class TestScenarioSpec:
    def test_duration_derived_from_route(self):
        s = spec(duration_ms=None)
        expected = round(s.route_length_m() / (45.0 / 3.6) * 1000)
        assert s.total_duration_ms() == expected

    @pytest.mark.parametrize(
        "kw",
        [
            {"sample_rate_hz": 0},
            {"fix_rate_hz": -1},
            {"cruise_speed_kmh": 0},
            {"route": []},
            {"injections": [Injection(40_000, "pothole", 5.0, 100)]},  # past the end
            {"injections": [Injection(1000, "meteor", 5.0, 100)]},
            {"injections": [Injection(1000, "pothole", 5.0, 0)]},
        ],
    )
    def test_invalid_spec_rejected(self, kw):
        with pytest.raises(ScenarioError):
            spec(**kw)

    def test_json_roundtrip(self):
        text = """
        {"route": [[32.98, -96.75], [32.996, -96.75]],
         "cruise_speed_kmh": 45, "sample_rate_hz": 50, "fix_rate_hz": 1,
         "injections": [{"t": 5000, "kind": "crash_x", "peak_g": -13, "duration_ms": 100}],
         "seed": 3, "duration_ms": 20000, "device_id": "veh-9"}
        """
        s = scenario_from_json(text)
        assert s.device_id == "veh-9"
        assert s.injections == [Injection(5000, "crash_x", -13.0, 100)]

    def test_bad_json_rejected(self):
        with pytest.raises(ScenarioError):
            scenario_from_json("{nope")
        with pytest.raises(ScenarioError):
            scenario_from_json('{"route": [[0,0]]}')


class TestGenerateTrace:
    def test_same_seed_same_bytes(self, tmp_path):
        s = spec(injections=[Injection(5000, "crash_x", 13.0, 100)])
        p1, p2 = tmp_path / "a.trace", tmp_path / "b.trace"
        write_trace(generate_trace(s), p1)
        write_trace(generate_trace(s), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_different_seed_differs(self):
        assert generate_trace(spec(seed=1)) != generate_trace(spec(seed=2))

    def test_injected_peak_appears(self):
        s = spec(injections=[Injection(5000, "crash_x", 13.0, 100)])
        trace = generate_trace(s)
        peak = max(abs(x.ax) for x in trace.samples) / 9.80665
        # sampling can miss the impulse crest by up to half a sample period
        dt = 1000 / s.sample_rate_hz
        floor = 13.0 * math.sin(math.pi * (0.5 - dt / (2 * 100)))
        assert floor <= peak <= 13.0

    def test_negative_peak_keeps_sign(self):
        s = spec(injections=[Injection(5000, "crash_y", -13.0, 100)])
        trace = generate_trace(s)
        assert min(x.ay for x in trace.samples) / 9.80665 < -12.0

    def test_zero_injections_detects_nothing(self):
        trace = generate_trace(spec())
        assert run_detector(trace.samples, trace.fixes, "d1", DetectionConfig()) == []

    def test_noise_stays_low(self):
        trace = generate_trace(spec())
        for s_ in trace.samples:
            for v in (s_.ax, s_.ay, s_.az):
                assert abs(v) / 9.80665 <= 0.5

    def test_fixes_follow_route(self):
        trace = generate_trace(spec())
        first, last = trace.fixes[0], trace.fixes[-1]
        assert (first.lat, first.lon) == ROUTE[0]
        # 30 s at 45 km/h = 375 m along a ~1780 m leg
        d = haversine_m(ROUTE[0][0], ROUTE[0][1], last.lat, last.lon)
        assert d == pytest.approx(375.0, rel=0.01)
        assert all(f.speed_kmh == 45.0 for f in trace.fixes)

    def test_fix_clamps_at_route_end(self):
        s = spec(duration_ms=600_000)  # far longer than the route
        trace = generate_trace(s)
        assert (trace.fixes[-1].lat, trace.fixes[-1].lon) == ROUTE[-1]


class TestTraceFileFormat:
    def test_write_parse_roundtrip(self, tmp_path):
        trace = generate_trace(spec(injections=[Injection(5000, "pothole", 5.0, 120)]))
        path = tmp_path / "t.trace"
        write_trace(trace, path)
        back = parse_trace(path)
        assert back.device_id == trace.device_id
        assert back.samples == trace.samples
        assert back.fixes == trace.fixes

    def test_rows_are_time_sorted_in_file(self, tmp_path):
        path = tmp_path / "t.trace"
        write_trace(generate_trace(spec()), path)
        ts = []
        for line in path.read_text().splitlines()[1:]:
            ts.append(int(line.split(",")[1]))
        assert ts == sorted(ts)

    def test_hand_written_fixture_parses(self, tmp_path):
        path = tmp_path / "hand.trace"
        path.write_text(
            '# {"device_id": "veh-7", "config": {"crash_g": 10.0}}\n'
            "A,0,0.1,0.0,9.8\n"
            "G,500,32.98,-96.75,51.5\n"
            "A,1000,0.0,0.0,0.0\n"
        )
        trace = parse_trace(path)
        assert trace.device_id == "veh-7"
        assert trace.config_overrides == {"crash_g": 10.0}
        assert len(trace.samples) == 2 and len(trace.fixes) == 1
        assert trace.fixes[0].speed_kmh == 51.5

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.trace"
        path.write_text("A,0,0,0,0\n")
        with pytest.raises(TraceFormatError):
            parse_trace(path)

    def test_unsorted_rows_rejected(self, tmp_path):
        path = tmp_path / "bad.trace"
        path.write_text('# {"device_id": "x"}\nA,1000,0,0,0\nA,500,0,0,0\n')
        with pytest.raises(TraceFormatError) as ei:
            parse_trace(path)
        assert "line 3" in str(ei.value)

    @pytest.mark.parametrize(
        "row", ["B,0,1,2,3", "A,0,1,2", "A,zero,1,2,3", "G,0,a,b,c", "A,0,1,2,3,4"]
    )
    def test_bad_rows_rejected(self, tmp_path, row):
        path = tmp_path / "bad.trace"
        path.write_text(f'# {{"device_id": "x"}}\n{row}\n')
        with pytest.raises(TraceFormatError):
            parse_trace(path)
