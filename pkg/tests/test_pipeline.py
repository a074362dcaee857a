import pytest

from spitgate.capture_io import CallCapture, group_calls, write_capture
from spitgate.classify_media import MediaRuleParams
from spitgate.classify_signaling import LayerVerdict
from spitgate.pipeline import (
    NoInviteError,
    Settings,
    Verdict,
    analyze_call,
    analyze_capture,
    benchmark,
    default_store,
    default_table,
)
from spitgate.traffic_synth import CallProfile, capture_datagrams, synth_call, synth_corpus


@pytest.fixture(scope="module")
def store():
    return default_store()


@pytest.fixture(scope="module")
def table():
    return default_table()


def _analyze(profile, store, table, **kw):
    call = synth_call(profile)
    (capture,) = group_calls(capture_datagrams(call))
    return analyze_call(capture, store, table, **kw)


def test_anonymous_short_circuits(store, table):
    profile = CallProfile("spam_continuous", 1, user="anonymous", host="anonymous.net")
    v = _analyze(profile, store, table)
    assert v.final == "spam" and v.layer2 is None and v.decoded_packets == 0
    assert v.layer2_elapsed is None


def test_clean_genuine_reaches_both_layers(store, table):
    v = _analyze(CallProfile("genuine", 2), store, table)
    assert (v.final, v.layer1.decision, v.layer2.decision) == ("genuine", "pass", "pass")
    assert v.decoded_packets == 500


def test_clean_continuous_is_spam_at_layer2(store, table):
    v = _analyze(CallProfile("spam_continuous", 2), store, table)
    assert (v.final, v.layer1.decision, v.layer2.decision) == ("spam", "pass", "spam")


def test_no_invite(store, table):
    call = synth_call(CallProfile("genuine", 3, duration=1))
    capture = CallCapture(call.call_id, call.sip_messages[1:], call.rtp_packets)
    with pytest.raises(NoInviteError):
        analyze_call(capture, store, table)


def test_call_without_media_fails_open(store, table):
    call = synth_call(CallProfile("genuine", 3, duration=1))
    v = analyze_call(CallCapture(call.call_id, call.sip_messages, []), store, table)
    assert v.final == "genuine" and v.layer2.reasons == ["insufficient media"]
    closed = Settings(params=MediaRuleParams(fail_closed=True))
    assert analyze_call(CallCapture(call.call_id, call.sip_messages, []), store, table, closed).final == "spam"


def test_verdict_invariants_enforced():
    spam = LayerVerdict("spam", ["x"])
    ok = LayerVerdict("pass")
    with pytest.raises(ValueError):
        Verdict("c", spam, ok, "spam")
    with pytest.raises(ValueError):
        Verdict("c", ok, spam, "genuine")
    with pytest.raises(ValueError):
        Verdict("c", ok, None, "genuine")


def test_empty_capture(tmp_path):
    write_capture([], tmp_path / "e.pcap")
    report = analyze_capture(tmp_path / "e.pcap")
    assert report.verdicts == [] and report.skipped == 0
    assert report.mean_layer2 is None


def test_rtp_only_capture_skipped(tmp_path):
    call = synth_call(CallProfile("genuine", 4, duration=1))
    write_capture(call.rtp_packets, tmp_path / "r.pcap")
    report = analyze_capture(tmp_path / "r.pcap")
    assert report.verdicts == [] and report.skipped == 1


def test_bad_capture_has_file_context(tmp_path):
    p = tmp_path / "junk.pcap"
    p.write_bytes(b"nope")
    with pytest.raises(ValueError, match="junk.pcap"):
        analyze_capture(p)


@pytest.fixture(scope="module")
def mixed_capture(tmp_path_factory):
    calls = [synth_call(CallProfile("genuine", s, duration=3, talk=0.8, silence=0.5)) for s in range(1, 5)]
    calls += [synth_call(CallProfile("spam_signaling", s, duration=3)) for s in range(5, 9)]
    path = tmp_path_factory.mktemp("mixed") / "mixed.pcap"
    write_capture(capture_datagrams(*calls), path)
    return path


def test_mixed_corpus_counts(mixed_capture):
    report = analyze_capture(mixed_capture)
    assert (report.genuine_count, report.spam_count) == (4, 4)
    assert sum(v.layer2 is not None for v in report.verdicts) == 4
    assert report.mean_layer2 == pytest.approx(
        sum(v.layer2_elapsed for v in report.verdicts if v.layer2) / 4)
    assert [v.call_id for v in report.verdicts] == sorted(v.call_id for v in report.verdicts)


def test_parallel_matches_serial(mixed_capture):
    serial = analyze_capture(mixed_capture)
    parallel = analyze_capture(mixed_capture, jobs=2)
    assert [(v.call_id, v.final, v.reasons) for v in serial.verdicts] == \
           [(v.call_id, v.final, v.reasons) for v in parallel.verdicts]


def test_report_format(mixed_capture):
    text = analyze_capture(mixed_capture).format()
    lines = text.splitlines()
    assert lines[0].split("\t") == ["call_id", "final", "layer1", "layer1_ms", "layer2", "layer2_ms", "reasons"]
    rows = [ln.split("\t") for ln in lines[1:9]]
    assert all(len(r) == 7 for r in rows)
    assert any(r[4] == "-" and r[5] == "-" for r in rows)
    assert "# calls\t8" in lines and "# spam\t4" in lines


def test_benchmark(tmp_path):
    paths = synth_corpus([CallProfile("genuine", s, duration=2) for s in (1, 2)], tmp_path / "a")
    table = benchmark(paths, repetitions=3)
    assert table.calls == 2 and table.layer2_calls == 2
    assert table.layer2_mean is not None and table.layer1_mean > 0
    rejects = synth_corpus([CallProfile("spam_signaling", 1, duration=1)], tmp_path / "b")
    assert benchmark(rejects, repetitions=3).layer2_mean is None
    with pytest.raises(ValueError, match="at least 3"):
        benchmark(paths, repetitions=1)
    with pytest.raises(ValueError, match="empty corpus"):
        benchmark([], repetitions=3)


def test_determinism_modulo_timing(mixed_capture):
    a, b = analyze_capture(mixed_capture), analyze_capture(mixed_capture)
    assert [(v.final, v.layer1.reasons, v.layer2 and v.layer2.reasons) for v in a.verdicts] == \
           [(v.final, v.layer1.reasons, v.layer2 and v.layer2.reasons) for v in b.verdicts]


def test_first_invite_wins(store, table):
    call = synth_call(CallProfile("genuine", 6, duration=2))
    reinvite = synth_call(CallProfile("spam_signaling", 6, duration=2)).sip_messages[0]
    later = type(reinvite)(call.sip_messages[-1].ts_sec + 1, 0, reinvite.src_ip, 5060, reinvite.dst_ip, 5060,
                           reinvite.payload.replace(b"spam_signaling-6", b"genuine-6"))
    capture = CallCapture(call.call_id, call.sip_messages + [later], call.rtp_packets)
    assert analyze_call(capture, store, table).layer1.decision == "pass"
