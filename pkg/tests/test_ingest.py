import multiprocessing as mp
import time

import numpy as np
import pytest

from nilmws.errors import (
    ConcurrentWriteError,
    ConfigError,
    InconsistentLengthError,
    MissingHeaderError,
    ParseError,
    VersionMismatchError,
)
from nilmws.events import DeltaSignature
from nilmws.features import SPACES, featurize
from nilmws.ingest import (
    ChannelMap,
    SignatureRecord,
    exclusive_writer,
    read_model,
    read_signature_db,
    read_waveform_corpus,
    write_model,
    write_signature_db,
    write_waveform_corpus,
)
from nilmws.learn import split, train
from nilmws.signal import CyclePair, Waveform, sine_cycle

N = 256
RATE = 60.0 * N


def _wave(x):
    return Waveform(np.asarray(x, float), RATE)


def _record(k=0, rng=None, spaces=SPACES, label=1):
    rng = rng or np.random.default_rng(k)
    i = sine_cycle(3.0 + rng.uniform(), -rng.uniform()) + 0.3 * rng.normal() * sine_cycle(1.0, harmonic=3)
    d = DeltaSignature.from_cycle(CyclePair(sine_cycle(170.0), i), 1000 + k, label)
    feats = {s: featurize(d, s).values for s in spaces}
    return SignatureRecord(d, feats, label, f"src-{k}")


class TestCorpus:
    def test_one_second_two_columns(self, tmp_path):
        t = np.arange(15360) / RATE
        v = _wave(170 * np.sin(2 * np.pi * 60 * t))
        i = _wave(10 * np.sin(2 * np.pi * 60 * t - 0.3))
        write_waveform_corpus(tmp_path, ChannelMap(((1, "mains"),), (1,)), v, {1: i})
        c = read_waveform_corpus(tmp_path)
        assert c.voltage.duration == pytest.approx(1.0)
        assert np.array_equal(c.voltage.samples, v.samples)
        assert np.array_equal(c.streams[1].samples, i.samples)
        assert c.counts == {"voltage": 15360, 1: 15360}

    def test_table_layout_22_channels(self, tmp_path):
        names = ["mains", "mains"] + [f"app{k}" for k in range(3, 23)]
        cmap = ChannelMap(tuple(enumerate(names, 1)), (1, 2))
        rng = np.random.default_rng(0)
        v = _wave(np.tile(sine_cycle(170.0), 4))
        streams = {c: _wave(rng.normal(size=4 * N)) for c in cmap.ids}
        write_waveform_corpus(tmp_path, cmap, v, streams)
        c = read_waveform_corpus(tmp_path)
        assert len(c.channel_map) == 22 and c.channel_map.mains_channels == (1, 2)
        assert c.channel_map.name(7) == "app7"
        np.testing.assert_array_equal(c.mains_current().samples, streams[1].samples + streams[2].samples)

    def test_packed_binary(self, tmp_path):
        rng = np.random.default_rng(1)
        v = _wave(np.tile(sine_cycle(170.0), 3))
        i = _wave(rng.normal(size=3 * N))
        write_waveform_corpus(tmp_path, ChannelMap(((4, "mains"),), (4,)), v, {4: i}, "f32le")
        c = read_waveform_corpus(tmp_path)
        np.testing.assert_array_equal(c.streams[4].samples, i.samples.astype(np.float32).astype(float))
        raw = (tmp_path / "ch_04.f32").read_bytes()
        assert raw[:8] == b"NILMWF01" and len(raw) == 8 + 24 + 4 * 3 * N

    def test_missing_header(self, tmp_path):
        with pytest.raises(MissingHeaderError):
            read_waveform_corpus(tmp_path)

    def _small(self, tmp_path):
        v = _wave(np.tile(sine_cycle(170.0), 2))
        write_waveform_corpus(tmp_path, ChannelMap(((1, "mains"),), (1,)), v, {1: v})
        return tmp_path

    def test_missing_required_key(self, tmp_path):
        d = self._small(tmp_path)
        h = d / "header.txt"
        h.write_text("\n".join(ln for ln in h.read_text().splitlines() if not ln.startswith("sample_rate")))
        with pytest.raises(MissingHeaderError, match="sample_rate"):
            read_waveform_corpus(d)

    def test_inconsistent_lengths(self, tmp_path):
        d = self._small(tmp_path)
        with open(d / "ch_01.txt", "a") as fh:
            fh.write("0.5\n")
        with pytest.raises(InconsistentLengthError):
            read_waveform_corpus(d)

    def test_parse_error_reports_row(self, tmp_path):
        d = self._small(tmp_path)
        lines = (d / "voltage.txt").read_text().splitlines()
        lines[9] = "abc"
        (d / "voltage.txt").write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError, match="10"):
            read_waveform_corpus(d)

    def test_version(self, tmp_path):
        d = self._small(tmp_path)
        h = d / "header.txt"
        h.write_text(h.read_text().replace("version = 1", "version = 9"))
        with pytest.raises(VersionMismatchError):
            read_waveform_corpus(d)

    def test_channel_map_validation(self):
        with pytest.raises(ConfigError):
            ChannelMap(((1, "a"), (1, "b")), (1,))
        with pytest.raises(ConfigError):
            ChannelMap(((1, "a"),), (2,))


class TestSignatureDb:
    def test_empty(self, tmp_path):
        p = tmp_path / "db.jsonl"
        write_signature_db([], p)
        assert read_signature_db(p) == []

    def test_round_trip_all_spaces(self, tmp_path):
        p = tmp_path / "db.jsonl"
        rec = _record(3)
        write_signature_db([rec], p)
        (back,) = read_signature_db(p)
        assert back.equals(rec)
        assert set(back.features) == set(SPACES)

    def test_extreme_floats_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        i = rng.normal(size=N) * 10.0 ** rng.integers(-300, 300, N)
        d = DeltaSignature(CyclePair(sine_cycle(170.0) + 1e-17, i), 5, "on", 0.1 + 0.2)
        rec = SignatureRecord(d, {"WS": np.array([np.pi, 5e-324, 1.7976931348623157e308])}, None, "x")
        p = tmp_path / "db.jsonl"
        write_signature_db([rec], p)
        assert read_signature_db(p)[0].equals(rec)

    def test_ten_thousand_under_five_seconds(self, tmp_path):
        rng = np.random.default_rng(0)
        recs = [_record(k, rng, spaces=("PQ", "WS")) for k in range(200)]
        recs = [recs[k % 200] for k in range(10_000)]
        p = tmp_path / "big.jsonl"
        t = time.perf_counter()
        write_signature_db(recs, p)
        back = read_signature_db(p)
        assert time.perf_counter() - t < 5.0
        assert len(back) == 10_000 and back[-1].equals(recs[-1])

    def test_truncated_file(self, tmp_path):
        p = tmp_path / "db.jsonl"
        write_signature_db([_record(0), _record(1)], p)
        p.write_text("\n".join(p.read_text().splitlines()[:-1]) + "\n")
        with pytest.raises(InconsistentLengthError):
            read_signature_db(p)

    def test_corrupt_row(self, tmp_path):
        p = tmp_path / "db.jsonl"
        write_signature_db([_record(0)], p)
        lines = p.read_text().splitlines()
        p.write_text(lines[0] + "\n{not json\n")
        with pytest.raises(ParseError):
            read_signature_db(p)

    def test_schema_version(self, tmp_path):
        p = tmp_path / "db.jsonl"
        write_signature_db([], p)
        p.write_text(p.read_text().replace('"schema_version":1', '"schema_version":2'))
        with pytest.raises(VersionMismatchError):
            read_signature_db(p)

    def test_not_a_db(self, tmp_path):
        p = tmp_path / "x.jsonl"
        p.write_text("hello\n")
        with pytest.raises(MissingHeaderError):
            read_signature_db(p)


def _hold_lock(path, ready, release):
    with exclusive_writer(path) as fh:
        fh.write("x")
        ready.set()
        release.wait(10)


class TestLocking:
    def test_concurrent_writer_fails_fast(self, tmp_path):
        p = tmp_path / "db.jsonl"
        ctx = mp.get_context("fork")
        ready, release = ctx.Event(), ctx.Event()
        proc = ctx.Process(target=_hold_lock, args=(p, ready, release))
        proc.start()
        try:
            assert ready.wait(10)
            with pytest.raises(ConcurrentWriteError):
                write_signature_db([], p)
        finally:
            release.set()
            proc.join(10)
        write_signature_db([], p)
        assert read_signature_db(p) == []

    def test_failed_write_leaves_old_file(self, tmp_path):
        p = tmp_path / "db.jsonl"
        write_signature_db([_record(0)], p)
        with pytest.raises(RuntimeError):
            with exclusive_writer(p) as fh:
                fh.write("garbage")
                raise RuntimeError("boom")
        assert len(read_signature_db(p)) == 1
        assert not list(tmp_path.glob("*.tmp"))


@pytest.mark.parametrize("alg", ["ANN", "SVM", "AdaBoost"])
def test_model_round_trip(tmp_path, alg):
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(size=(30, 3)), rng.normal(size=(30, 3)) + 3])
    y = np.repeat([0, 1], 30)
    m = train(alg, split(X, y, seed=0), seed=0)
    write_model(m, tmp_path / "m.json", {"space": "WS"})
    back, meta = read_model(tmp_path / "m.json")
    assert meta == {"space": "WS"}
    np.testing.assert_array_equal(m.predict(X), back.predict(X))


def test_model_round_trip_infinite_threshold(tmp_path):
    from nilmws.learn.boost import BoostModel, Stump, VoteStump

    m = BoostModel(((VoteStump(0, -np.inf, (-1, 1)), 0.7), (Stump(1, np.inf, 1, 0), 0.2)), 2, 2)
    write_model(m, tmp_path / "m.json")
    back, _ = read_model(tmp_path / "m.json")
    assert back == m
