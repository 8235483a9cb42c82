"""Waveform corpora on disk, the signature database, and model files.

Corpus directory layout::

    header.txt      key = value lines (format, version, sample_rate, mains_freq,
                    encoding, n_samples, voltage, channel.<id>, mains)
    voltage.txt     one sample per line       (encoding = text)
    ch_<id>.txt     one sample per line
    *.f32           packed little-endian float32 (encoding = f32le)

A packed file starts with the 8-byte magic ``b"NILMWF01"`` followed by
``<u4 version, <u4 reserved, <f8 sample_rate, <u8 count`` and then ``count``
``<f4`` samples. See ``docs/FORMATS.md`` for the full description.
"""
from __future__ import annotations

import contextlib
import fcntl
import json
import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import orjson

from .errors import (
    ConcurrentWriteError,
    ConfigError,
    InconsistentLengthError,
    MissingHeaderError,
    ParseError,
    VersionMismatchError,
)
from .events import DeltaSignature
from .learn.serialize import model_from_dict, model_to_dict
from .signal import CyclePair, Waveform

log = logging.getLogger(__name__)

CORPUS_FORMAT = "nilmws-corpus"
CORPUS_VERSION = 1
DB_FORMAT = "nilmws-signature-db"
DB_VERSION = 1
MODEL_FORMAT = "nilmws-model"
MODEL_VERSION = 1
F32_MAGIC = b"NILMWF01"
_F32_HEADER = struct.Struct("<IIdQ")


@dataclass(frozen=True)
class ChannelMap:
    entries: tuple  # ((channel_id, appliance_name), ...)
    mains_channels: tuple

    def __post_init__(self):
        entries = tuple((int(c), str(n)) for c, n in self.entries)
        mains = tuple(int(c) for c in self.mains_channels)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "mains_channels", mains)
        ids = [c for c, _ in entries]
        if len(set(ids)) != len(ids):
            raise ConfigError("channel ids must be unique")
        if not set(mains) <= set(ids):
            raise ConfigError(f"mains channels {mains} are not all declared")

    @property
    def ids(self) -> tuple:
        return tuple(c for c, _ in self.entries)

    def name(self, channel: int) -> str:
        return dict(self.entries)[channel]

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class Corpus:
    channel_map: ChannelMap
    voltage: Waveform
    streams: dict  # channel id -> current Waveform
    header: dict
    counts: dict = field(default_factory=dict)

    def mains_current(self) -> Waveform:
        """Aggregate current: the sum of all mains channels."""
        total = sum(self.streams[c].samples for c in self.channel_map.mains_channels)
        return self.voltage.with_samples(total)


# --------------------------------------------------------------------------- corpus


def _parse_header(path: Path) -> dict:
    if not path.is_file():
        raise MissingHeaderError(f"corpus header {path} not found")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(path, lineno, raw)
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    for key in ("sample_rate", "mains_freq", "voltage"):
        if key not in out:
            raise MissingHeaderError(f"{path}: missing required key {key!r}")
    if out.get("format", CORPUS_FORMAT) != CORPUS_FORMAT:
        raise VersionMismatchError(f"{path}: not a {CORPUS_FORMAT} header")
    if int(out.get("version", CORPUS_VERSION)) != CORPUS_VERSION:
        raise VersionMismatchError(f"{path}: corpus version {out['version']} unsupported")
    return out


def _read_text_column(path: Path) -> np.ndarray:
    lines = path.read_text().splitlines()
    try:
        return np.array(lines, dtype=float)
    except ValueError:
        for row, text in enumerate(lines, 1):
            try:
                float(text)
            except ValueError:
                raise ParseError(path, row, text) from None
        raise


def _read_f32(path: Path) -> tuple[np.ndarray, float]:
    blob = path.read_bytes()
    if blob[:8] != F32_MAGIC:
        raise ParseError(path, 0, blob[:8])
    version, _, rate, count = _F32_HEADER.unpack_from(blob, 8)
    if version != CORPUS_VERSION:
        raise VersionMismatchError(f"{path}: packed version {version} unsupported")
    body = blob[8 + _F32_HEADER.size :]
    if len(body) != 4 * count:
        raise InconsistentLengthError(f"{path}: header declares {count} samples, file holds {len(body) // 4}")
    return np.frombuffer(body, dtype="<f4").astype(float), rate


def _read_column(directory: Path, stem: str, encoding: str, rate: float) -> np.ndarray:
    if encoding == "text":
        return _read_text_column(directory / f"{stem}.txt")
    if encoding == "f32le":
        data, file_rate = _read_f32(directory / f"{stem}.f32")
        if file_rate != rate:
            raise InconsistentLengthError(f"{stem}.f32: sample rate {file_rate} disagrees with header {rate}")
        return data
    raise ConfigError(f"unknown corpus encoding {encoding!r}")


def _channel_map_from_header(h: dict) -> ChannelMap:
    entries = sorted((int(k.split(".", 1)[1]), v) for k, v in h.items() if k.startswith("channel."))
    mains = tuple(int(x) for x in h.get("mains", "").replace(" ", "").split(",") if x)
    return ChannelMap(tuple(entries), mains)


def read_waveform_corpus(path, resample: bool = True) -> Corpus:
    """Load a corpus directory; every stream ends up on one power-of-two-per-cycle grid."""
    directory = Path(path)
    h = _parse_header(directory / "header.txt")
    rate = float(h["sample_rate"])
    f0 = float(h["mains_freq"])
    encoding = h.get("encoding", "text")
    cmap = _channel_map_from_header(h)
    columns = {"voltage": _read_column(directory, h["voltage"], encoding, rate)}
    for cid in cmap.ids:
        columns[cid] = _read_column(directory, f"ch_{cid:02d}", encoding, rate)
    counts = {k: len(v) for k, v in columns.items()}
    if len(set(counts.values())) != 1:
        raise InconsistentLengthError(f"streams disagree on sample counts: {counts}")
    declared = h.get("n_samples")
    if declared is not None and int(declared) != counts["voltage"]:
        raise InconsistentLengthError(f"header declares {declared} samples, files hold {counts['voltage']}")
    log.info("read %d channels x %d samples from %s", len(columns), counts["voltage"], directory)

    def wave(x):
        return Waveform.from_samples(x, rate, f0) if resample else Waveform(x, rate, f0)

    voltage = wave(columns.pop("voltage"))
    streams = {cid: wave(col) for cid, col in columns.items()}
    return Corpus(cmap, voltage, streams, h, counts)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_waveform_corpus(path, channel_map: ChannelMap, voltage: Waveform, streams: dict, encoding: str = "text"):
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    n = len(voltage)
    if any(len(s) != n for s in streams.values()):
        raise InconsistentLengthError("all streams must match the voltage length")
    if set(streams) != set(channel_map.ids):
        raise ConfigError("streams must cover exactly the declared channels")
    lines = [
        "# nilmws waveform corpus",
        f"format = {CORPUS_FORMAT}",
        f"version = {CORPUS_VERSION}",
        f"sample_rate = {_fmt(voltage.sample_rate)}",
        f"mains_freq = {_fmt(voltage.mains_freq)}",
        f"encoding = {encoding}",
        f"n_samples = {n}",
        "voltage = voltage",
    ]
    lines += [f"channel.{cid} = {name}" for cid, name in channel_map.entries]
    lines.append("mains = " + ",".join(str(c) for c in channel_map.mains_channels))
    (directory / "header.txt").write_text("\n".join(lines) + "\n")
    columns = {"voltage": voltage.samples, **{f"ch_{cid:02d}": s.samples for cid, s in streams.items()}}
    for stem, data in columns.items():
        if encoding == "text":
            (directory / f"{stem}.txt").write_text("\n".join(_fmt(x) for x in data) + "\n")
        elif encoding == "f32le":
            head = F32_MAGIC + _F32_HEADER.pack(CORPUS_VERSION, 0, float(voltage.sample_rate), len(data))
            (directory / f"{stem}.f32").write_bytes(head + np.asarray(data, dtype="<f4").tobytes())
        else:
            raise ConfigError(f"unknown corpus encoding {encoding!r}")


# --------------------------------------------------------------------------- signature database


@dataclass(frozen=True, eq=False)
class SignatureRecord:
    delta: DeltaSignature
    features: dict = field(default_factory=dict)  # space -> values
    label: int | None = None
    source: str = ""

    def equals(self, other: "SignatureRecord") -> bool:
        a, b = self.delta, other.delta
        return (
            a.cycle.equals(b.cycle)
            and a.event_index == b.event_index
            and a.polarity == b.polarity
            and a.p_delta == b.p_delta
            and self.label == other.label
            and self.source == other.source
            and set(self.features) == set(other.features)
            and all(np.array_equal(self.features[k], other.features[k]) for k in self.features)
        )


def _record_to_json(r: SignatureRecord) -> dict:
    d = r.delta
    return {
        "source": r.source,
        "label": r.label,
        "event_index": d.event_index,
        "polarity": d.polarity,
        "p_delta": d.p_delta,
        "mains_freq": d.cycle.mains_freq,
        "v": np.ascontiguousarray(d.cycle.v, dtype=float),
        "i": np.ascontiguousarray(d.cycle.i, dtype=float),
        "features": {k: np.ascontiguousarray(v, dtype=float) for k, v in sorted(r.features.items())},
    }


def _record_from_json(obj: dict) -> SignatureRecord:
    cycle = CyclePair(np.array(obj["v"], dtype=float), np.array(obj["i"], dtype=float), float(obj["mains_freq"]))
    label = obj.get("label")
    delta = DeltaSignature(cycle, int(obj["event_index"]), obj["polarity"], float(obj["p_delta"]), label)
    feats = {k: np.array(v, dtype=float) for k, v in obj.get("features", {}).items()}
    return SignatureRecord(delta, feats, label, obj.get("source", ""))


@contextlib.contextmanager
def exclusive_writer(path: Path):
    """Fail fast if another process is writing ``path``; replace it atomically on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lock = open(str(path) + ".lock", "a+")
    try:
        try:
            fcntl.flock(lock.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            raise ConcurrentWriteError(f"{path} is being written by another process") from None
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                yield fh
            os.replace(tmp, path)
        except BaseException:
            with contextlib.suppress(FileNotFoundError):
                os.unlink(tmp)
            raise
    finally:
        fcntl.flock(lock.fileno(), fcntl.LOCK_UN)
        lock.close()


def _dump(obj) -> str:
    # orjson emits shortest round-trip floats, so reads are bit-exact
    return orjson.dumps(obj, option=orjson.OPT_SERIALIZE_NUMPY).decode()


def write_signature_db(records, path) -> None:
    """Line-delimited JSON: one header line, then one record per line."""
    records = list(records)
    with exclusive_writer(Path(path)) as fh:
        fh.write(_dump({"format": DB_FORMAT, "schema_version": DB_VERSION, "records": len(records)}) + "\n")
        for r in records:
            fh.write(_dump(_record_to_json(r)) + "\n")


def _read_header(lines, path, fmt, version):
    if not lines:
        raise MissingHeaderError(f"{path} is empty")
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError:
        raise MissingHeaderError(f"{path}: first line is not a header") from None
    if head.get("format") != fmt:
        raise MissingHeaderError(f"{path}: not a {fmt} file")
    if head.get("schema_version") != version:
        raise VersionMismatchError(f"{path}: schema version {head.get('schema_version')} != {version}")
    return head


def read_signature_db(path) -> list[SignatureRecord]:
    path = Path(path)
    lines = path.read_text().splitlines()
    head = _read_header(lines, path, DB_FORMAT, DB_VERSION)
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != head["records"]:
        raise InconsistentLengthError(f"{path}: header declares {head['records']} records, found {len(body)}")
    out = []
    for row, line in enumerate(body, 2):
        try:
            out.append(_record_from_json(orjson.loads(line)))
        except (orjson.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise ParseError(path, row, line[:60]) from exc
    return out


# --------------------------------------------------------------------------- models


def write_model(model, path, meta: dict | None = None) -> None:
    with exclusive_writer(Path(path)) as fh:
        fh.write(_dump({"format": MODEL_FORMAT, "schema_version": MODEL_VERSION, "meta": meta or {}}) + "\n")
        fh.write(_dump(model_to_dict(model)) + "\n")


def read_model(path):
    """Returns ``(model, meta)``."""
    path = Path(path)
    lines = path.read_text().splitlines()
    head = _read_header(lines, path, MODEL_FORMAT, MODEL_VERSION)
    if len(lines) < 2:
        raise InconsistentLengthError(f"{path}: model body missing")
    return model_from_dict(json.loads(lines[1])), head.get("meta", {})
