"""File formats: the IMPN binary trace and JSON parameter documents.

Trace layout (all little-endian):

    bytes 0..3    magic "IMPN"
    bytes 4..5    format version, uint16 (currently 1)
    bytes 6..7    flags, uint16 (currently 0)
    bytes 8..15   sampling rate in Hz, float64
    bytes 16..23  sample count, uint64
    bytes 24..    samples, float32 each

Parameter documents are JSON with a ``model`` kind tag; serialization is
canonical (sorted keys, fixed indentation, shortest round-trip floats) so
write -> read -> write is byte-identical.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import __version__
from .baselines import BGMemoryParams, ClassAParams
from .chain import ChainConfig, SystemConfig
from .errors import (BadMagic, ParamsFormatError, TraceFormatError,
                     TruncatedFile, UnknownModelKind, VersionUnsupported)
from .trace import NoiseTrace

TRACE_MAGIC = b"IMPN"
TRACE_VERSION = 1
_HEADER = struct.Struct("<4sHHdQ")
_CHUNK_SAMPLES = 1 << 22

MODEL_CHAIN = "partitioned-chain"
MODEL_BG = "bg-memory"
MODEL_CLASS_A = "class-a"


def write_trace(path, trace):
    """Write a NoiseTrace to the binary format, chunk by chunk."""
    samples = np.ascontiguousarray(trace.samples, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TRACE_MAGIC, TRACE_VERSION, 0,
                              float(trace.sampling_rate_hz), samples.size))
        for lo in range(0, samples.size, _CHUNK_SAMPLES):
            fh.write(samples[lo:lo + _CHUNK_SAMPLES].tobytes())


def read_trace_header(fh):
    header = fh.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise TruncatedFile(f"file ends inside the header at byte {len(header)}",
                            offset=len(header))
    magic, version, flags, rate, count = _HEADER.unpack(header)
    if magic != TRACE_MAGIC:
        raise BadMagic(f"expected magic {TRACE_MAGIC!r}, found {magic!r}")
    if version != TRACE_VERSION:
        raise VersionUnsupported(f"cannot read trace format version {version}")
    if flags != 0:
        raise TraceFormatError(f"unsupported flags value {flags}")
    if not (rate > 0):
        raise TraceFormatError(f"non-positive sampling rate {rate}")
    if count == 0:
        raise TraceFormatError("trace declares zero samples")
    return rate, count


def iter_trace_chunks(path, chunk_samples=_CHUNK_SAMPLES):
    """Yield (sampling_rate_hz, total_count) once, then float32 sample chunks.

    Lets long passes (e.g. moment accumulation) stream a recording
    without holding it fully in memory.
    """
    with open(path, "rb") as fh:
        rate, count = read_trace_header(fh)
        yield rate, count
        remaining = count
        while remaining:
            want = int(min(chunk_samples, remaining))
            data = fh.read(want * 4)
            got = len(data) // 4
            if got < want or len(data) % 4:
                offset = _HEADER.size + (count - remaining) * 4 + len(data)
                raise TruncatedFile(
                    f"trace declares {count} samples but data ends at byte {offset}",
                    offset=offset, declared=int(count))
            yield np.frombuffer(data, dtype="<f4").astype(np.float32, copy=False)
            remaining -= got


def read_trace(path):
    """Read a full trace into memory."""
    stream = iter_trace_chunks(path)
    rate, count = next(stream)
    samples = np.empty(int(count), dtype=np.float32)
    pos = 0
    for chunk in stream:
        samples[pos:pos + chunk.size] = chunk
        pos += chunk.size
    return NoiseTrace(samples, rate)


@dataclass(frozen=True)
class ParamsDocument:
    """Parsed parameter file: kind tag, params object, optional metadata."""

    kind: str
    params: object
    sampling_rate_hz: float | None
    toolkit_version: str


def _chain_to_dict(config):
    return {
        "model": MODEL_CHAIN,
        "states_per_system": config.states_per_system,
        "background_variance": config.background_variance,
        "stay_prob": config.stay_prob,
        "entry_probs": list(config.entry_probs),
        "sampling_rate_hz": config.sampling_rate_hz,
        "systems": [
            {"amplitude_mean": s.amplitude_mean,
             "amplitude_variance": s.amplitude_variance,
             "exit_prob": s.exit_prob}
            for s in config.systems],
    }


def write_params(path, params, sampling_rate_hz=None):
    """Serialize a model parameter object to canonical JSON."""
    if isinstance(params, ChainConfig):
        doc = _chain_to_dict(params)
    elif isinstance(params, BGMemoryParams):
        doc = {
            "model": MODEL_BG,
            "background_stay_prob": params.background_stay_prob,
            "impulse_stay_prob": params.impulse_stay_prob,
            "background_variance": params.background_variance,
            "impulse_variance": params.impulse_variance,
        }
    elif isinstance(params, ClassAParams):
        doc = {
            "model": MODEL_CLASS_A,
            "impulsive_index": params.impulsive_index,
            "power_ratio": params.power_ratio,
            "total_variance": params.total_variance,
            "truncation_order": params.truncation_order,
        }
    else:
        raise UnknownModelKind(f"cannot serialize {type(params).__name__}")
    if sampling_rate_hz is not None and not isinstance(params, ChainConfig):
        doc["sampling_rate_hz"] = float(sampling_rate_hz)
    doc["toolkit_version"] = __version__
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def read_params(path):
    """Parse a parameter file into a ParamsDocument."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ParamsFormatError(f"not valid JSON: {err}") from err
    if not isinstance(doc, dict) or "model" not in doc:
        raise ParamsFormatError("params file lacks a 'model' kind tag")
    kind = doc["model"]
    try:
        if kind == MODEL_CHAIN:
            params = ChainConfig(
                systems=tuple(SystemConfig(amplitude_mean=s["amplitude_mean"],
                                           amplitude_variance=s["amplitude_variance"],
                                           exit_prob=s["exit_prob"])
                              for s in doc["systems"]),
                entry_probs=tuple(doc["entry_probs"]),
                stay_prob=doc["stay_prob"],
                background_variance=doc["background_variance"],
                sampling_rate_hz=doc["sampling_rate_hz"],
                states_per_system=doc["states_per_system"])
            rate = params.sampling_rate_hz
        elif kind == MODEL_BG:
            params = BGMemoryParams(
                background_stay_prob=doc["background_stay_prob"],
                impulse_stay_prob=doc["impulse_stay_prob"],
                background_variance=doc["background_variance"],
                impulse_variance=doc["impulse_variance"])
            rate = doc.get("sampling_rate_hz")
        elif kind == MODEL_CLASS_A:
            params = ClassAParams(
                impulsive_index=doc["impulsive_index"],
                power_ratio=doc["power_ratio"],
                total_variance=doc["total_variance"],
                truncation_order=doc["truncation_order"])
            rate = doc.get("sampling_rate_hz")
        else:
            raise UnknownModelKind(f"unknown model kind {kind!r}")
    except (KeyError, TypeError) as err:
        raise ParamsFormatError(f"params file malformed: {err}") from err
    return ParamsDocument(kind=kind, params=params, sampling_rate_hz=rate,
                          toolkit_version=str(doc.get("toolkit_version", "")))
