"""Sampled-signal container used by every stage of the toolkit."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig


@dataclass(frozen=True, eq=False)
class NoiseTrace:
    """A uniformly sampled real-valued signal plus its sampling rate.

    Samples are held as float32, matching the on-disk trace format, so a
    write/read cycle reproduces the in-memory array bit for bit.
    Consumers that need high-precision statistics accumulate in float64.
    """

    samples: np.ndarray
    sampling_rate_hz: float = 1.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float32)
        if samples.ndim != 1:
            raise InvalidConfig("trace samples must be one-dimensional", field="samples")
        if samples.size == 0:
            raise InvalidConfig("trace must contain at least one sample", field="samples")
        if not (float(self.sampling_rate_hz) > 0.0):
            raise InvalidConfig("sampling_rate_hz must be positive", field="sampling_rate_hz")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sampling_rate_hz", float(self.sampling_rate_hz))

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self):
        return self.samples.size / self.sampling_rate_hz
