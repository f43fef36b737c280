"""Flat parameter vector with named segments.

Networks and optimizers exchange parameters as one contiguous float64 array;
the layout records how named pieces (layer matrices, bias vectors) map into
it so they can be viewed without copying.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ParamVector:
    values: np.ndarray
    layout: list = field(default_factory=list)  # (name, start, stop, shape)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("parameter vector must be one-dimensional")

    @classmethod
    def build(cls, segments):
        """Assemble from an ordered list of (name, array) pairs."""
        layout = []
        chunks = []
        start = 0
        for name, arr in segments:
            arr = np.asarray(arr, dtype=np.float64)
            stop = start + arr.size
            layout.append((name, start, stop, arr.shape))
            chunks.append(arr.ravel())
            start = stop
        values = np.concatenate(chunks) if chunks else np.zeros(0)
        return cls(values, layout)

    def __len__(self):
        return self.values.size

    def segment(self, name: str) -> np.ndarray:
        """View of one named segment, reshaped to its declared shape."""
        for seg_name, start, stop, shape in self.layout:
            if seg_name == name:
                return self.values[start:stop].reshape(shape)
        raise KeyError(name)

    def segment_bounds(self, name: str):
        for seg_name, start, stop, shape in self.layout:
            if seg_name == name:
                return start, stop, shape
        raise KeyError(name)

    def names(self):
        return [name for name, _, _, _ in self.layout]

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), list(self.layout))

    def replaced(self, values: np.ndarray) -> "ParamVector":
        """Same layout, new values (copied)."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise ValueError("replacement values have wrong length")
        return ParamVector(values.copy(), list(self.layout))
