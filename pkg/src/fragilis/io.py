"""File formats and run configuration.

Series files
    CSV: optional first row of channel labels (one per channel), then one row
    per channel of samples. The sampling rate comes from the caller or from a
    ``<path>.meta.json`` sidecar (``{"rate_hz": ...}``).

    Binary: magic ``b"FRAG1"``, little-endian u32 channels, u32 samples, f64
    rate, then channels * samples f64 values in row-major order.

Heatmap files
    CSV: header ``window_start_s,<labels...>`` then one row per window of raw
    fragility; the normalized grid goes to ``<path>.normalized.csv``.
    JSON: ``values``, ``normalized``, ``window_times``, ``channel_labels``,
    ``targets`` (``[re, im]`` pairs), ``structure`` and ``config``.
"""

import csv
import json
import math
import os
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import InvalidInputError, ParseError
from .fragility import STRUCTURES, FragilityHeatmap, default_targets
from .sysid import WindowedSeries

MAGIC = b"FRAG1"
_HEADER = struct.Struct("<IId")
BINARY_SUFFIXES = (".bin", ".frag")


def fmt_float(x):
    """17 significant digits; ``nan``/``inf`` spelled out."""
    return format(float(x), ".17g")


def infer_format(path, default="csv"):
    ext = os.path.splitext(str(path))[1].lower()
    if ext in BINARY_SUFFIXES:
        return "binary"
    if ext == ".json":
        return "json"
    if ext == ".csv":
        return "csv"
    return default


def sidecar_path(path):
    return f"{path}.meta.json"


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _read_csv_series(path):
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh)]
    # keep 1-based line numbers for error messages, drop blank lines
    numbered = [(i + 1, row) for i, row in enumerate(rows) if row and any(c.strip() for c in row)]
    if not numbered:
        raise ParseError(f"{path}: file is empty", line=1)

    labels = None
    first_line, first = numbered[0]
    if not all(_is_number(c) for c in first):
        labels = [c.strip() for c in first]
        if any(not lab for lab in labels):
            raise ParseError(f"{path}: malformed header on line {first_line}: empty channel label", line=first_line)
        numbered = numbered[1:]
    if not numbered:
        raise ParseError(f"{path}: no data rows", line=first_line + 1)

    width = len(numbered[0][1])
    data = np.empty((len(numbered), width))
    for r, (line, row) in enumerate(numbered):
        if len(row) != width:
            raise ParseError(f"{path}: ragged row on line {line}: {len(row)} cells, expected {width}", line=line)
        for c, cell in enumerate(row):
            try:
                data[r, c] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric cell {cell!r} on line {line}, column {c + 1}", line=line
                ) from None
    if not np.all(np.isfinite(data)):
        raise ParseError(f"{path}: non-finite sample values")
    if labels is not None and len(labels) != data.shape[0]:
        raise ParseError(
            f"{path}: malformed header: {len(labels)} labels for {data.shape[0]} channel rows", line=first_line
        )
    return data, labels


def _read_binary_series(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise ParseError(f"{path}: bad magic {blob[:len(MAGIC)]!r}", offset=0)
    off = len(MAGIC)
    if len(blob) < off + _HEADER.size:
        raise ParseError(f"{path}: truncated header", offset=len(blob))
    channels, samples, rate = _HEADER.unpack_from(blob, off)
    off += _HEADER.size
    expected = channels * samples * 8
    if len(blob) - off != expected:
        raise ParseError(
            f"{path}: payload is {len(blob) - off} bytes, expected {expected} for {channels}x{samples}",
            offset=off,
        )
    data = np.frombuffer(blob, dtype="<f8", offset=off).reshape(channels, samples).astype(float)
    return data, rate


def _sidecar_rate(path):
    meta = sidecar_path(path)
    if not os.path.exists(meta):
        return None
    with open(meta) as fh:
        try:
            return float(json.load(fh)["rate_hz"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"{meta}: expected a JSON object with numeric 'rate_hz'") from exc


@dataclass(frozen=True)
class Recording:
    """A multichannel recording before windowing."""

    data: np.ndarray
    rate: float
    channel_labels: tuple

    @property
    def n_channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    def windowed(self, window_len, step):
        return WindowedSeries(self.data, self.rate, int(window_len), int(step), self.channel_labels)


def read_recording(path, fmt=None, rate=None):
    fmt = fmt or infer_format(path)
    if fmt == "binary":
        data, file_rate = _read_binary_series(path)
        labels = None
        rate = rate if rate is not None else file_rate
    elif fmt == "csv":
        data, labels = _read_csv_series(path)
        rate = rate if rate is not None else _sidecar_rate(path)
        if rate is None:
            raise InvalidInputError(f"{path}: sampling rate unknown; pass it explicitly or add {sidecar_path(path)}")
    else:
        raise InvalidInputError(f"unknown series format {fmt!r}")
    if not (math.isfinite(rate) and rate > 0):
        raise InvalidInputError(f"sampling rate must be positive, got {rate}")
    if labels is None:
        labels = [f"ch{i}" for i in range(data.shape[0])]
    return Recording(data=data, rate=float(rate), channel_labels=tuple(labels))


def read_series(path, fmt=None, rate=None, window_len=None, step=None):
    """Read a series file into a :class:`WindowedSeries`.

    ``window_len`` defaults to the whole recording and ``step`` to half the
    window.
    """
    rec = read_recording(path, fmt, rate)
    window_len = rec.n_samples if window_len is None else window_len
    step = max(1, window_len // 2) if step is None else step
    return rec.windowed(window_len, step)


def write_series(path, data, rate, fmt=None, channel_labels=None):
    data = np.asarray(data, dtype=float)
    fmt = fmt or infer_format(path)
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(_HEADER.pack(data.shape[0], data.shape[1], float(rate)))
            fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
    elif fmt == "csv":
        labels = channel_labels or [f"ch{i}" for i in range(data.shape[0])]
        with open(path, "w", newline="") as fh:
            _write_series_csv(fh, data, labels)
        with open(sidecar_path(path), "w") as fh:
            json.dump({"rate_hz": float(rate)}, fh)
            fh.write("\n")
    else:
        raise InvalidInputError(f"unknown series format {fmt!r}")


def _write_series_csv(fh, data, labels):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(labels)
    for row in data:
        w.writerow([fmt_float(v) for v in row])


def read_matrix(path):
    """Square matrix from a header-less CSV (or ``.npy``)."""
    if str(path).endswith(".npy"):
        return np.load(path)
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    try:
        M = np.array([[float(c) for c in row] for row in rows])
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ParseError(f"{path}: expected a square numeric matrix")
    return M


def parse_complex(value):
    """Accept a number, an ``[re, im]`` pair, ``"re,im"`` or a Python complex literal."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise InvalidInputError(f"complex pair must have two entries, got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        s = value.strip()
        if "," in s:
            re_, im_ = s.split(",", 1)
            return complex(float(re_), float(im_))
        try:
            return complex(s.replace(" ", ""))
        except ValueError:
            raise InvalidInputError(f"cannot parse complex number {value!r}") from None
    return complex(value)


@dataclass
class RunConfig:
    window_len_ms: float = 250.0
    overlap_fraction: float = 0.5
    targets: list = field(default_factory=default_targets)
    structure: str = "row"
    norm: str = "spectral"
    seed: int = 0
    ridge: float = None

    def __post_init__(self):
        self.targets = [parse_complex(t) for t in self.targets]
        if not self.window_len_ms > 0:
            raise InvalidInputError(f"window_len_ms must be positive, got {self.window_len_ms}")
        if not 0 <= self.overlap_fraction < 1:
            raise InvalidInputError(f"overlap_fraction must lie in [0, 1), got {self.overlap_fraction}")
        if not self.targets:
            raise InvalidInputError("targets must be nonempty")
        if self.structure not in STRUCTURES:
            raise InvalidInputError(f"structure must be one of {STRUCTURES}")
        if self.norm != "spectral":
            raise InvalidInputError("only the spectral norm is supported")
        if self.ridge is not None and self.ridge < 0:
            raise InvalidInputError("ridge must be nonnegative")

    def window_samples(self, rate):
        """``(window_len, step)`` in samples at ``rate`` Hz."""
        window_len = int(round(self.window_len_ms * rate / 1000.0))
        step = max(1, int(round(window_len * (1.0 - self.overlap_fraction))))
        return window_len, step

    def to_dict(self):
        d = asdict(self)
        d["targets"] = [[t.real, t.imag] for t in self.targets]
        return d

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def load_config(path):
    if path is None:
        return RunConfig()
    with open(path) as fh:
        try:
            return RunConfig.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}", line=exc.lineno) from None


def _grid_rows(times, grid):
    for t, row in zip(times, grid):
        yield [fmt_float(t)] + [fmt_float(v) for v in row]


def _json_grid(grid):
    return [[None if not math.isfinite(v) else float(v) for v in row] for row in np.asarray(grid)]


def write_heatmap(hm, path, fmt=None, config=None):
    """Write ``hm`` as CSV (plus ``<path>.normalized.csv``) or JSON."""
    if hm.values.shape[0] < 1:
        raise InvalidInputError("refusing to write an empty heatmap")
    fmt = fmt or infer_format(path)
    if fmt == "csv":
        header = ["window_start_s", *hm.channel_labels]
        for target, grid in ((path, hm.values), (f"{path}.normalized.csv", hm.normalized)):
            with open(target, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(_grid_rows(hm.window_times, grid))
    elif fmt == "json":
        with open(path, "w") as fh:
            fh.write(heatmap_json(hm, config))
    else:
        raise InvalidInputError(f"unknown heatmap format {fmt!r}")


def heatmap_json(hm, config=None):
    doc = {
        "values": _json_grid(hm.values),
        "normalized": _json_grid(hm.normalized),
        "window_times": [float(t) for t in hm.window_times],
        "channel_labels": list(hm.channel_labels),
        "targets": [[t.real, t.imag] for t in hm.targets],
        "structure": hm.structure,
        "config": config.to_dict() if isinstance(config, RunConfig) else config,
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _read_grid_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["window_start_s"]:
        raise ParseError(f"{path}: missing 'window_start_s' header", line=1)
    body = np.array([[float(c) for c in row] for row in rows[1:]], dtype=float)
    return rows[0][1:], body[:, 0], body[:, 1:]


def read_heatmap(path, fmt=None, targets=None):
    """Inverse of :func:`write_heatmap`.

    CSV files carry no target set; pass ``targets``. The JSON ``config`` echo
    is not part of the returned heatmap (load the document directly for it).
    """
    fmt = fmt or infer_format(path)
    if fmt == "csv":
        labels, times, values = _read_grid_csv(path)
        _, _, normalized = _read_grid_csv(f"{path}.normalized.csv")
        return FragilityHeatmap(values, normalized, times, tuple(labels),
                                tuple(targets or default_targets()))
    with open(path) as fh:
        doc = json.load(fh)

    def grid(key):
        return np.array([[np.nan if v is None else v for v in row] for row in doc[key]], dtype=float)

    return FragilityHeatmap(
        values=grid("values"),
        normalized=grid("normalized"),
        window_times=np.array(doc["window_times"], dtype=float),
        channel_labels=tuple(doc["channel_labels"]),
        targets=tuple(complex(re_, im_) for re_, im_ in doc["targets"]),
        structure=doc.get("structure", "row"),
    )
