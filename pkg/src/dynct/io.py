"""Stack files, metrics CSV and PGM export.

Stack file layout
-----------------
Line 1 is a UTF-8 JSON object terminated by ``\\n``; the rest of the file
is the raw payload, little-endian 64-bit floats in C order:

* ``kind="volume"``: shape ``[frames, rows, cols]`` (frame-major).
* ``kind="sinogram"``: shape ``[frames, angles, detectors]`` (angle-major
  inside each frame) plus the ``angles`` list in radians and the
  ``detector_spacing``.

The header also carries ``magic``, ``version``, ``dtype`` and a free-form
``provenance`` object (configuration, its hash and seeds).  Angles are
written with Python's shortest round-trip float repr, so a write/read
cycle is bitwise lossless.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .projector import SinogramStack

MAGIC = "DYNCT-STACK"
VERSION = 1
DTYPE = "<f8"
KINDS = ("volume", "sinogram")
CSV_HEADER = ("method", "projections", "frame", "rel_l2", "psnr", "hpsi")
MEAN_FIRST_LAST = "mean_first_last"
PGM_MAXVAL = 65535


class StackFormatError(ValueError):
    """Malformed stack file; the message names the byte offset of the problem."""


@dataclass
class StackFile:
    kind: str
    data: np.ndarray
    angles: np.ndarray | None = None
    detector_spacing: float = 1.0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ValueError(f"stack payload must be 3-D, got shape {self.data.shape}")
        if self.kind == "sinogram":
            if self.angles is None or len(self.angles) != self.data.shape[1]:
                raise ValueError("sinogram stacks need one angle per row of each frame")
            self.angles = np.asarray(self.angles, dtype=np.float64)

    def header(self) -> dict:
        h = {"magic": MAGIC, "version": VERSION, "dtype": DTYPE, "kind": self.kind,
             "shape": list(self.data.shape)}
        if self.kind == "sinogram":
            h["angles"] = [float(a) for a in self.angles]
            h["detector_spacing"] = float(self.detector_spacing)
        h["provenance"] = self.provenance
        return h

    def sinograms(self) -> SinogramStack:
        if self.kind != "sinogram":
            raise ValueError(f"file holds a {self.kind}, not a sinogram stack")
        return SinogramStack(self.data, self.angles, self.detector_spacing)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def encode_stack(stack: StackFile) -> bytes:
    head = canonical_json(stack.header()).encode("utf-8") + b"\n"
    return head + np.ascontiguousarray(stack.data, dtype=DTYPE).tobytes()


def write_stack(path, stack: StackFile) -> None:
    path = Path(path)
    try:
        path.write_bytes(encode_stack(stack))
    except OSError as exc:
        raise OSError(f"cannot write stack file {path}: {exc.strerror}") from exc


def decode_stack(raw: bytes) -> StackFile:
    nl = raw.find(b"\n")
    if nl < 0:
        raise StackFormatError("byte 0: no newline-terminated header line")
    try:
        head = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        pos = getattr(exc, "pos", getattr(exc, "start", 0))
        raise StackFormatError(f"byte {pos}: header is not valid UTF-8 JSON ({exc})") from exc
    if not isinstance(head, dict) or head.get("magic") != MAGIC:
        raise StackFormatError(f"byte 0: missing magic {MAGIC!r}")
    if head.get("version") != VERSION:
        raise StackFormatError(f"byte 0: unsupported version {head.get('version')!r}")
    if head.get("dtype") != DTYPE:
        raise StackFormatError(f"byte 0: unsupported dtype {head.get('dtype')!r}")
    shape = head.get("shape")
    if not (isinstance(shape, list) and len(shape) == 3 and all(isinstance(s, int) and s >= 0 for s in shape)):
        raise StackFormatError(f"byte 0: bad shape {shape!r}")
    start = nl + 1
    expected = 8 * int(np.prod(shape))
    got = len(raw) - start
    if got != expected:
        raise StackFormatError(f"byte {start}: payload has {got} bytes, shape {shape} needs {expected}")
    data = np.frombuffer(raw, dtype=DTYPE, offset=start).reshape(shape).astype(np.float64)
    try:
        return StackFile(head.get("kind"), data, head.get("angles"), head.get("detector_spacing", 1.0),
                         head.get("provenance", {}))
    except ValueError as exc:
        raise StackFormatError(f"byte 0: {exc}") from exc


def read_stack(path) -> StackFile:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read stack file {path}: {exc.strerror}") from exc
    try:
        return decode_stack(raw)
    except StackFormatError as exc:
        raise StackFormatError(f"{path}: {exc}") from exc


def ingest_sinogram_stack(path) -> SinogramStack:
    """Load externally produced measurements (same file format, ``kind="sinogram"``)."""
    return read_stack(path).sinograms()


def _fmt(x: float) -> str:
    return repr(float(x))


def metrics_rows_to_csv(rows) -> str:
    """Render rows ``(method, projections, frame, rel_l2, psnr, hpsi)``.

    Fields are written with the csv module's minimal quoting; floats use
    the shortest round-trip repr, and ``frame`` is an integer or
    ``mean_first_last``.
    """
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for method, proj, frame, r, p, h in rows:
        if frame != MEAN_FIRST_LAST:
            frame = int(frame)
        w.writerow([method, int(proj), frame, _fmt(r), _fmt(p), _fmt(h)])
    return buf.getvalue()


def read_metrics_csv(text: str) -> list[dict]:
    reader = csv.DictReader(_io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"metrics CSV header must be {','.join(CSV_HEADER)}")
    out = []
    for row in reader:
        frame = row["frame"]
        out.append({"method": row["method"], "projections": int(row["projections"]),
                    "frame": frame if frame == MEAN_FIRST_LAST else int(frame),
                    "rel_l2": float(row["rel_l2"]), "psnr": float(row["psnr"]), "hpsi": float(row["hpsi"])})
    return out


def window_to_uint16(img, lo: float, hi: float) -> np.ndarray:
    """Linear window: ``lo`` -> 0, ``hi`` -> 65535, clipped, rounded half to even."""
    img = np.asarray(img, dtype=np.float64)
    if not hi > lo:
        return np.zeros(img.shape, dtype=np.uint16)
    scaled = np.clip((img - lo) / (hi - lo), 0.0, 1.0) * PGM_MAXVAL
    return np.rint(scaled).astype(np.uint16)


def encode_pgm(pixels: np.ndarray) -> bytes:
    """Binary 16-bit PGM (P5, maxval 65535, big-endian samples)."""
    if pixels.ndim != 2 or pixels.dtype != np.uint16:
        raise ValueError("PGM export expects a 2-D uint16 image")
    rows, cols = pixels.shape
    return f"P5\n{cols} {rows}\n{PGM_MAXVAL}\n".encode("ascii") + pixels.astype(">u2").tobytes()


def decode_pgm(raw: bytes) -> np.ndarray:
    parts = raw.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P5" or int(parts[3]) != PGM_MAXVAL:
        raise ValueError("not a 16-bit binary PGM")
    cols, rows = int(parts[1]), int(parts[2])
    payload = raw[len(raw) - 2 * rows * cols:]
    return np.frombuffer(payload, dtype=">u2").reshape(rows, cols).astype(np.uint16)


def export_frames(stack: np.ndarray, frames, out_dir, stem: str = "frame",
                  window: tuple[float, float] | None = None) -> list[Path]:
    """Write selected frames as PGM files ``<stem>_<t:03d>.pgm``.

    The default window is ``[0, max of the whole stack]``, so every frame
    shares one grey scale.
    """
    stack = np.asarray(stack, dtype=np.float64)
    frames = [int(t) for t in frames]
    for t in frames:
        if not 0 <= t < stack.shape[0]:
            raise IndexError(f"frame {t} out of range for {stack.shape[0]} frames")
    lo, hi = window if window is not None else (0.0, float(stack.max()))
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for t in frames:
        p = out_dir / f"{stem}_{t:03d}.pgm"
        p.write_bytes(encode_pgm(window_to_uint16(stack[t], lo, hi)))
        paths.append(p)
    return paths
