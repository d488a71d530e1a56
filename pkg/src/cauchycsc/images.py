"""Grayscale image I/O: PGM (ASCII and binary), grayscale PNG, IDX containers.

Every loader returns float64 intensities in ``[0, peak]`` together with the
peak implied by the file's bit depth. Parse failures raise
:class:`ImageFormatError` naming the offending byte offset where one exists.
"""

import os
import struct
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ImageFormatError
from .tensor_ops import as_grid

__all__ = [
    "load_image",
    "load_pgm",
    "load_png",
    "load_idx",
    "load_dataset",
    "preprocess_zero_mean",
    "write_pgm",
]

_WHITESPACE = frozenset(b" \t\n\r\x0b\x0c")

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

# mode -> peak for the grayscale PIL modes we accept
_PNG_PEAKS = {"L": 255.0, "I": 65535.0, "I;16": 65535.0, "I;16B": 65535.0}


def _skip_separators(data, pos, path):
    """Advance past whitespace and '#' comments; error at end of data."""
    n = len(data)
    while pos < n:
        byte = data[pos]
        if byte in _WHITESPACE:
            pos += 1
        elif byte == 0x23:  # '#'
            while pos < n and data[pos] not in (0x0A, 0x0D):
                pos += 1
        else:
            return pos
    raise ImageFormatError(f"{path}: unexpected end of file at byte {n}")


def _read_header_int(data, pos, path, what):
    pos = _skip_separators(data, pos, path)
    start = pos
    while pos < len(data) and data[pos] not in _WHITESPACE and data[pos] != 0x23:
        pos += 1
    token = data[start:pos]
    try:
        value = int(token)
    except ValueError:
        raise ImageFormatError(
            f"{path}: expected {what} at byte {start}, got {token[:20]!r}"
        ) from None
    if value < 0:
        raise ImageFormatError(f"{path}: negative {what} at byte {start}")
    return value, pos


def load_pgm(path):
    """Parse a P2 (ASCII) or P5 (binary) PGM file -> (image, peak)."""
    data = Path(path).read_bytes()
    if len(data) < 2 or data[0] != 0x50 or data[1] not in (0x32, 0x35):
        raise ImageFormatError(f"{path}: not a PGM file (bad magic at byte 0)")
    ascii_raster = data[1] == 0x32  # 'P2'
    width, pos = _read_header_int(data, 2, path, "width")
    height, pos = _read_header_int(data, pos, path, "height")
    maxval, pos = _read_header_int(data, pos, path, "maxval")
    if width == 0 or height == 0:
        raise ImageFormatError(f"{path}: zero image dimension {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise ImageFormatError(f"{path}: maxval {maxval} outside [1, 65535]")

    count = width * height
    if ascii_raster:
        samples = np.empty(count, dtype=np.float64)
        for i in range(count):
            value, pos = _read_header_int(data, pos, path, f"sample {i}")
            samples[i] = value
    else:
        if pos >= len(data) or data[pos] not in _WHITESPACE:
            raise ImageFormatError(
                f"{path}: expected single whitespace after maxval at byte {pos}"
            )
        pos += 1
        bytes_per = 2 if maxval > 255 else 1
        need = count * bytes_per
        if len(data) - pos < need:
            raise ImageFormatError(
                f"{path}: truncated raster at byte {len(data)}: "
                f"need {need} bytes from byte {pos}, have {len(data) - pos}"
            )
        dtype = ">u2" if bytes_per == 2 else np.uint8
        samples = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
        samples = samples.astype(np.float64)

    if samples.size and samples.max() > maxval:
        bad = int(np.argmax(samples > maxval))
        raise ImageFormatError(
            f"{path}: sample {bad} exceeds maxval {maxval}"
        )
    return samples.reshape(height, width), float(maxval)


def load_png(path):
    """Load a grayscale PNG -> (image, peak). Color modes are rejected."""
    try:
        with Image.open(path) as img:
            mode = img.mode
            if mode not in _PNG_PEAKS:
                raise ImageFormatError(
                    f"{path}: grayscale PNG required, got mode {mode!r}"
                )
            arr = np.asarray(img, dtype=np.float64)
    except ImageFormatError:
        raise
    except Exception as exc:
        raise ImageFormatError(f"{path}: cannot parse PNG ({exc})") from exc
    return arr, _PNG_PEAKS[mode]


def load_idx(path):
    """Load an IDX image container -> (images[N, rows, cols], peak 255).

    Accepts the unsigned-byte, 3-dimensional layout MNIST uses.
    """
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise ImageFormatError(f"{path}: truncated IDX header at byte {len(data)}")
    if data[0] != 0 or data[1] != 0:
        raise ImageFormatError(f"{path}: bad IDX magic at byte 0")
    type_code, ndim = data[2], data[3]
    if type_code != 0x08:
        raise ImageFormatError(
            f"{path}: unsupported IDX element type 0x{type_code:02x} at byte 2 "
            "(only unsigned byte is supported)"
        )
    if ndim != 3:
        raise ImageFormatError(
            f"{path}: expected 3 dimensions for an image container, got {ndim}"
        )
    header_end = 4 + 4 * ndim
    if len(data) < header_end:
        raise ImageFormatError(f"{path}: truncated IDX header at byte {len(data)}")
    dims = struct.unpack(">3I", data[4:header_end])
    need = int(np.prod(dims))
    if len(data) - header_end < need:
        raise ImageFormatError(
            f"{path}: truncated IDX data at byte {len(data)}: "
            f"need {need} bytes from byte {header_end}"
        )
    images = np.frombuffer(data, dtype=np.uint8, count=need, offset=header_end)
    return images.reshape(dims).astype(np.float64), 255.0


def load_image(path):
    """Load one grayscale image -> (Grid2, peak), dispatching on the magic."""
    path = Path(path)
    if not path.is_file():
        raise ImageFormatError(f"{path}: no such file")
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head[:2] in (b"P2", b"P5"):
        return load_pgm(path)
    if head == _PNG_SIGNATURE:
        return load_png(path)
    if len(head) >= 4 and head[0] == 0 and head[1] == 0:
        raise ImageFormatError(
            f"{path}: IDX containers hold multiple images; load them as a dataset"
        )
    raise ImageFormatError(f"{path}: unrecognized image format (bytes {head[:4]!r})")


def load_dataset(path, kind):
    """Load a dataset -> (list of Grid2, peak, names).

    kind "single-image": one PGM/PNG file. kind "image-directory": either a
    directory of PGM/PNG files (sorted by name) or an IDX container file.
    All images must agree on peak.
    """
    path = Path(path)
    if kind == "single-image":
        image, peak = load_image(path)
        return [image], peak, [path.stem]
    if kind != "image-directory":
        raise ValueError(f"unknown dataset kind {kind!r}")
    if path.is_file():
        stack, peak = load_idx(path)
        width = len(str(max(len(stack) - 1, 0)))
        names = [f"{path.stem}-{i:0{width}d}" for i in range(len(stack))]
        return [stack[i] for i in range(len(stack))], peak, names
    if not path.is_dir():
        raise ImageFormatError(f"{path}: no such file or directory")
    files = sorted(
        p for p in path.iterdir() if p.suffix.lower() in (".pgm", ".png")
    )
    if not files:
        raise ImageFormatError(f"{path}: no .pgm or .png files found")
    images, peaks, names = [], set(), []
    for p in files:
        image, peak = load_image(p)
        images.append(image)
        peaks.add(peak)
        names.append(p.stem)
    if len(peaks) != 1:
        raise ImageFormatError(
            f"{path}: mixed bit depths in one dataset (peaks {sorted(peaks)})"
        )
    return images, peaks.pop(), names


def preprocess_zero_mean(image):
    """Subtract the scalar mean -> (zero-mean image, mean).

    No variance normalization is applied.
    """
    image = as_grid(image, "image")
    mean = float(image.mean())
    return image - mean, mean


def write_pgm(path, image, peak=255.0):
    """Write ``image`` as binary PGM, rounding and clamping to [0, maxval].

    The write is atomic (temp file + rename).
    """
    image = as_grid(image, "image")
    maxval = 65535 if peak > 255 else 255
    quantized = np.clip(np.rint(image), 0, maxval)
    dtype = ">u2" if maxval > 255 else np.uint8
    raster = quantized.astype(dtype).tobytes()
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n{maxval}\n".encode("ascii")
    _atomic_write_bytes(path, header + raster)


def _atomic_write_bytes(path, payload):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
