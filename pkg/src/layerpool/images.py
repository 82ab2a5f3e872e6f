"""Image rasters and lossless decoding (PNG via Pillow, PPM/PGM natively).

Rasters hold pixels as float64 in [0, 1], channel-major (channel, row,
column), with 1 (gray) or 3 (RGB) channels.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class ImageRaster:
    """Decoded image with pixels in [0, 1], shape (channels, height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.pixels, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] not in (1, 3):
            raise InvalidInputError(
                f"raster must be (1|3, height, width), got shape {np.shape(self.pixels)}"
            )
        if min(arr.shape[1:]) < 1:
            raise InvalidInputError(f"raster has empty spatial extent: {arr.shape}")
        if arr.min() < -1e-9 or arr.max() > 1 + 1e-9:
            raise InvalidInputError("raster pixels must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def channels(self) -> int:
        return self.pixels.shape[0]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]


_PNM_MAGIC = {b"P2": (1, False), b"P3": (3, False), b"P5": (1, True), b"P6": (3, True)}


def _read_pnm(data: bytes) -> ImageRaster:
    m = re.match(rb"(P[2356])\s", data)
    if not m:
        raise InvalidInputError("not a supported PPM/PGM file (want P2/P3/P5/P6)")
    channels, binary = _PNM_MAGIC[m.group(1)]

    # Header tokens may be separated by whitespace and '#' comments.
    pos = m.end()
    tokens = []
    while len(tokens) < 3:
        chunk = data[pos:pos + 1]
        if not chunk:
            raise InvalidInputError("truncated PPM/PGM header")
        if chunk == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
            continue
        if chunk.isspace():
            pos += 1
            continue
        m2 = re.match(rb"\d+", data[pos:])
        if not m2:
            raise InvalidInputError("malformed PPM/PGM header")
        tokens.append(int(m2.group(0)))
        pos += m2.end()
    width, height, maxval = tokens
    if width < 1 or height < 1 or not (0 < maxval < 65536):
        raise InvalidInputError(f"bad PPM/PGM dimensions {width}x{height} maxval {maxval}")

    count = width * height * channels
    if binary:
        pos += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[pos:pos + count * dtype.itemsize]
        if len(raw) < count * dtype.itemsize:
            raise InvalidInputError("truncated PPM/PGM payload")
        values = np.frombuffer(raw, dtype=dtype).astype(np.float64)
    else:
        fields = data[pos:].split()
        if len(fields) < count:
            raise InvalidInputError("truncated PPM/PGM payload")
        values = np.array([int(t) for t in fields[:count]], dtype=np.float64)

    pixels = values.reshape(height, width, channels).transpose(2, 0, 1) / maxval
    return ImageRaster(pixels)


def _write_pnm(img: ImageRaster, path: Path) -> None:
    maxval = 255
    hwc = np.rint(img.pixels.transpose(1, 2, 0) * maxval).astype(np.uint8)
    magic = b"P6" if img.channels == 3 else b"P5"
    header = b"%s\n%d %d\n%d\n" % (magic, img.width, img.height, maxval)
    path.write_bytes(header + hwc.tobytes())


def read_image(path: str | Path) -> ImageRaster:
    """Decode a PNG, PPM or PGM file to a [0, 1] raster.

    PNG images with alpha are flattened by dropping the alpha channel;
    palette images are expanded to RGB.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".ppm", ".pgm", ".pnm"):
        return _read_pnm(path.read_bytes())
    if suffix == ".png":
        from PIL import Image

        with Image.open(path) as im:
            if im.mode in ("P", "RGBA", "LA"):
                im = im.convert("RGB")
            elif im.mode not in ("L", "RGB", "I;16"):
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float64)
        maxval = 65535.0 if im.mode == "I;16" else 255.0
        if arr.ndim == 2:
            arr = arr[:, :, None]
        return ImageRaster(arr.transpose(2, 0, 1) / maxval)
    raise InvalidInputError(f"unsupported image format: {path.name} (want .png/.ppm/.pgm)")


def write_image(img: ImageRaster, path: str | Path) -> None:
    """Encode a raster to PPM/PGM (8-bit) or PNG."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".ppm", ".pgm", ".pnm"):
        _write_pnm(img, path)
        return
    if suffix == ".png":
        from PIL import Image

        hwc = np.rint(img.pixels.transpose(1, 2, 0) * 255).astype(np.uint8)
        if img.channels == 1:
            Image.fromarray(hwc[:, :, 0], mode="L").save(path)
        else:
            Image.fromarray(hwc, mode="RGB").save(path)
        return
    raise InvalidInputError(f"unsupported image format: {path.name} (want .png/.ppm/.pgm)")
