"""8-bit image files for tensors: PNG plus the ASCII netpbm pair.

Writing quantizes to 256 levels after clamping to [0, 1]; the returned
flag reports whether clamping actually moved a value, which is how noisy
latents (legitimately outside the pixel range) are flagged as lossy
exports. read(write(x)) is value-preserving to 1/255 for clean images.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..core import ImageTensor

__all__ = [
    "ImageFormatError",
    "decode_png",
    "encode_png",
    "read_image",
    "write_image",
]


class ImageFormatError(ValueError):
    """File does not decode to a supported 8-bit image."""


def _quantize(image: ImageTensor) -> tuple[np.ndarray, bool]:
    clamped = np.clip(image.data, 0.0, 1.0)
    lossy = bool(np.any(clamped != image.data))
    levels = np.rint(clamped * 255.0).astype(np.uint8)
    return levels.reshape(image.height, image.width, image.channels), lossy


def encode_png(image: ImageTensor) -> tuple[bytes, bool]:
    """PNG bytes plus the clamping flag."""
    levels, lossy = _quantize(image)
    if image.channels == 1:
        pil = Image.fromarray(levels[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(levels, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue(), lossy


def decode_png(data: bytes) -> ImageTensor:
    try:
        pil = Image.open(io.BytesIO(data))
        pil.load()
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"not a PNG image: {exc}") from exc
    if pil.mode != "L":
        pil = pil.convert("RGB")
    arr = np.asarray(pil, dtype=np.float64) / 255.0
    return ImageTensor.from_array(arr, clean=True)


def _netpbm_tokens(text: str) -> list[str]:
    tokens = []
    for line in text.splitlines():
        body = line.split("#", 1)[0]
        tokens.extend(body.split())
    return tokens


def _read_netpbm(path: Path) -> ImageTensor:
    tokens = _netpbm_tokens(path.read_text())
    if not tokens or tokens[0] not in ("P2", "P3"):
        raise ImageFormatError(f"{path}: expected ASCII netpbm magic P2 or P3")
    channels = 1 if tokens[0] == "P2" else 3
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
        values = np.array([int(t) for t in tokens[4:]], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise ImageFormatError(f"{path}: malformed header or sample data") from exc
    if maxval < 1:
        raise ImageFormatError(f"{path}: maxval must be positive, got {maxval}")
    expected = width * height * channels
    if values.size != expected:
        raise ImageFormatError(
            f"{path}: expected {expected} samples, found {values.size}"
        )
    if np.any(values < 0) or np.any(values > maxval):
        raise ImageFormatError(f"{path}: sample values outside [0, {maxval}]")
    arr = (values / maxval).reshape(height, width, channels)
    return ImageTensor.from_array(arr, clean=True)


def _write_netpbm(path: Path, image: ImageTensor) -> bool:
    if path.suffix == ".pgm" and image.channels != 1:
        raise ValueError("PGM stores a single channel; use .ppm for RGB")
    if path.suffix == ".ppm" and image.channels != 3:
        raise ValueError("PPM stores RGB; use .pgm for grayscale")
    levels, lossy = _quantize(image)
    flat = levels.reshape(image.height, image.width * image.channels)
    lines = [("P2" if image.channels == 1 else "P3"), f"{image.width} {image.height}", "255"]
    lines.extend(" ".join(str(v) for v in row) for row in flat)
    path.write_text("\n".join(lines) + "\n")
    return lossy


def read_image(path: str | Path) -> ImageTensor:
    """Decode by extension: .png, .pgm or .ppm."""
    path = Path(path)
    if path.suffix == ".png":
        return decode_png(path.read_bytes())
    if path.suffix in (".pgm", ".ppm"):
        return _read_netpbm(path)
    raise ValueError(f"unsupported image extension {path.suffix!r}")


def write_image(path: str | Path, image: ImageTensor) -> bool:
    """Encode by extension; returns True when out-of-range values were
    clamped (the export is then lossy beyond plain quantization).
    """
    path = Path(path)
    if path.suffix == ".png":
        data, lossy = encode_png(image)
        path.write_bytes(data)
        return lossy
    if path.suffix in (".pgm", ".ppm"):
        return _write_netpbm(path, image)
    raise ValueError(f"unsupported image extension {path.suffix!r}")
