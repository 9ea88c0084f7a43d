"""Bit-exact raw volume I/O and PNG slice export.

Canonical volume format: a headerless little-endian raw file in x-fastest
order plus a JSON sidecar ``{dims, dtype, spacing_um, endianness}``.  PNG is
used only for 2D slices and previews, never as a volume store.
"""

from __future__ import annotations

import json
import os

import numpy as np
from PIL import Image

from .errors import FormatError
from .grid import LabelMask, VoxelVolume

_DTYPES = {"u16": np.dtype("<u2"), "f32": np.dtype("<f4")}
_AXES = {"x": 0, "y": 1, "z": 2}


def sidecar_path(path: str) -> str:
    return path + ".json"


def write_volume(volume: VoxelVolume, path: str, metadata_path: str | None = None) -> None:
    """Write raw little-endian voxel data (x-fastest) plus its JSON sidecar."""
    dtype = _DTYPES[volume.dtype_name]
    # Fortran ravel of [x,y,z]-indexed data gives the x-fastest flat order.
    volume.data.astype(dtype, copy=False).ravel(order="F").tofile(path)
    meta = {
        "dims": list(volume.dims),
        "dtype": volume.dtype_name,
        "spacing_um": list(volume.spacing_um),
        "endianness": "LE",
    }
    with open(metadata_path or sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_volume(path: str, metadata_path: str | None = None) -> VoxelVolume:
    """Read a raw volume; byte-for-byte round-trip with write_volume."""
    meta_file = metadata_path or sidecar_path(path)
    with open(meta_file, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    try:
        dims = tuple(int(d) for d in meta["dims"])
        dtype_name = meta["dtype"]
        spacing = tuple(float(s) for s in meta["spacing_um"])
        endianness = meta.get("endianness", "LE")
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad sidecar {meta_file}: {exc}") from exc
    if endianness != "LE":
        raise FormatError(f"unsupported endianness {endianness!r} (only LE)")
    if dtype_name not in _DTYPES:
        raise FormatError(f"unsupported dtype {dtype_name!r} (use u16 or f32)")
    if len(dims) != 3 or any(d <= 0 for d in dims):
        raise FormatError(f"bad dims {dims}")
    dtype = _DTYPES[dtype_name]
    expected = dims[0] * dims[1] * dims[2] * dtype.itemsize
    actual = os.path.getsize(path)
    if actual != expected:
        raise FormatError(
            f"{path}: file is {actual} bytes but sidecar declares "
            f"{dims} x {dtype_name} = {expected} bytes"
        )
    flat = np.fromfile(path, dtype=dtype)
    native = np.float32 if dtype_name == "f32" else np.uint16
    data = flat.astype(native, copy=False).reshape(dims, order="F")
    return VoxelVolume(data, spacing)


def write_mask(mask: LabelMask, path: str, spacing_um=(1.0, 1.0, 1.0),
               metadata_path: str | None = None) -> None:
    """Store a mask as a u16 0/1 volume (keeps the sidecar schema uniform)."""
    vol = VoxelVolume(mask.data.astype(np.uint16), spacing_um)
    write_volume(vol, path, metadata_path)


def read_mask(path: str, metadata_path: str | None = None) -> LabelMask:
    vol = read_volume(path, metadata_path)
    return LabelMask(vol.data > 0)


def _to_image_array(slice2d: np.ndarray, window: tuple[float, float] | None,
                    bit_depth: int) -> np.ndarray:
    """Window a [x,y]-indexed slice and transpose to image (row=y) layout."""
    arr = slice2d.astype(np.float64)
    if window is None:
        lo, hi = float(arr.min()), float(arr.max())
    else:
        lo, hi = float(window[0]), float(window[1])
    span = hi - lo
    norm = np.zeros_like(arr) if span <= 0 else np.clip((arr - lo) / span, 0.0, 1.0)
    if bit_depth == 8:
        return (norm.T * 255.0 + 0.5).astype(np.uint8)
    if bit_depth == 16:
        return (norm.T * 65535.0 + 0.5).astype(np.uint16)
    raise FormatError(f"bit_depth must be 8 or 16, got {bit_depth}")


def save_png(image: np.ndarray, path: str) -> None:
    """Save a 2D uint8/uint16 (grayscale) or (h,w,3) uint8 (RGB) array."""
    Image.fromarray(image).save(path)


def gray_to_png(image2d: np.ndarray, path: str,
                window: tuple[float, float] = (0.0, 1.0),
                bit_depth: int = 8) -> None:
    """Export one [x,y]-indexed gray image with an explicit window."""
    save_png(_to_image_array(np.asarray(image2d), window, bit_depth), path)


def load_png_gray(path: str) -> np.ndarray:
    """Load a PNG as a float [0,1] gray image, [x,y]-indexed.

    Inverse of :func:`gray_to_png` up to quantization: the image-row layout
    on disk is transposed back to the package's [x,y] convention.  Color
    inputs are averaged to gray.
    """
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim == 3:
        arr = arr[..., :3].mean(axis=2)
    info = np.iinfo(arr.dtype) if np.issubdtype(arr.dtype, np.integer) else None
    scale = float(info.max) if info else 1.0
    return (arr.astype(np.float64) / scale).astype(np.float32).T


def export_slices(volume: VoxelVolume | LabelMask, axis: str, directory: str,
                  window: tuple[float, float] | None = None, bit_depth: int = 8,
                  prefix: str = "slice") -> int:
    """Write one grayscale PNG per slice along ``axis``; returns file count.

    Gray volumes are min-max windowed unless an explicit window is given;
    masks always export as 0/255.
    """
    if axis not in _AXES:
        raise FormatError(f"axis must be one of x, y, z, got {axis!r}")
    os.makedirs(directory, exist_ok=True)
    ax = _AXES[axis]
    if isinstance(volume, LabelMask):
        data = volume.data.astype(np.uint8) * 255
        window = (0, 255)
        bit_depth = 8
    else:
        data = volume.data
        if window is None:
            window = (float(data.min()), float(data.max()))
    n = data.shape[ax]
    for i in range(n):
        slice2d = np.take(data, i, axis=ax)
        img = _to_image_array(slice2d, window, bit_depth)
        save_png(img, os.path.join(directory, f"{prefix}_{axis}{i:04d}.png"))
    return n
