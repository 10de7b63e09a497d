"""Checkpoint container.

A checkpoint is an uncompressed ``.npz`` archive. Member ``__header__`` holds a
UTF-8 JSON document::

    {"format": "esp-marl-checkpoint", "version": 1,
     "arrays": [names...], "meta": {...}}

Every other member is a named float64/int64 array (parameter vectors, Adam
moments, ...). Arrays are stored verbatim, so a save/load round trip is
bit-exact. RNG state goes into ``meta`` as the generator's JSON-able state dict.
"""

import io
import json
import os

import numpy as np

from esp_marl.errors import InvalidArgument

FORMAT = "esp-marl-checkpoint"
VERSION = 1


def save_checkpoint(path, arrays: dict, meta: dict) -> None:
    header = {"format": FORMAT, "version": VERSION, "arrays": sorted(arrays), "meta": meta}
    blob = np.frombuffer(json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    payload = {name: np.asarray(arr) for name, arr in arrays.items()}
    buf = io.BytesIO()
    np.savez(buf, __header__=blob, **payload)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def load_checkpoint(path):
    """Return ``(arrays, meta)``."""
    with np.load(path, allow_pickle=False) as data:
        if "__header__" not in data:
            raise InvalidArgument(f"{path} is not an esp-marl checkpoint (no header)")
        header = json.loads(bytes(data["__header__"]).decode("utf-8"))
        if header.get("format") != FORMAT:
            raise InvalidArgument(f"{path}: unexpected format {header.get('format')!r}")
        if header.get("version") != VERSION:
            raise InvalidArgument(f"{path}: unsupported checkpoint version {header.get('version')}")
        arrays = {name: data[name].copy() for name in header["arrays"]}
    return arrays, header["meta"]
