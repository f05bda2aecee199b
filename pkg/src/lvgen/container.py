"""Self-describing model container: named arrays plus a JSON header in one ``.npz``."""
from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np

FORMAT = "lvgen-container/1"
_HEADER_KEY = "__header__"


def save_container(path: str | Path, arrays: dict[str, np.ndarray], header: dict) -> Path:
    path = Path(path)
    if _HEADER_KEY in arrays:
        raise ValueError(f"array name {_HEADER_KEY!r} is reserved")
    head = {"format": FORMAT, **header}
    blob = np.frombuffer(json.dumps(head, sort_keys=True).encode(), dtype=np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    # np.savez stamps entries with the wall clock; fixed stamps keep reruns byte-identical
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, value in [(_HEADER_KEY, blob), *sorted(arrays.items())]:
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(value), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())
    return path


def load_container(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path, allow_pickle=False) as z:
        if _HEADER_KEY not in z.files:
            raise ValueError(f"{path} is not an lvgen container (no header)")
        header = json.loads(bytes(z[_HEADER_KEY]).decode())
        arrays = {k: z[k] for k in z.files if k != _HEADER_KEY}
    if header.get("format") != FORMAT:
        raise ValueError(f"{path}: unsupported container format {header.get('format')!r}")
    return arrays, header
