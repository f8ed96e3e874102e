"""Converters between in-memory objects and on-disk artifacts.

Complex arrays travel as nested ``[re, im]`` pairs so that JSON artifacts
stay portable. Point tables are CSV with ``#key=value`` metadata lines ahead
of the header row.
"""

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np

from ris_noma.channel_models import ChannelSet, RisProfile
from ris_noma.errors import DimensionError, DomainError

PathLike = Union[str, Path]


def encode_complex(array: np.ndarray) -> Any:
    """Nested lists with every complex entry replaced by ``[re, im]``."""
    arr = np.asarray(array, dtype=complex)
    stacked = np.stack([arr.real, arr.imag], axis=-1)
    return stacked.tolist()


def decode_complex(data: Any) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != 2:
        msg = f"complex payload must end in [re, im] pairs, got shape {arr.shape}"
        raise DomainError(msg)
    return arr[..., 0] + 1j * arr[..., 1]


def profile_to_dict(profile: RisProfile) -> Dict[str, Any]:
    return {
        "coefficients": encode_complex(profile.coefficients),
        "resolution_bits": profile.resolution_bits,
    }


def profile_from_dict(data: Mapping[str, Any]) -> RisProfile:
    if "coefficients" not in data:
        msg = "Missing required field: coefficients"
        raise DomainError(msg)
    coeffs = data["coefficients"]
    values = decode_complex(coeffs) if len(coeffs) else np.zeros(0, dtype=complex)
    return RisProfile(values, data.get("resolution_bits"))


def channelset_to_dict(channels: ChannelSet) -> Dict[str, Any]:
    return {
        "users": channels.num_users,
        "antennas": channels.num_antennas,
        "direct": encode_complex(channels.direct),
        "bs_ris": [encode_complex(f) for f in channels.bs_ris],
        "ris_user": [encode_complex(g) for g in channels.ris_user],
        "blocked_direct": channels.blocked_direct.tolist(),
    }


def channelset_from_dict(data: Mapping[str, Any]) -> ChannelSet:
    """Rebuild a :class:`ChannelSet` written by :func:`channelset_to_dict`."""
    for key in ("users", "antennas", "direct", "bs_ris", "ris_user", "blocked_direct"):
        if key not in data:
            msg = f"Missing required field: {key}"
            raise DomainError(msg)
    users = int(data["users"])
    antennas = int(data["antennas"])
    direct = decode_complex(data["direct"]).reshape(users, antennas)
    bs_ris: List[np.ndarray] = []
    ris_user: List[np.ndarray] = []
    for f_data, g_data in zip(data["bs_ris"], data["ris_user"]):
        f = decode_complex(f_data) if _has_entries(f_data) else None
        g = decode_complex(g_data) if _has_entries(g_data) else None
        if f is None or g is None:
            bs_ris.append(np.zeros((0, antennas), dtype=complex))
            ris_user.append(np.zeros((users, 0), dtype=complex))
            continue
        bs_ris.append(f.reshape(-1, antennas))
        ris_user.append(g.reshape(users, -1))
    if len(data["bs_ris"]) != len(data["ris_user"]):
        msg = "bs_ris and ris_user list different RIS counts"
        raise DimensionError(msg)
    return ChannelSet(direct, tuple(bs_ris), tuple(ris_user), np.asarray(data["blocked_direct"]))


def _has_entries(data: Any) -> bool:
    return bool(np.asarray(data, dtype=float).size)


def channels_digest(channels: Sequence[ChannelSet]) -> str:
    """SHA-256 over the canonical JSON of a list of realizations."""
    payload = json.dumps(
        [channelset_to_dict(c) for c in channels], sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def dump_json(data: Any, path: PathLike) -> Path:
    """Write deterministic JSON (sorted keys, repr floats, trailing newline)."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return target


def load_json(path: PathLike) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def format_float(value: float) -> str:
    return format(float(value), ".17g")


def write_points_csv(
    path: PathLike,
    columns: Sequence[str],
    rows: np.ndarray,
    metadata: Mapping[str, Any],
) -> Path:
    """Write a table with ``#key=value`` metadata lines and a header row."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    for key in sorted(metadata):
        buffer.write(f"#{key}={metadata[key]}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in np.atleast_2d(np.asarray(rows, dtype=float)):
        if row.size:
            writer.writerow([format_float(v) for v in row])
    target.write_text(buffer.getvalue(), encoding="utf-8")
    return target


def read_points_csv(path: PathLike) -> Tuple[Dict[str, str], List[str], np.ndarray]:
    """Inverse of :func:`write_points_csv`: (metadata, columns, rows)."""
    metadata: Dict[str, str] = {}
    body: List[str] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            metadata[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    if not body:
        msg = f"{path} has no header row"
        raise DomainError(msg)
    reader = csv.reader(body)
    columns = next(reader)
    values = [[float(v) for v in row] for row in reader]
    rows = np.asarray(values, dtype=float).reshape(-1, len(columns))
    return metadata, columns, rows
