"""File formats: TF field container, CSV exports and mono signal files."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .tfanalysis import DerivedFields, TFField


class DataFormatError(ValueError):
    """Malformed or inconsistent input file."""


MAGIC = b"TFSPAFLD"
# magic, version, K, N, n_fields, flags, itemsize, sample_rate, bank hash
_HEADER = struct.Struct("<8sHIIHHHd16s")
VERSION = 1
_DTYPES = {8: np.dtype("<c8"), 16: np.dtype("<c16")}


def write_field(path, fields, dtype=np.complex64) -> None:
    """Write a :class:`TFField` or :class:`DerivedFields` to a binary container.

    The header stores the shape, number of stacked fields, the analytic
    flag, the sample rate and the filter bank hash; the payload is the
    row-major little-endian complex data of each field in turn.
    """
    if isinstance(fields, DerivedFields):
        arrs = [fields.X, fields.dX_dtau, fields.dX_domega]
    else:
        arrs = [fields]
    X = arrs[0]
    dt = np.dtype(dtype).newbyteorder("<")
    if dt.kind != "c" or dt.itemsize not in _DTYPES:
        raise ValueError("dtype must be complex64 or complex128")
    K, N = X.shape
    h = (X.bank_hash or "").encode("ascii")[:16].ljust(16, b"\0")
    head = _HEADER.pack(MAGIC, VERSION, K, N, len(arrs), int(X.analytic), dt.itemsize,
                        float(X.sample_rate), h)
    with open(path, "wb") as fh:
        fh.write(head)
        for a in arrs:
            fh.write(np.ascontiguousarray(a.data, dtype=dt).tobytes())


def read_field(path):
    """Read a container written by :func:`write_field`.

    Returns a :class:`TFField` for one stored field, otherwise
    :class:`DerivedFields`.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataFormatError(f"{path}: file is {len(raw)} bytes, shorter than the "
                              f"{_HEADER.size}-byte header")
    magic, ver, K, N, nf, flags, isz, fs, h = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r} at byte 0")
    if ver != VERSION:
        raise DataFormatError(f"{path}: unsupported version {ver} at byte 8")
    if isz not in _DTYPES:
        raise DataFormatError(f"{path}: bad item size {isz} at byte 22")
    if nf not in (1, 3):
        raise DataFormatError(f"{path}: expected 1 or 3 fields, header says {nf}")
    need = _HEADER.size + nf * K * N * isz
    if len(raw) != need:
        raise DataFormatError(f"{path}: payload size mismatch, expected {need} bytes, got {len(raw)}")
    data = np.frombuffer(raw, dtype=_DTYPES[isz], offset=_HEADER.size).reshape(nf, K, N)
    if not np.all(np.isfinite(data)):
        raise DataFormatError(f"{path}: payload contains non-finite values")
    bank_hash = h.rstrip(b"\0").decode("ascii")
    out = [TFField(d.astype(complex), fs, bank_hash, bool(flags & 1)) for d in data]
    return out[0] if nf == 1 else DerivedFields(*out)


def field_to_csv(path, X: TFField, freqs_hz) -> None:
    """Long-format CSV: ``channel_hz,time_s,re,im,mag_db`` (floor -120 dB)."""
    K, N = X.shape
    f = np.repeat(np.asarray(freqs_hz, dtype=float), N)
    t = np.tile(X.times, K)
    d = X.data.ravel()
    table = np.column_stack([f, t, d.real, d.imag, X.magnitude_db().ravel()])
    np.savetxt(path, table, delimiter=",", fmt="%.9g", header="channel_hz,time_s,re,im,mag_db",
               comments="")


def write_csv_columns(path, columns: dict, fmt: str = "%.10g") -> None:
    """Write equal-length named columns to CSV with a header row."""
    names = list(columns)
    arr = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    np.savetxt(path, arr, delimiter=",", fmt=fmt, header=",".join(names), comments="")


# signals ---------------------------------------------------------------


def read_signal(path, sample_rate: float | None = None):
    """Read a mono WAV (PCM16 or float32) or one-column CSV.

    CSV files carry no rate; ``sample_rate`` must then be supplied.
    Returns ``(samples, sample_rate)``.
    """
    path = Path(path)
    if path.suffix.lower() == ".wav":
        try:
            fs, x = wavfile.read(path)
        except (ValueError, EOFError) as err:
            raise DataFormatError(f"{path}: unreadable WAV ({err})") from None
        if x.ndim != 1:
            raise DataFormatError(f"{path}: expected mono audio, found {x.shape[1]} channels")
        if x.dtype == np.int16:
            x = x.astype(float) / 32768.0
        elif x.dtype == np.float32:
            x = x.astype(float)
        else:
            raise DataFormatError(f"{path}: unsupported WAV sample type {x.dtype}")
        return x, float(fs)
    if sample_rate is None:
        raise DataFormatError(f"{path}: CSV input needs an explicit sample rate")
    return _read_csv_signal(path), float(sample_rate)


def _read_csv_signal(path: Path) -> np.ndarray:
    vals = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            cells = s.split(",")
            if len(cells) != 1:
                raise DataFormatError(f"{path}:{lineno}: expected one column, found {len(cells)}")
            try:
                vals.append(float(cells[0]))
            except ValueError:
                if not vals and lineno == 1:
                    continue  # header
                raise DataFormatError(f"{path}:{lineno}: not a number: {cells[0]!r}") from None
    if not vals:
        raise DataFormatError(f"{path}: no samples")
    return np.array(vals)


def write_signal(path, x, sample_rate: float, fmt: str = "float32") -> None:
    """Write a real mono signal as WAV (``pcm16``/``float32``) or CSV by suffix."""
    path = Path(path)
    x = np.real(np.asarray(x))
    if path.suffix.lower() == ".wav":
        if fmt == "pcm16":
            if np.max(np.abs(x), initial=0) > 1:
                raise ValueError("PCM16 output needs samples within [-1, 1]")
            # same 1/32768 scale as the reader; +1.0 clips to 32767
            data = np.clip(np.round(x * 32768), -32768, 32767).astype(np.int16)
        elif fmt == "float32":
            data = x.astype(np.float32)
        else:
            raise ValueError("WAV format must be 'pcm16' or 'float32'")
        if int(sample_rate) != sample_rate:
            raise ValueError("WAV needs an integer sample rate")
        wavfile.write(path, int(sample_rate), data)
    else:
        np.savetxt(path, x, fmt="%.10g")
