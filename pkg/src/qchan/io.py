"""JSON file formats for channels, schemes, matrices and decompositions.

Complex entries are ``[re, im]`` pairs. Floats are written with Python's
shortest round-trip representation, so ``load(dump(x))`` reproduces every
double bit for bit and re-dumping yields identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .channel import KrausChannel, is_trace_preserving
from .encryption import RandomizationScheme
from .invertibility import UnitaryAncillaForm

FORMAT_VERSION = 1
SCHEME_PROB_TOL = 1e-9


class ParseError(ValueError):
    """Malformed input; ``location`` names the file position or JSON path."""

    def __init__(self, message: str, location: str = "$"):
        super().__init__(f"{location}: {message}")
        self.location = location


class InvalidChannelError(ValueError):
    """Well-formed file that does not describe a consistent channel."""


def _reject_constant(name: str):
    raise ValueError(f"non-finite number {name} is not allowed")


def loads(text: str, source: str = "<string>") -> Any:
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{source}:{exc.lineno}:{exc.colno}") from None
    except ValueError as exc:
        raise ParseError(str(exc), source) from None


def load_json(path) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file ({exc.strerror})", str(path)) from None
    return loads(text, str(path))


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_json(path, obj: Any) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def matrix_to_json(m) -> list:
    a = np.asarray(m, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(obj: Any, where: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise ParseError("expected a non-empty list of rows", where)
    rows = []
    width = None
    for r, row in enumerate(obj):
        if not isinstance(row, list) or not row:
            raise ParseError("expected a non-empty row", f"{where}[{r}]")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"row has {len(row)} entries, expected {width}", f"{where}[{r}]")
        vals = []
        for c, z in enumerate(row):
            if (
                not isinstance(z, list)
                or len(z) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in z)
            ):
                raise ParseError("expected an [re, im] pair of numbers", f"{where}[{r}][{c}]")
            vals.append(complex(float(z[0]), float(z[1])))
        rows.append(vals)
    return np.array(rows, dtype=np.complex128)


def _field(obj: dict, key: str, kind, where: str, required: bool = True):
    if key not in obj:
        if required:
            raise ParseError(f"missing field {key!r}", where)
        return None
    val = obj[key]
    ok = isinstance(val, kind) and not (kind is int and isinstance(val, bool))
    if kind is float:
        ok = isinstance(val, (int, float)) and not isinstance(val, bool)
    if not ok:
        raise ParseError(f"field {key!r} has the wrong type", f"{where}.{key}")
    return val


def _check_header(obj: Any, kind: str, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", where)
    version = _field(obj, "format_version", int, where)
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {version}", f"{where}.format_version")
    found = obj.get("kind", kind)
    if found != kind:
        raise ParseError(f"expected kind {kind!r}, found {found!r}", f"{where}.kind")
    return obj


def channel_to_json(e: KrausChannel, name: str | None = None) -> dict:
    tp, _ = is_trace_preserving(e)
    out = {
        "format_version": FORMAT_VERSION,
        "kind": "channel",
        "dim_in": e.dim_in,
        "dim_out": e.dim_out,
    }
    label = name or e.name
    if label:
        out["name"] = label
    out["trace_preserving"] = bool(tp)
    out["kraus"] = [matrix_to_json(a) for a in e.kraus]
    return out


def channel_from_json(obj: Any, where: str = "$") -> KrausChannel:
    obj = _check_header(obj, "channel", where)
    p = _field(obj, "dim_in", int, where)
    q = _field(obj, "dim_out", int, where)
    if p < 1 or q < 1:
        raise InvalidChannelError(f"{where}: dimensions must be positive")
    name = _field(obj, "name", str, where, required=False)
    _field(obj, "trace_preserving", bool, where, required=False)
    kraus = _field(obj, "kraus", list, where)
    if not kraus:
        raise InvalidChannelError(f"{where}.kraus: at least one Kraus operator is required")
    ops = [matrix_from_json(k, f"{where}.kraus[{i}]") for i, k in enumerate(kraus)]
    try:
        return KrausChannel(ops, p, q, name=name)
    except ValueError as exc:
        raise InvalidChannelError(f"{where}: {exc}") from None


def load_channel(path) -> KrausChannel:
    return channel_from_json(load_json(path), "$")


def load_matrix(path) -> np.ndarray:
    obj = load_json(path)
    if isinstance(obj, dict):
        obj = _check_header(obj, "matrix", "$")
        return matrix_from_json(_field(obj, "matrix", list, "$"), "$.matrix")
    return matrix_from_json(obj, "$")


def matrix_file_json(m) -> dict:
    return {"format_version": FORMAT_VERSION, "kind": "matrix", "matrix": matrix_to_json(m)}


def scheme_to_json(s: RandomizationScheme) -> dict:
    out: dict[str, Any] = {"format_version": FORMAT_VERSION, "kind": "scheme"}
    if s.name:
        out["name"] = s.name
    n = s.n_qubits
    if n is not None:
        out["n_qubits"] = n
    else:
        out["dim_in"] = s.dim_in
    out["dim_out"] = s.dim_out
    keys = []
    for idx, (prob, c) in enumerate(s.keys):
        entry: dict[str, Any] = {"prob": prob, "channel": channel_to_json(c)}
        if s.ground_truth is not None:
            u, omega = s.ground_truth[idx]
            entry["ground_truth"] = {"u": matrix_to_json(u), "omega": matrix_to_json(omega)}
        keys.append(entry)
    out["keys"] = keys
    return out


def scheme_from_json(obj: Any, base_dir: Path | None = None, tol: float = 1e-9) -> RandomizationScheme:
    """Parse a scheme document.

    Key channels are either inline channel objects or paths, resolved
    relative to ``base_dir``. Raises :class:`~qchan.encryption.InvalidKeyError`
    when a key channel is not invertible.
    """
    where = "$"
    obj = _check_header(obj, "scheme", where)
    n = _field(obj, "n_qubits", int, where, required=False)
    d = _field(obj, "dim_in", int, where, required=False)
    if n is None and d is None:
        raise ParseError("one of 'n_qubits' or 'dim_in' is required", where)
    if n is not None:
        if d is not None and d != 2**n:
            raise ParseError(f"dim_in {d} contradicts n_qubits {n}", f"{where}.dim_in")
        d = 2**n
    name = _field(obj, "name", str, where, required=False)
    entries = _field(obj, "keys", list, where)
    if not entries:
        raise ParseError("at least one key is required", f"{where}.keys")
    keys = []
    truth = []
    for i, entry in enumerate(entries):
        loc = f"{where}.keys[{i}]"
        if not isinstance(entry, dict):
            raise ParseError("expected a key object", loc)
        prob = float(_field(entry, "prob", float, loc))
        ref = entry.get("channel")
        if isinstance(ref, str):
            path = Path(ref)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            channel = channel_from_json(load_json(path), f"{path}:$")
        elif isinstance(ref, dict):
            channel = channel_from_json(ref, f"{loc}.channel")
        else:
            raise ParseError("channel must be an inline object or a file path", f"{loc}.channel")
        if channel.dim_in != d:
            raise InvalidChannelError(f"{loc}: channel input dimension {channel.dim_in} != {d}")
        gt = entry.get("ground_truth")
        if gt is not None:
            if not isinstance(gt, dict):
                raise ParseError("ground_truth must be an object", f"{loc}.ground_truth")
            truth.append(
                (
                    matrix_from_json(_field(gt, "u", list, f"{loc}.ground_truth"), f"{loc}.ground_truth.u"),
                    matrix_from_json(
                        _field(gt, "omega", list, f"{loc}.ground_truth"), f"{loc}.ground_truth.omega"
                    ),
                )
            )
        keys.append((prob, channel))
    total = sum(p for p, _ in keys)
    if abs(total - 1.0) > SCHEME_PROB_TOL:
        raise ParseError(f"key probabilities sum to {total:.17g}, expected 1", f"{where}.keys")
    ground_truth = truth if len(truth) == len(keys) else None
    return RandomizationScheme.build(
        keys, ground_truth, name=name, prob_tol=SCHEME_PROB_TOL, tol=tol
    )


def load_scheme(path, tol: float = 1e-9) -> RandomizationScheme:
    path = Path(path)
    return scheme_from_json(load_json(path), path.parent, tol)


def form_to_json(form: UnitaryAncillaForm, inverse: KrausChannel | None = None) -> dict:
    out = {
        "format_version": FORMAT_VERSION,
        "kind": "unitary_ancilla_form",
        "p": form.p,
        "q": form.q,
        "ancilla_dim": form.ancilla_dim,
        "support_size": form.support_size,
        "reconstruction_error": form.reconstruction_error,
        "embed_map": form.embed_map.tolist(),
        "u": matrix_to_json(form.u),
        "omega": matrix_to_json(form.omega),
    }
    if inverse is not None:
        out["inverse"] = channel_to_json(inverse)
    return out


def form_from_json(obj: Any) -> tuple[UnitaryAncillaForm, KrausChannel | None]:
    where = "$"
    obj = _check_header(obj, "unitary_ancilla_form", where)
    p = _field(obj, "p", int, where)
    q = _field(obj, "q", int, where)
    anc = _field(obj, "ancilla_dim", int, where)
    support = _field(obj, "support_size", int, where)
    err = float(_field(obj, "reconstruction_error", float, where, required=False) or 0.0)
    emb = np.array(_field(obj, "embed_map", list, where), dtype=int)
    if emb.shape != (p, anc):
        raise ParseError(f"embed_map has shape {emb.shape}, expected {(p, anc)}", f"{where}.embed_map")
    u = matrix_from_json(_field(obj, "u", list, where), f"{where}.u")
    omega = matrix_from_json(_field(obj, "omega", list, where), f"{where}.omega")
    form = UnitaryAncillaForm(p, q, anc, support, u, omega, emb, reconstruction_error=err)
    inverse = obj.get("inverse")
    return form, (channel_from_json(inverse, f"{where}.inverse") if inverse is not None else None)
