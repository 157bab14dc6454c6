"""Versioned instance container.

Layout::

    PROXRATE-INST-v1\\n
    kind = lasso\\n
    scalar lam = 0.1\\n              (repr of the float64, informational)
    array A = 50 100\\n              (shape; payload order follows these lines)
    end\\n
    <raw payload>

Every scalar and array is stored in the payload as little-endian IEEE 754
float64, so loading is bit-exact; the decimal text in scalar lines is for
humans and is ignored on load.  Scalars come first in the payload, then
arrays, each in header order.
"""

from __future__ import annotations

import os

import numpy as np

from ..analysis import Reference
from ..exceptions import FormatError
from .deblur import DeblurInstance
from .lasso import LassoInstance

MAGIC = b"PROXRATE-INST-v1"
_F64 = np.dtype("<f8")


def _fields(instance):
    if isinstance(instance, LassoInstance):
        scalars = {"lam": instance.lam, "L": instance.L}
        arrays = {"A": instance.A, "b": instance.b}
        if instance.planted is not None:
            arrays["planted"] = instance.planted
        ref = instance.reference
        if ref is not None:
            scalars["phi_star"] = ref.phi_star
            scalars["certified_eps"] = ref.certified_eps
            arrays["x_star"] = ref.x_star
        return "lasso", scalars, arrays
    if isinstance(instance, DeblurInstance):
        scalars = {"lam": instance.lam, "L": instance.L}
        h, w = instance.image_shape
        arrays = {"kernel": instance.kernel,
                  "observed": np.reshape(instance.observed, (h, w))}
        if instance.clean is not None:
            arrays["clean"] = instance.clean
        return "deblur", scalars, arrays
    raise TypeError(f"cannot store {type(instance).__name__}")


def dumps_instance(instance) -> bytes:
    kind, scalars, arrays = _fields(instance)
    lines = [MAGIC.decode(), f"kind = {kind}"]
    lines += [f"scalar {k} = {float(v)!r}" for k, v in scalars.items()]
    lines += [f"array {k} = " + " ".join(str(n) for n in np.shape(v)) for k, v in arrays.items()]
    lines.append("end")
    payload = [np.asarray(list(scalars.values()), dtype=_F64).tobytes()]
    payload += [np.ascontiguousarray(v, dtype=_F64).tobytes() for v in arrays.values()]
    return ("\n".join(lines) + "\n").encode("ascii") + b"".join(payload)


def loads_instance(data: bytes):
    if not data.startswith(MAGIC + b"\n"):
        raise FormatError(f"missing magic {MAGIC.decode()!r}", 0)
    pos = len(MAGIC) + 1
    kind = None
    scalar_names, array_specs = [], []
    while True:
        end = data.find(b"\n", pos)
        if end < 0:
            raise FormatError("header not terminated by 'end'", pos)
        try:
            line = data[pos:end].decode("ascii").strip()
        except UnicodeDecodeError:
            raise FormatError("non-ASCII header line", pos) from None
        if line == "end":
            pos = end + 1
            break
        head, sep, value = line.partition("=")
        words = head.split()
        if not sep or not words:
            raise FormatError(f"malformed header line {line!r}", pos)
        if words == ["kind"]:
            kind = value.strip()
        elif words[0] == "scalar" and len(words) == 2:
            scalar_names.append(words[1])
        elif words[0] == "array" and len(words) == 2:
            try:
                shape = tuple(int(n) for n in value.split())
            except ValueError:
                raise FormatError(f"bad array shape in {line!r}", pos) from None
            if any(n < 0 for n in shape):
                raise FormatError(f"negative array extent in {line!r}", pos)
            array_specs.append((words[1], shape))
        else:
            raise FormatError(f"unknown header line {line!r}", pos)
        pos = end + 1

    def take(count):
        nonlocal pos
        need = count * _F64.itemsize
        if len(data) - pos < need:
            raise FormatError(f"truncated payload: need {need} bytes", len(data))
        out = np.frombuffer(data, dtype=_F64, count=count, offset=pos).astype(np.float64)
        pos += need
        return out

    scalars = dict(zip(scalar_names, (float(v) for v in take(len(scalar_names)))))
    arrays = {}
    for name, shape in array_specs:
        arr = take(int(np.prod(shape, dtype=np.int64))).reshape(shape)
        arr.setflags(write=False)
        arrays[name] = arr
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after payload", pos)
    try:
        return _build(kind, scalars, arrays)
    except KeyError as exc:
        raise FormatError(f"missing field {exc.args[0]!r} for kind {kind!r}", 0) from None


def _build(kind, scalars, arrays):
    if kind == "lasso":
        ref = None
        if "x_star" in arrays:
            ref = Reference(arrays["x_star"], scalars["phi_star"], scalars["certified_eps"])
        return LassoInstance(A=arrays["A"], b=arrays["b"], lam=scalars["lam"],
                             L=scalars["L"], planted=arrays.get("planted"), reference=ref)
    if kind == "deblur":
        obs = arrays["observed"]
        flat = obs.reshape(-1)
        flat.setflags(write=False)
        return DeblurInstance(kernel=arrays["kernel"], observed=flat, lam=scalars["lam"],
                              image_shape=obs.shape, L=scalars["L"], clean=arrays.get("clean"))
    raise FormatError(f"unknown instance kind {kind!r}", 0)


def save_instance(instance, path) -> None:
    data = dumps_instance(instance)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load_instance(path):
    with open(path, "rb") as fh:
        return loads_instance(fh.read())
