"""Versioned binary checkpoints for network parameters.

Layout (little-endian):
  magic   4 bytes  b"CNV1"
  n_nets  uint32
  n_scal  uint32
  per net:    name (uint16 length + utf-8), activation code uint8,
              n_layers uint32, layer sizes uint32[n_layers],
              n_params uint64, params float64[n_params]
  per scalar: name (uint16 length + utf-8), value float64
"""

import struct

import numpy as np

from .nn import Network

MAGIC = b"CNV1"
_ACT_CODES = {"linear": 0, "sigmoid": 1, "tanh": 2}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


class CheckpointError(Exception):
    pass


def _write_name(fh, name):
    raw = name.encode("utf-8")
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)


def _read_name(fh):
    (n,) = struct.unpack("<H", fh.read(2))
    return fh.read(n).decode("utf-8")


def save_checkpoint(path, networks, scalars=None):
    """Write named networks and named float scalars."""
    scalars = scalars or {}
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", len(networks), len(scalars)))
        for name, net in networks.items():
            _write_name(fh, name)
            fh.write(struct.pack("<B", _ACT_CODES[net.output_activation]))
            fh.write(struct.pack("<I", len(net.sizes)))
            fh.write(struct.pack(f"<{len(net.sizes)}I", *net.sizes))
            fh.write(struct.pack("<Q", net.n_params))
            fh.write(np.asarray(net.params, dtype="<f8").tobytes())
        for name, value in scalars.items():
            _write_name(fh, name)
            fh.write(struct.pack("<d", float(value)))


def load_checkpoint(path):
    """Read back (networks, scalars); inverse of save_checkpoint."""
    networks = {}
    scalars = {}
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise CheckpointError(f"{path}: bad magic")
        n_nets, n_scal = struct.unpack("<II", fh.read(8))
        for _ in range(n_nets):
            name = _read_name(fh)
            (act,) = struct.unpack("<B", fh.read(1))
            (n_layers,) = struct.unpack("<I", fh.read(4))
            sizes = struct.unpack(f"<{n_layers}I", fh.read(4 * n_layers))
            (n_params,) = struct.unpack("<Q", fh.read(8))
            net = Network(sizes, output_activation=_ACT_NAMES[act], seed=0)
            if net.n_params != n_params:
                raise CheckpointError(f"{path}: parameter count mismatch for {name}")
            net.params[:] = np.frombuffer(fh.read(8 * n_params), dtype="<f8")
            networks[name] = net
        for _ in range(n_scal):
            name = _read_name(fh)
            (scalars[name],) = struct.unpack("<d", fh.read(8))
    return networks, scalars
