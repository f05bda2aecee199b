"""Reconstruction of a 77-bus urban MV test network.

Published generic-network data omit cable impedances, so this builds a
plausible stand-in: a 33 kV source, two parallel 33/11 kV transformers with
a 2.5% boost tap, an 11 kV busbar and 75 load buses on six radial cable
feeders. Spans average 0.75 km of 300 mm^2 aluminium XLPE cable.

``python -m lvgen.powerflow.fixture`` rewrites the shipped network file.
"""
from __future__ import annotations

import sys

import numpy as np

from .network import Bus, Line, NetworkModel, Transformer, fixture_path, format_network

BASE_MVA = 10.0
KV_HV, KV_MV = 33.0, 11.0
FEEDER_SIZES = (13, 13, 13, 12, 12, 12)
# laterals branch off the trunk at this position and collect the last buses
LATERAL_AT = 4
LATERAL_LEN = 5
R_OHM_KM, X_OHM_KM, C_UF_KM = 0.100, 0.080, 0.40
TRAFO_MVA, TRAFO_Z, TRAFO_XR, TRAFO_TAP = 24.0, 0.18, 20.0, 0.975


def span_lengths(n: int, seed: int = 77) -> np.ndarray:
    """Span lengths in km, drawn from [0.5, 1.0] and rescaled to mean 0.75."""
    x = np.random.default_rng(seed).uniform(0.5, 1.0, n)
    return np.round(x * 0.75 / x.mean(), 4)


def build_fixture() -> NetworkModel:
    z_base = KV_MV ** 2 / BASE_MVA
    omega = 2 * np.pi * 50.0
    buses = [Bus(0, KV_HV, "slack"), Bus(1, KV_MV, "PQ")]
    z = TRAFO_Z * BASE_MVA / TRAFO_MVA
    r = z / np.hypot(1.0, TRAFO_XR)
    trafos = [Transformer(f"T{k}", 0, 1, round(r, 6), round(r * TRAFO_XR, 6), TRAFO_TAP) for k in (1, 2)]
    spans = span_lengths(sum(FEEDER_SIZES))
    lines = []
    nxt, s = 2, 0
    for f, size in enumerate(FEEDER_SIZES, 1):
        trunk = size - LATERAL_LEN
        feeder = list(range(nxt, nxt + size))
        nxt += size
        for pos, bus in enumerate(feeder):
            buses.append(Bus(bus, KV_MV, "PQ"))
            if pos == 0:
                parent = 1
            elif pos == trunk:
                parent = feeder[LATERAL_AT - 1]
            else:
                parent = bus - 1
            km = float(spans[s])
            s += 1
            lines.append(Line(
                f"F{f}-{pos + 1}", parent, bus,
                round(R_OHM_KM * km / z_base, 7),
                round(X_OHM_KM * km / z_base, 7),
                round(omega * C_UF_KM * 1e-6 * km * z_base, 8),
            ))
    return NetworkModel(tuple(buses), tuple(lines), tuple(trafos), BASE_MVA, 0.97, 1.03, "ukgds77")


def main(argv=None) -> int:
    path = fixture_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    header = "# 77-bus urban MV network, reconstructed; per unit on 10 MVA\n"
    path.write_text(header + format_network(build_fixture()))
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
