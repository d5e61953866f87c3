#!/usr/bin/env python3
"""Independent dense reference for `ipsim oracle`.

Reads the same image, weight bank, mask and JSON config, and writes
features as CSV (frame,patch,vector,value) computed as

    b_v + fsum(W[v, i] * P_i) / N

with exactly rounded sums. Covers the no-antialias, no-offset subset of the
configuration. Standard library only.
"""

import argparse
import json
import math
import struct
import sys

CELLS = {
    "RGGB": ((0, 1), (1, 2)),
    "BGGR": ((2, 1), (1, 0)),
    "GRBG": ((1, 0), (2, 1)),
    "GBRG": ((1, 2), (0, 1)),
    "MONO": ((1, 1), (1, 1)),
}


def read_pnm(path):
    data = open(path, "rb").read()
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        sys.exit(f"{path}: only binary PGM/PPM is supported")
    channels = 3 if magic == b"P6" else 1
    pos, fields = 2, []
    while len(fields) < 3:
        c = data[pos:pos + 1]
        if c == b"#":
            while data[pos:pos + 1] not in (b"\n", b""):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while data[pos:pos + 1].isdigit():
                pos += 1
            fields.append(int(data[start:pos]))
    pos += 1
    w, h, maxval = fields
    size = 2 if maxval > 255 else 1
    fmt = ">H" if size == 2 else ">B"
    raw = [struct.unpack_from(fmt, data, pos + i * size)[0] / maxval
           for i in range(w * h * channels)]
    if channels == 1:
        return w, h, [(v, v, v) for v in raw]
    return w, h, [tuple(raw[3 * i:3 * i + 3]) for i in range(w * h)]


def read_bank(path):
    data = open(path, "rb").read()
    if data[:4] != b"IPWB":
        sys.exit(f"{path}: not a weight bank")
    _version, m, cols, _flags = struct.unpack_from("<HIIB", data, 4)
    off = 4 + 2 + 4 + 4 + 1
    w = struct.unpack_from(f"<{m * cols}f", data, off)
    off += 4 * m * cols
    b = struct.unpack_from(f"<{m}f", data, off)
    return m, cols, list(w), list(b)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config")
    ap.add_argument("--input", required=True)
    ap.add_argument("--weights", required=True)
    ap.add_argument("--mask", required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    cfg = json.load(open(args.config)) if args.config else {}
    if cfg.get("antialias_cutoff") is not None:
        sys.exit("antialias is not covered by this reference")
    tiling = cfg.get("tiling", {})
    if tiling.get("vector_offsets"):
        sys.exit("vector offsets are not covered by this reference")
    pw, ph = tiling.get("patch_w", 32), tiling.get("patch_h", 32)
    ox, oy = tiling.get("origin_x", 0), tiling.get("origin_y", 0)
    exp = cfg.get("exposure", {})
    k = exp.get("gain", 1000.0) * exp.get("fill_factor", 1.0) * exp.get("t_exposure", 1e-3)
    v_dark, v_sat = exp.get("V_dark", 0.0), exp.get("V_sat", 1.0)
    cell = CELLS[cfg.get("pattern", "RGGB")]

    w, h, rgb = read_pnm(args.input)
    m, cols, weights, bias = read_bank(args.weights)
    mask = [line.strip() == "1" for line in open(args.mask) if line.strip()]

    clamp = lambda v: min(max(v, 0.0), v_sat)
    reset = clamp(v_dark)
    pix = [clamp(clamp(v_dark + k * rgb[y * w + x][cell[y % 2][x % 2]]) - reset)
           for y in range(h) for x in range(w)]

    gx, gy = (w - ox) // pw, (h - oy) // ph
    if len(mask) != gx * gy or cols != pw * ph:
        sys.exit("shape mismatch")
    n = pw * ph
    with open(args.out, "w") as f:
        f.write("frame,patch,vector,value\n")
        for p, keep in enumerate(mask):
            if not keep:
                continue
            x0, y0 = ox + (p % gx) * pw, oy + (p // gx) * ph
            patch = [pix[(y0 + y) * w + x0 + x] for y in range(ph) for x in range(pw)]
            for v in range(m):
                row = weights[v * n:(v + 1) * n]
                val = bias[v] + math.fsum(a * b for a, b in zip(row, patch)) / n
                f.write(f"0,{p},{v},{val!r}\n")


if __name__ == "__main__":
    main()
