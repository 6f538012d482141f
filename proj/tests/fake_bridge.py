#!/usr/bin/env python3
"""Stand-in oracle bridge for protocol tests (standard library only).

Modes (first argument):
  serve      well-behaved bridge
  silent     never answers
  garbage    answers every request with malformed JSON
  crash      exits with status 3 on the first non-hello request
  refuse     answers every request with ok = false
  escape     returns an output path outside the workspace
"""

import json
import struct
import sys
import time
import zlib

ALPHA_BARS = []
_a = 1.0
for _t in range(1, 1001):
    _beta = 1e-4 + (2e-2 - 1e-4) * (_t - 1) / 999
    _a *= 1.0 - _beta
    ALPHA_BARS.append(_a)


def png_size(path):
    with open(path, "rb") as f:
        head = f.read(24)
    return struct.unpack(">II", head[16:24])


def write_png(path, width, height, rgb):
    raw = b"".join(b"\x00" + bytes(rgb) * width for _ in range(height))

    def chunk(kind, data):
        body = kind + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    with open(path, "wb") as f:
        f.write(b"\x89PNG\r\n\x1a\n")
        f.write(chunk(b"IHDR", struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)))
        f.write(chunk(b"IDAT", zlib.compress(raw)))
        f.write(chunk(b"IEND", b""))


def write_pfm(path, width, height, channels, value):
    with open(path, "wb") as f:
        f.write(("PF\n" if channels == 3 else "Pf\n").encode())
        f.write(f"{width} {height}\n-1.0\n".encode())
        f.write(struct.pack("<f", value) * (width * height * channels))


def write_npy(path, shape, fill):
    header = "{'descr': '<f4', 'fortran_order': False, 'shape': (%s), }" % ", ".join(str(d) for d in shape)
    pad = 64 - (10 + len(header) + 1) % 64
    header = header + " " * (pad % 64) + "\n"
    count = 1
    for d in shape:
        count *= d
    with open(path, "wb") as f:
        f.write(b"\x93NUMPY\x01\x00" + struct.pack("<H", len(header)) + header.encode())
        f.write(b"".join(struct.pack("<f", fill(i)) for i in range(count)))


def handle(req):
    kind = req.get("kind")
    rid = req.get("id")
    inputs = req.get("inputs", {})
    params = req.get("params", {})
    if kind == "echo":
        return {"id": rid, "ok": True, "outputs": params}
    if kind == "edit":
        # Hand back the coarse file untouched so byte preservation is checkable.
        out = "out_%s.png" % rid
        with open(inputs["coarse"], "rb") as src, open(out, "wb") as dst:
            dst.write(src.read())
        return {"id": rid, "ok": True, "outputs": {"image": out}}
    if kind == "edit_solid":
        w, h = png_size(inputs["coarse"])
        out = "solid_%s.png" % rid
        write_png(out, w, h, [10, 200, 30])
        return {"id": rid, "ok": True, "outputs": {"image": out}}
    if kind == "predict_noise":
        w, h = png_size(inputs["image"])
        out = "noise_%s.npy" % rid
        bump = 1.0 if params.get("prompt") else 0.0
        write_npy(out, (4, h, w), lambda i: 0.25 * (i % 7) + (bump if i < w * h else 0.0))
        return {"id": rid, "ok": True, "outputs": {"noise": out}}
    if kind == "disparity":
        w, h = png_size(inputs["image"])
        out = "disp_%s.pfm" % rid
        write_pfm(out, w, h, 1, 0.5)
        return {"id": rid, "ok": True, "outputs": {"disparity": out}}
    if kind == "perceptual":
        result = {"value": 0.125}
        if params.get("gradient"):
            with open(inputs["rendered"], "rb") as f:
                f.readline()
                w, h = (int(v) for v in f.readline().split())
            out = "grad_%s.pfm" % rid
            write_pfm(out, w, h, 3, 0.5)
            result["grad"] = out
        return {"id": rid, "ok": True, "outputs": result}
    return {"id": rid, "ok": False, "error": "unknown kind %r" % kind}


def main():
    mode = sys.argv[1] if len(sys.argv) > 1 else "serve"
    for line in sys.stdin:
        req = json.loads(line)
        if req.get("kind") == "hello":
            reply = {"id": req.get("id"), "kind": "hello", "alpha_bars": ALPHA_BARS, "model": "fake"}
        elif mode == "silent":
            time.sleep(30)
            continue
        elif mode == "garbage":
            sys.stdout.write("{not json\n")
            sys.stdout.flush()
            continue
        elif mode == "crash":
            sys.exit(3)
        elif mode == "refuse":
            reply = {"id": req.get("id"), "ok": False, "error": "model unavailable"}
        elif mode == "escape":
            reply = {"id": req.get("id"), "ok": True, "outputs": {"image": "../outside.png"}}
        else:
            reply = handle(req)
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
