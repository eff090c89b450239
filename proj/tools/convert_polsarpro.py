#!/usr/bin/env python3
"""Convert PolSARpro-style binary directories and a ground-truth index image
into the PTC1 / PLBL1 files read by polsar_cli.

Supported inputs:
  S2 directory: s11.bin s12.bin s21.bin s22.bin (complex64, interleaved re/im)
  T3 directory: T11.bin T22.bin T33.bin T12_real.bin T12_imag.bin ... (float32)
Both need config.txt with Nrow / Ncol. Ground truth is a .npy array or an
8/16-bit PNG of class ids (0 = unlabeled).

Vendor distributions (AIRSAR stokes, ESAR, EMISAR) must first be exported to
one of these layouts with PolSARpro or similar; no proprietary parsing here.
"""

import argparse
import struct
import sys
from pathlib import Path

import numpy as np


def read_config(d: Path):
    lines = [l.strip() for l in (d / "config.txt").read_text().splitlines()]
    rows = int(lines[lines.index("Nrow") + 1])
    cols = int(lines[lines.index("Ncol") + 1])
    return rows, cols


def read_plane(path: Path, rows, cols, dtype):
    a = np.fromfile(path, dtype=dtype)
    if a.size != rows * cols:
        sys.exit(f"{path}: expected {rows * cols} values, found {a.size}")
    return a.reshape(rows, cols)


def planes_from_dir(d: Path):
    rows, cols = read_config(d)
    if (d / "s11.bin").exists():
        s = {k: read_plane(d / f"{k}.bin", rows, cols, "<c8") for k in ("s11", "s12", "s21", "s22")}
        hv = 0.5 * (s["s12"] + s["s21"])  # reciprocity
        out = [("ReSHH", s["s11"].real), ("ImSHH", s["s11"].imag),
               ("ReSHV", hv.real), ("ImSHV", hv.imag),
               ("ReSVV", s["s22"].real), ("ImSVV", s["s22"].imag)]
    elif (d / "T11.bin").exists():
        f = lambda n: read_plane(d / f"{n}.bin", rows, cols, "<f4")
        out = [("T11", f("T11")), ("T22", f("T22")), ("T33", f("T33"))]
        for ij in ("12", "13", "23"):
            out += [(f"ReT{ij}", f(f"T{ij}_real")), (f"ImT{ij}", f(f"T{ij}_imag"))]
    else:
        sys.exit(f"{d}: neither s11.bin nor T11.bin found")
    return rows, cols, out


def write_ptc1(path: Path, rows, cols, planes):
    with open(path, "wb") as fh:
        fh.write(b"PTC1" + struct.pack("<IIB", rows, cols, len(planes)))
        for name, _ in planes:
            fh.write(name.encode() + b"\0")
        for _, p in planes:
            fh.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def write_plbl1(path: Path, labels, names):
    with open(path, "wb") as fh:
        fh.write(b"PLBL1" + struct.pack("<IIH", labels.shape[0], labels.shape[1], len(names)))
        for n in names:
            fh.write(n.encode() + b"\0")
        fh.write(np.ascontiguousarray(labels, dtype="<u2").tobytes())


def load_labels(path: Path):
    if path.suffix == ".npy":
        return np.load(path)
    from PIL import Image
    return np.array(Image.open(path))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("input_dir", type=Path)
    ap.add_argument("--labels", type=Path, help="ground-truth class id image (.npy or .png)")
    ap.add_argument("--class-names", help="comma-separated names, class 1 first")
    ap.add_argument("--out", type=Path, default=Path("."))
    a = ap.parse_args()

    rows, cols, planes = planes_from_dir(a.input_dir)
    a.out.mkdir(parents=True, exist_ok=True)
    write_ptc1(a.out / "scene.ptc1", rows, cols, planes)
    print(f"wrote {a.out / 'scene.ptc1'}: {rows}x{cols}, planes {[n for n, _ in planes]}")

    if a.labels:
        lab = load_labels(a.labels)
        if lab.ndim != 2 or lab.shape != (rows, cols):
            sys.exit(f"labels are {lab.shape}, raster is {(rows, cols)}")
        c = int(lab.max())
        names = a.class_names.split(",") if a.class_names else [f"class{i}" for i in range(1, c + 1)]
        if len(names) < c:
            sys.exit(f"labels use {c} classes but only {len(names)} names were given")
        write_plbl1(a.out / "labels.plbl1", lab.astype(np.uint16), names)
        print(f"wrote {a.out / 'labels.plbl1'}: {len(names)} classes")


if __name__ == "__main__":
    main()
