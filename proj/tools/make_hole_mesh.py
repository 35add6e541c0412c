#!/usr/bin/env python3
"""Generate the unit-square-minus-[4/9,5/9]^2 fixture with Shewchuk's Triangle.

Outer boundary edges get marker 1, hole edges marker 2.
Usage: make_hole_mesh.py OUT [--max-area A]
"""
import argparse

import numpy as np
import triangle


def polygon(x0, y0, x1, y1, n):
    t = np.linspace(0.0, 1.0, n + 1)[:-1]
    sides = [
        np.column_stack([x0 + (x1 - x0) * t, np.full_like(t, y0)]),
        np.column_stack([np.full_like(t, x1), y0 + (y1 - y0) * t]),
        np.column_stack([x1 - (x1 - x0) * t, np.full_like(t, y1)]),
        np.column_stack([np.full_like(t, x0), y1 - (y1 - y0) * t]),
    ]
    return np.vstack(sides)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--max-area", type=float, default=1.7e-4)
    ap.add_argument("--outer-segments", type=int, default=50)
    ap.add_argument("--hole-segments", type=int, default=6)
    args = ap.parse_args()

    outer = polygon(0.0, 0.0, 1.0, 1.0, args.outer_segments)
    hole = polygon(4 / 9, 4 / 9, 5 / 9, 5 / 9, args.hole_segments)
    no, nh = len(outer), len(hole)
    seg_o = [[i, (i + 1) % no] for i in range(no)]
    seg_h = [[no + i, no + (i + 1) % nh] for i in range(nh)]
    pslg = {
        "vertices": np.vstack([outer, hole]),
        "segments": np.array(seg_o + seg_h),
        "segment_markers": np.array([1] * no + [2] * nh),
        "holes": np.array([[0.5, 0.5]]),
    }
    mesh = triangle.triangulate(pslg, f"pq30a{args.max_area}")

    v = mesh["vertices"]
    tri = mesh["triangles"]
    seg = mesh["segments"]
    mk = mesh["segment_markers"].ravel()
    with open(args.out, "w") as f:
        f.write("# unit square minus [4/9,5/9]^2; markers: 1 outer, 2 hole\n")
        f.write(f"# generated by tools/make_hole_mesh.py (Triangle, switches pq30a{args.max_area})\n")
        f.write(f"{len(v)} {len(tri)} {len(seg)}\n")
        for x, y in v:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for a, b, c in tri:
            ax, ay = v[a]
            bx, by = v[b]
            cx, cy = v[c]
            if (bx - ax) * (cy - ay) - (by - ay) * (cx - ax) < 0:
                b, c = c, b
            f.write(f"{a} {b} {c}\n")
        for (a, b), m in zip(seg, mk):
            f.write(f"{a} {b} {m}\n")


if __name__ == "__main__":
    main()
