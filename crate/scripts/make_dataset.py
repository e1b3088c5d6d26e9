#!/usr/bin/env python3
"""Deterministic synthetic handwritten-digit corpus in MNIST IDX layout.

Each sample is rendered from a per-class stroke skeleton with randomized
affine distortion, stroke width, blur and pixel noise so that classes keep
genuine confusability (1/7, 3/8/5, 4/9). Images are 28x28 uint8, labels
0..9. Output files use the standard IDX magic numbers so any MNIST reader
can consume them directly.
"""

import argparse
import struct
import numpy as np

SIZE = 28


def arc(cx, cy, rx, ry, a0_deg, a1_deg, n=22):
    t = np.linspace(np.radians(a0_deg), np.radians(a1_deg), n)
    return np.stack([cx + rx * np.cos(t), cy - ry * np.sin(t)], axis=1)


def line(*pts):
    return np.asarray(pts, dtype=float)


def skeletons(cls):
    """Return list of style variants; each variant is a list of polylines."""
    if cls == 0:
        return [
            [arc(0.50, 0.50, 0.27, 0.38, 90, 450)],
            [arc(0.50, 0.50, 0.31, 0.36, 90, 450)],
        ]
    if cls == 1:
        return [
            [line((0.36, 0.30), (0.54, 0.13), (0.54, 0.87))],
            [line((0.38, 0.28), (0.55, 0.12), (0.55, 0.86)),
             line((0.38, 0.86), (0.70, 0.86))],
        ]
    if cls == 2:
        top = arc(0.50, 0.30, 0.26, 0.18, 160, -20)
        return [
            [np.vstack([top, line((top[-1][0], top[-1][1]), (0.26, 0.84))]),
             line((0.26, 0.85), (0.78, 0.85))],
        ]
    if cls == 3:
        return [
            [arc(0.46, 0.30, 0.25, 0.18, 150, -80),
             arc(0.46, 0.67, 0.28, 0.21, 80, -150)],
        ]
    if cls == 4:
        return [
            [line((0.60, 0.10), (0.22, 0.60), (0.82, 0.60)),
             line((0.62, 0.10), (0.62, 0.90))],
            [line((0.56, 0.12), (0.26, 0.58), (0.80, 0.58)),
             line((0.64, 0.32), (0.64, 0.90))],
        ]
    if cls == 5:
        return [
            [line((0.74, 0.12), (0.30, 0.12), (0.27, 0.46)),
             arc(0.47, 0.66, 0.27, 0.22, 115, -125)],
        ]
    if cls == 6:
        sweep = arc(0.62, 0.38, 0.34, 0.30, 70, 178)
        return [
            [sweep, arc(0.47, 0.68, 0.23, 0.20, 0, 360)],
        ]
    if cls == 7:
        return [
            [line((0.24, 0.13), (0.78, 0.13), (0.42, 0.88))],
            [line((0.24, 0.13), (0.78, 0.13), (0.42, 0.88)),
             line((0.34, 0.50), (0.66, 0.50))],
        ]
    if cls == 8:
        return [
            [arc(0.50, 0.31, 0.21, 0.18, 0, 360),
             arc(0.50, 0.68, 0.25, 0.21, 0, 360)],
        ]
    if cls == 9:
        return [
            [arc(0.50, 0.34, 0.23, 0.20, 0, 360),
             line((0.73, 0.38), (0.62, 0.88))],
            [arc(0.50, 0.33, 0.22, 0.19, 0, 360),
             arc(0.56, 0.58, 0.26, 0.34, 10, -78)],
        ]
    raise ValueError(cls)


GRID_Y, GRID_X = np.meshgrid(
    (np.arange(SIZE) + 0.5) / SIZE, (np.arange(SIZE) + 0.5) / SIZE, indexing="ij"
)


def seg_dist(px, py, a, b):
    d = b - a
    l2 = d[0] * d[0] + d[1] * d[1]
    if l2 < 1e-12:
        return np.hypot(px - a[0], py - a[1])
    t = np.clip(((px - a[0]) * d[0] + (py - a[1]) * d[1]) / l2, 0.0, 1.0)
    return np.hypot(px - (a[0] + t * d[0]), py - (a[1] + t * d[1]))


def render(polys, width, aa):
    dist = np.full((SIZE, SIZE), 10.0)
    for poly in polys:
        for i in range(len(poly) - 1):
            dist = np.minimum(dist, seg_dist(GRID_X, GRID_Y, poly[i], poly[i + 1]))
    return 1.0 / (1.0 + np.exp((dist - width) / aa))


def gauss_blur(img, sigma):
    if sigma < 0.05:
        return img
    r = max(1, int(3 * sigma))
    x = np.arange(-r, r + 1)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    k /= k.sum()
    img = np.apply_along_axis(lambda m: np.convolve(m, k, mode="same"), 0, img)
    img = np.apply_along_axis(lambda m: np.convolve(m, k, mode="same"), 1, img)
    return img


def sample(cls, rng):
    variants = skeletons(cls)
    polys = [p.copy() for p in variants[rng.integers(len(variants))]]

    ang = rng.uniform(-0.38, 0.38)
    shear = rng.uniform(-0.35, 0.35)
    sx = rng.uniform(0.62, 1.10)
    sy = rng.uniform(0.62, 1.10)
    tx = rng.uniform(-0.09, 0.09)
    ty = rng.uniform(-0.09, 0.09)
    ca, sa = np.cos(ang), np.sin(ang)
    mat = np.array([[ca, -sa], [sa, ca]]) @ np.array([[sx, shear * sx], [0.0, sy]])

    # low-frequency elastic warp shared across strokes
    wf = rng.uniform(2.0, 5.0, 2)
    wp = rng.uniform(0, 2 * np.pi, 2)
    wa = rng.uniform(0.0, 0.045, 2)

    out = []
    for p in polys:
        q = p + rng.normal(0.0, 0.02, p.shape)
        q = (q - 0.5) @ mat.T + 0.5 + np.array([tx, ty])
        q[:, 0] += wa[0] * np.sin(2 * np.pi * wf[0] * q[:, 1] + wp[0])
        q[:, 1] += wa[1] * np.sin(2 * np.pi * wf[1] * q[:, 0] + wp[1])
        out.append(q)

    width = rng.uniform(0.020, 0.068)
    img = render(out, width, aa=rng.uniform(0.010, 0.024))
    img = gauss_blur(img, rng.uniform(0.45, 1.45))
    # occasional occlusion patch: broken strokes
    if rng.random() < 0.35:
        cx, cy = rng.integers(4, 24, 2)
        r = rng.integers(2, 5)
        img[max(0, cy - r):cy + r, max(0, cx - r):cx + r] *= rng.uniform(0.0, 0.5)
    img *= rng.uniform(0.55, 1.00)
    img = np.clip(img ** rng.uniform(0.75, 1.45), 0.0, 1.0)
    img += rng.normal(0.0, rng.uniform(0.025, 0.085), img.shape)
    return np.clip(img, 0.0, 1.0)


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), SIZE, SIZE))
        f.write((images * 255.0).round().astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


def build(n, seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, size=n)
    images = np.empty((n, SIZE, SIZE))
    for i in range(n):
        images[i] = sample(int(labels[i]), np.random.default_rng(seed * 1_000_003 + i))
    return images, labels


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--train", type=int, default=60000)
    ap.add_argument("--test", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=20240901)
    ap.add_argument("--out", default="data")
    args = ap.parse_args()

    import os

    os.makedirs(args.out, exist_ok=True)
    tr_img, tr_lab = build(args.train, args.seed)
    te_img, te_lab = build(args.test, args.seed + 7777)
    write_idx_images(f"{args.out}/train-images-idx3-ubyte", tr_img)
    write_idx_labels(f"{args.out}/train-labels-idx1-ubyte", tr_lab)
    write_idx_images(f"{args.out}/test-images-idx3-ubyte", te_img)
    write_idx_labels(f"{args.out}/test-labels-idx1-ubyte", te_lab)
    print(f"wrote {args.train} train / {args.test} test samples to {args.out}/")


if __name__ == "__main__":
    main()
