#!/usr/bin/env python3
"""Train the reference 784-100-100-10 MLP and export repo artifacts.

Plain SGD with momentum; nothing exotic. Produces:
  * mlp_784x100x100x10.ncm  -- binary model file (format documented in the
    repo README and in the Rust model module)
  * test-images-idx3-ubyte / test-labels-idx1-ubyte -- first SHIP_N test
    samples, standard IDX layout
  * model_card.toml -- recorded baseline accuracy of the exported weights
"""

import argparse
import struct
import numpy as np
import torch
import torch.nn as nn

SHIP_N = 2000
MAGIC = b"NCASTMD1"


def read_idx_images(path):
    with open(path, "rb") as f:
        magic, n, rows, cols = struct.unpack(">IIII", f.read(16))
        assert magic == 0x803
        data = np.frombuffer(f.read(n * rows * cols), dtype=np.uint8)
    return (data.reshape(n, rows * cols).astype(np.float64) / 255.0)


def read_idx_labels(path):
    with open(path, "rb") as f:
        magic, n = struct.unpack(">II", f.read(8))
        assert magic == 0x801
        return np.frombuffer(f.read(n), dtype=np.uint8).astype(np.int64)


def export_model(path, layers):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(layers)))
        for (w, b, act) in layers:
            rows, cols = w.shape
            f.write(struct.pack("<IIB", rows, cols, act))
            f.write(w.astype("<f8").tobytes())
            f.write(b.astype("<f8").tobytes())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", default="/tmp/digits")
    ap.add_argument("--out", default="data")
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    np.random.seed(args.seed)

    xtr = read_idx_images(f"{args.data}/train-images-idx3-ubyte")
    ytr = read_idx_labels(f"{args.data}/train-labels-idx1-ubyte")
    xte = read_idx_images(f"{args.data}/test-images-idx3-ubyte")
    yte = read_idx_labels(f"{args.data}/test-labels-idx1-ubyte")
    print(f"train {len(xtr)}  test {len(xte)}")

    model = nn.Sequential(
        nn.Linear(784, 100), nn.ReLU(),
        nn.Linear(100, 100), nn.ReLU(),
        nn.Linear(100, 10),
    ).double()

    opt = torch.optim.SGD(model.parameters(), lr=0.1, momentum=0.9,
                          weight_decay=1e-4)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=args.epochs)
    loss_fn = nn.CrossEntropyLoss()

    xtr_t = torch.from_numpy(xtr)
    ytr_t = torch.from_numpy(ytr)
    xte_t = torch.from_numpy(xte)
    yte_t = torch.from_numpy(yte)

    batch = 128
    n = len(xtr_t)
    for epoch in range(args.epochs):
        model.train()
        perm = torch.randperm(n)
        tot = 0.0
        for i in range(0, n, batch):
            idx = perm[i:i + batch]
            opt.zero_grad()
            out = model(xtr_t[idx])
            loss = loss_fn(out, ytr_t[idx])
            loss.backward()
            opt.step()
            tot += loss.item() * len(idx)
        sched.step()
        model.eval()
        with torch.no_grad():
            acc = (model(xte_t).argmax(1) == yte_t).double().mean().item()
        print(f"epoch {epoch + 1:2d}  loss {tot / n:.4f}  test acc {acc:.4f}")

    model.eval()
    with torch.no_grad():
        pred = model(xte_t).argmax(1)
    acc_full = (pred == yte_t).double().mean().item()
    acc_ship = (pred[:SHIP_N] == yte_t[:SHIP_N]).double().mean().item()
    acc_1k = (pred[:1000] == yte_t[:1000]).double().mean().item()
    print(f"final: full {acc_full:.4f}  ship[{SHIP_N}] {acc_ship:.4f}  first1k {acc_1k:.4f}")

    lin = [m for m in model if isinstance(m, nn.Linear)]
    layers = [
        (lin[0].weight.detach().numpy(), lin[0].bias.detach().numpy(), 1),
        (lin[1].weight.detach().numpy(), lin[1].bias.detach().numpy(), 1),
        (lin[2].weight.detach().numpy(), lin[2].bias.detach().numpy(), 0),
    ]

    import os
    os.makedirs(args.out, exist_ok=True)
    export_model(f"{args.out}/mlp_784x100x100x10.ncm", layers)

    with open(f"{args.data}/test-images-idx3-ubyte", "rb") as f:
        hdr = f.read(16)
        body = f.read(SHIP_N * 784)
    with open(f"{args.out}/test-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, SHIP_N, 28, 28))
        f.write(body)
    with open(f"{args.data}/test-labels-idx1-ubyte", "rb") as f:
        f.read(8)
        lab = f.read(SHIP_N)
    with open(f"{args.out}/test-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, SHIP_N))
        f.write(lab)

    with open(f"{args.out}/model_card.toml", "w") as f:
        f.write("# Reference model artifact record. Regenerate with\n")
        f.write("# scripts/make_dataset.py + scripts/train_model.py.\n")
        f.write("[model]\n")
        f.write('file = "mlp_784x100x100x10.ncm"\n')
        f.write('shape = [784, 100, 100, 10]\n')
        f.write(f"train_seed = {args.seed}\n")
        f.write("[baseline]\n")
        f.write(f"test_accuracy_full = {acc_full:.6f}\n")
        f.write(f"test_accuracy_shipped = {acc_ship:.6f}\n")
        f.write(f"test_accuracy_first_1000 = {acc_1k:.6f}\n")


if __name__ == "__main__":
    main()
