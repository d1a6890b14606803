"""Writes a small score-network test vector using an independent PyTorch
implementation of the architecture.

Outputs (into the directory given as the first argument):
  scorenet_tiny.sdw        SDW1 weights
  scorenet_tiny_x.tnsr     input image (real64)
  scorenet_tiny_out.tnsr   score = net(x, sigma) / sigma (real64)
  scorenet_tiny.json       architecture and sigma
"""

import json
import math
import struct
import sys
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

WIDTHS = [4, 8, 16]
FOURIER = 8
EMBED = 16
SIZE = (16, 24)
SIGMA = 0.7
SEED = 20240611


class Block(nn.Module):
    def __init__(self, cin, cout, emb):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.emb = nn.Linear(emb, cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)

    def forward(self, x, e):
        h = self.conv1(x) + self.emb(e)[:, :, None, None]
        h = F.silu(h)
        return F.silu(self.conv2(h))


class Net(nn.Module):
    def __init__(self, widths, fourier, embed):
        super().__init__()
        self.freqs = nn.Parameter(torch.randn(fourier), requires_grad=False)
        self.dense0 = nn.Linear(2 * fourier, embed)
        self.dense1 = nn.Linear(embed, embed)
        self.enc = nn.ModuleList(
            [Block(1 if l == 0 else widths[l - 1], widths[l], embed) for l in range(len(widths))]
        )
        self.mid = Block(widths[-1], widths[-1], embed)
        self.dec = nn.ModuleList([Block(w, w, embed) for w in widths])
        self.match = nn.ModuleList(
            [nn.Conv2d(widths[l + 1], widths[l], 1) for l in range(len(widths) - 1)]
        )
        self.head = nn.Conv2d(widths[0], 1, 1)

    def forward(self, x, sigma):
        t = torch.log(sigma).reshape(-1, 1)
        proj = 2 * math.pi * t * self.freqs[None, :]
        e = torch.cat([torch.sin(proj), torch.cos(proj)], dim=1)
        e = F.silu(self.dense1(F.silu(self.dense0(e))))
        skips = []
        h = x
        for l, blk in enumerate(self.enc):
            if l > 0:
                h = F.avg_pool2d(h, 2)
            h = blk(h, e)
            skips.append(h)
        h = self.mid(h, e)
        top = len(self.enc) - 1
        for l in range(top, -1, -1):
            if l < top:
                h = self.match[l](F.interpolate(h, scale_factor=2, mode="nearest"))
            h = self.dec[l](h + skips[l], e)
        return self.head(h) / sigma.reshape(-1, 1, 1, 1)

    def named_tensors(self):
        top = len(self.enc) - 1
        out = [
            ("embed.freqs", self.freqs),
            ("embed.dense0.weight", self.dense0.weight),
            ("embed.dense0.bias", self.dense0.bias),
            ("embed.dense1.weight", self.dense1.weight),
            ("embed.dense1.bias", self.dense1.bias),
        ]

        def block(name, b):
            for part in ("conv1", "emb", "conv2"):
                m = getattr(b, part)
                out.append((f"{name}.{part}.weight", m.weight))
                out.append((f"{name}.{part}.bias", m.bias))

        for l, b in enumerate(self.enc):
            block(f"enc{l}", b)
        block("mid", self.mid)
        for l in range(top, -1, -1):
            if l < top:
                out.append((f"dec{l}.match.weight", self.match[l].weight))
                out.append((f"dec{l}.match.bias", self.match[l].bias))
            block(f"dec{l}", self.dec[l])
        out.append(("head.weight", self.head.weight))
        out.append(("head.bias", self.head.bias))
        return out


def write_sdw(path, tensors):
    buf = bytearray(b"SDW1")
    buf += struct.pack("<II", 1, len(tensors))
    for name, t in tensors:
        raw = name.encode()
        arr = t.detach().to(torch.float32).contiguous()
        buf += struct.pack("<H", len(raw)) + raw
        buf += struct.pack("<B", arr.dim())
        buf += struct.pack(f"<{arr.dim()}I", *arr.shape)
        buf += struct.pack(f"<{arr.numel()}f", *arr.flatten().tolist())
    Path(path).write_bytes(bytes(buf))


def write_tnsr(path, arr):
    arr = arr.to(torch.float64).contiguous()
    buf = bytearray(b"TNSR")
    buf += struct.pack("<IBB", 1, 0, arr.dim())
    buf += struct.pack(f"<{arr.dim()}Q", *arr.shape)
    buf += struct.pack(f"<{arr.numel()}d", *arr.flatten().tolist())
    Path(path).write_bytes(bytes(buf))


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(SEED)
    net = Net(WIDTHS, FOURIER, EMBED)
    with torch.no_grad():
        # larger biases so that every tensor visibly matters
        for name, p in net.named_parameters():
            if name.endswith("bias"):
                p.normal_(0.0, 0.1)
    x = torch.rand(1, 1, *SIZE, dtype=torch.float32)
    sigma = torch.tensor([SIGMA], dtype=torch.float32)
    with torch.no_grad():
        y = net(x, sigma)
    write_sdw(out / "scorenet_tiny.sdw", net.named_tensors())
    write_tnsr(out / "scorenet_tiny_x.tnsr", x[0, 0])
    write_tnsr(out / "scorenet_tiny_out.tnsr", y[0, 0])
    meta = {
        "arch": {"widths": WIDTHS, "fourier_features": FOURIER, "embed_dim": EMBED},
        "sigma": SIGMA,
    }
    (out / "scorenet_tiny.json").write_text(json.dumps(meta, indent=2) + "\n")


if __name__ == "__main__":
    main()
