"""Reference outputs for the autoencoder from an independent PyTorch model.

Writes tests/data/torch_k2_64.bin: the weights plus inputs, eval-mode codes and
reconstructions, one training-mode step (loss, output, parameter gradients,
updated running statistics). Layout matches the C++ weight blob so the test can
read it with the same block reader.
"""
import pathlib
import struct

import torch
from torch import nn

K = 2
PROG = [K, 2 * K, 4 * K, 8 * K, 12 * K, 12 * K]


class Net(nn.Module):
    def __init__(self):
        super().__init__()
        enc, cin = [], 3
        for i, c in enumerate(PROG):
            layers = [nn.Conv2d(cin, c, 5, 2 if i < 4 else 1, 2, bias=False), nn.BatchNorm2d(c), nn.ReLU()]
            if i >= 4:
                layers.append(nn.MaxPool2d(2))
            enc.append(nn.Sequential(*layers))
            cin = c
        dec = []
        for c in reversed(PROG):
            dec.append(nn.Sequential(nn.ConvTranspose2d(cin, c, 4, 2, 1, bias=False), nn.BatchNorm2d(c), nn.ReLU()))
            cin = c
        self.enc = nn.ModuleList(enc)
        self.dec = nn.ModuleList(dec)
        self.head = nn.Conv2d(cin, 3, 1)

    def encode(self, x):
        for s in self.enc:
            x = s(x)
        return x

    def decode(self, z):
        for s in self.dec:
            z = s(z)
        return torch.sigmoid(self.head(z))

    def named_blocks(self):
        out = []
        for i, s in enumerate(self.enc):
            out += [(f"encoder.{i}.conv.weight", s[0].weight)]
            out += [(f"encoder.{i}.bn.{n}", t) for n, t in bn_tensors(s[1])]
        for i, s in enumerate(self.dec):
            out += [(f"decoder.{i}.deconv.weight", s[0].weight)]
            out += [(f"decoder.{i}.bn.{n}", t) for n, t in bn_tensors(s[1])]
        out += [("head.weight", self.head.weight), ("head.bias", self.head.bias)]
        return out


def bn_tensors(bn):
    return [("gamma", bn.weight), ("beta", bn.bias), ("running_mean", bn.running_mean), ("running_var", bn.running_var)]


def blob(blocks):
    out = bytearray(b"VSAW") + struct.pack("<II", 1, len(blocks))
    for name, t in blocks:
        data = t.detach().double().float().contiguous().numpy().tobytes()
        out += struct.pack("<H", len(name)) + name.encode() + struct.pack("<Q", t.numel()) + data
    return bytes(out)


def main():
    torch.manual_seed(1234)
    net = Net().double()
    with torch.no_grad():
        for m in net.modules():
            if isinstance(m, nn.BatchNorm2d):
                m.weight.uniform_(0.5, 1.5)
                m.bias.uniform_(-0.2, 0.2)
                m.running_mean.uniform_(-0.1, 0.1)
                m.running_var.uniform_(0.5, 1.5)
    # Round parameters to float32 so both sides start from identical values.
    with torch.no_grad():
        for _, t in net.named_blocks():
            t.copy_(t.float().double())
    x = torch.rand(2, 3, 64, 64, dtype=torch.float64).float().double()

    blocks = [(n, t) for n, t in net.named_blocks()]
    weights = blob(blocks)

    net.eval()
    with torch.no_grad():
        z = net.encode(x)
        y = net.decode(z)
    fixture = [(f"input.{i}", x[i]) for i in range(2)]
    fixture += [(f"code.{i}", z[i]) for i in range(2)]
    fixture += [(f"recon_eval.{i}", y[i]) for i in range(2)]

    net.train()
    out = net.decode(net.encode(x))
    loss = ((out - x) ** 2).mean()
    loss.backward()
    fixture += [("loss", loss.detach().reshape(1))]
    fixture += [(f"recon_train.{i}", out[i]) for i in range(2)]
    for n, t in net.named_blocks():
        if t.grad is not None:
            fixture.append((f"grad.{n}", t.grad))
        elif "running" in n:
            fixture.append((f"after.{n}", t))

    path = pathlib.Path(__file__).resolve().parent.parent / "data" / "torch_k2_64.bin"
    path.write_bytes(struct.pack("<Q", len(weights)) + weights + blob(fixture))
    print(path, path.stat().st_size)


if __name__ == "__main__":
    main()
