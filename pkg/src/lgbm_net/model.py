"""Two-branch background-modeling network.

Both branches share one sub-net instance: the upper ("base") branch sees raw
features, the lower ("suppression") branch sees features scaled per snippet
by the attention weights. Inputs are single videos, shape (T, D); T may vary
from video to video.
"""

import json
import math
import struct
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .errors import ConfigError, DataError

GLOBAL_OPS = ("recurrent", "non_local", "global_pool")
ATTENTION_KINDS = ("local_global", "local_only")

CHECKPOINT_MAGIC = b"LGBC"


@dataclass
class ModelConfig:
    D: int = 32
    C: int = 5
    hidden: int = 32
    global_op: str = "recurrent"
    conv_kernel: int = 3
    recurrent_bidirectional: bool = True
    attention_kind: str = "local_global"  # "local_only" = ablated baseline attention

    def validate(self):
        if self.D < 1 or self.C < 1 or self.hidden < 1:
            raise ConfigError("D, C and hidden must all be >= 1")
        if self.conv_kernel < 1 or self.conv_kernel % 2 == 0:
            raise ConfigError(f"conv_kernel must be odd and positive, got {self.conv_kernel}")
        if self.global_op not in GLOBAL_OPS:
            raise ConfigError(f"global_op must be one of {GLOBAL_OPS}, got '{self.global_op}'")
        if self.attention_kind not in ATTENTION_KINDS:
            raise ConfigError(f"attention_kind must be one of {ATTENTION_KINDS}")
        return self


def _conv1d(in_ch, out_ch, kernel):
    return nn.Conv1d(in_ch, out_ch, kernel, padding=kernel // 2)


class GlobalPath(nn.Module):
    """Global temporal operation emitting `hidden` channels per snippet."""

    def __init__(self, in_dim, hidden, cfg):
        super().__init__()
        self.kind = cfg.global_op
        if self.kind == "recurrent":
            self.rnn = nn.LSTM(in_dim, hidden, batch_first=True,
                               bidirectional=cfg.recurrent_bidirectional)
            out_dim = hidden * (2 if cfg.recurrent_bidirectional else 1)
            self.proj = nn.Linear(out_dim, hidden)
        elif self.kind == "non_local":
            self.embed = nn.Linear(in_dim, hidden)
            self.query = nn.Linear(hidden, hidden)
            self.key = nn.Linear(hidden, hidden)
            self.value = nn.Linear(hidden, hidden)
        else:  # global_pool: temporal mean broadcast-concatenated to each step
            self.proj = nn.Linear(2 * in_dim, hidden)

    def forward(self, x):  # (T, in_dim) -> (T, hidden)
        if self.kind == "recurrent":
            out, _ = self.rnn(x.unsqueeze(0))
            return self.proj(out.squeeze(0))
        if self.kind == "non_local":
            h = self.embed(x)
            q, k, v = self.query(h), self.key(h), self.value(h)
            attn = torch.softmax(q @ k.T / math.sqrt(h.shape[1]), dim=1)
            return h + attn @ v
        pooled = x.mean(dim=0, keepdim=True).expand_as(x)
        return self.proj(torch.cat([x, pooled], dim=1))


class LocalGlobalTrunk(nn.Module):
    """Parallel temporal conv (local) + global path, concatenated channel-wise."""

    def __init__(self, in_dim, hidden, cfg):
        super().__init__()
        self.local = _conv1d(in_dim, hidden, cfg.conv_kernel)
        self.global_path = GlobalPath(in_dim, hidden, cfg)

    def forward(self, x):  # (T, in_dim) -> (T, 2*hidden)
        local = self.local(x.T.unsqueeze(0)).squeeze(0).T
        return torch.cat([local, self.global_path(x)], dim=1)


class AttentionModule(nn.Module):
    """Per-snippet foreground weights in (0, 1)."""

    def __init__(self, cfg):
        super().__init__()
        self.trunk = LocalGlobalTrunk(cfg.D, cfg.hidden, cfg)
        self.fuse1 = _conv1d(2 * cfg.hidden, cfg.hidden, cfg.conv_kernel)
        self.fuse2 = _conv1d(cfg.hidden, 1, cfg.conv_kernel)

    def forward(self, x):  # (T, D) -> (T,)
        h = self.trunk(x).T.unsqueeze(0)
        h = self.fuse2(torch.relu(self.fuse1(h)))
        return torch.sigmoid(h.reshape(-1))


class LocalOnlyAttention(nn.Module):
    """Ablation: one temporal conv + sigmoid, no global context."""

    def __init__(self, cfg):
        super().__init__()
        self.conv = _conv1d(cfg.D, 1, cfg.conv_kernel)

    def forward(self, x):
        return torch.sigmoid(self.conv(x.T.unsqueeze(0)).reshape(-1))


class SubNet(nn.Module):
    """Shared sub-net mapping features to per-snippet class logits (C action
    columns + 1 background column)."""

    def __init__(self, cfg):
        super().__init__()
        self.trunk = LocalGlobalTrunk(cfg.D, cfg.hidden, cfg)
        self.fuse = _conv1d(2 * cfg.hidden, cfg.hidden, cfg.conv_kernel)
        self.classifier = _conv1d(cfg.hidden, cfg.C + 1, cfg.conv_kernel)

    def forward(self, x):  # (T, D) -> (T, C+1)
        h = self.trunk(x).T.unsqueeze(0)
        return self.classifier(torch.relu(self.fuse(h))).squeeze(0).T


@dataclass
class ForwardOutput:
    cas_base: torch.Tensor   # (T, C+1) logits from raw features
    cas_supp: torch.Tensor   # (T, C+1) logits from attention-scaled features
    attention: torch.Tensor  # (T,) weights in (0, 1)


class LGBMNet(nn.Module):

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg.validate()
        if cfg.attention_kind == "local_only":
            self.attention = LocalOnlyAttention(cfg)
        else:
            self.attention = AttentionModule(cfg)
        self.subnet = SubNet(cfg)

    def _check_input(self, x):
        if x.ndim != 2 or x.shape[0] < 1:
            raise DataError(f"expected a non-empty T x D input, got shape {tuple(x.shape)}")
        if x.shape[1] != self.cfg.D:
            raise ConfigError(f"input feature dim {x.shape[1]} != configured D={self.cfg.D}")
        if not torch.isfinite(x).all():
            raise DataError("non-finite values in input features")

    def forward(self, x, attention_override=None):
        """Run both branches; the same sub-net parameters serve both."""
        self._check_input(x)
        attention = self.attention(x) if attention_override is None else attention_override
        cas_base = self.subnet(x)
        cas_supp = self.subnet(x * attention.unsqueeze(1))
        return ForwardOutput(cas_base=cas_base, cas_supp=cas_supp, attention=attention)


def as_tensor(features):
    arr = np.ascontiguousarray(features, dtype=np.float32)
    if not arr.flags.writeable:
        arr = arr.copy()
    return torch.from_numpy(arr)


def init_params(model, seed):
    """Deterministic init: fan-in uniform convs/linears, orthogonal recurrent
    matrices, zero biases."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in sorted(model.named_parameters()):
            if "bias" in name:
                p.zero_()
            elif "weight_hh" in name:
                for block in p.chunk(4, dim=0):  # per-gate orthogonal
                    nn.init.orthogonal_(block, generator=gen)
            else:
                fan_in = p[0].numel() if p.ndim > 1 else p.numel()
                bound = 1.0 / math.sqrt(fan_in)
                p.uniform_(-bound, bound, generator=gen)
    return model


def build_model(cfg, seed=0):
    return init_params(LGBMNet(cfg), seed)


def save_checkpoint(model, path, seed=0, step=0):
    """Single-file checkpoint: JSON metadata + named float32 tensor payloads."""
    state = model.state_dict()
    names = sorted(state)
    header = {"config": asdict(model.cfg), "seed": int(seed), "step": int(step),
              "tensors": [{"name": n, "shape": list(state[n].shape)} for n in names]}
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(state[n].numpy().astype("<f4").tobytes())


def load_checkpoint(path):
    """Returns (model, metadata dict). Parameter round trip is bit-exact."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if raw[:4] != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack("<I", raw[4:8])
    try:
        header = json.loads(raw[8:8 + hlen].decode("utf-8"))
        cfg = ModelConfig(**header["config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed checkpoint header: {exc}") from exc
    model = LGBMNet(cfg)
    offset = 8 + hlen
    state = {}
    for spec in header["tensors"]:
        n = int(np.prod(spec["shape"])) if spec["shape"] else 1
        end = offset + 4 * n
        if end > len(raw):
            raise DataError(f"{path}: truncated tensor payload for '{spec['name']}'")
        arr = np.frombuffer(raw[offset:end], dtype="<f4").reshape(spec["shape"])
        state[spec["name"]] = torch.from_numpy(arr.copy())
        offset = end
    model.load_state_dict(state)
    return model, {"seed": header["seed"], "step": header["step"], "config": cfg}
