"""MIL training: top-k mean aggregation, branch-asymmetric BCE, attention
self-supervision and the optimization loop."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .errors import ConfigError, DataError, NumericalError
from .model import as_tensor, build_model, save_checkpoint


@dataclass
class TrainConfig:
    topk_ratio: int = 8          # k = max(1, floor(T / topk_ratio))
    lambda_base: float = 1.0
    lambda_supp: float = 1.0
    lambda_att: float = 0.1
    learning_rate: float = 0.05
    momentum: float = 0.9
    optimizer: str = "sgd"       # "sgd" (reference) or "adam"
    steps: int = 400
    batch_size: int = 8
    seed: int = 0
    checkpoint_every: int = 0    # 0 = final checkpoint only

    def validate(self):
        if self.topk_ratio < 1:
            raise ConfigError("topk_ratio must be >= 1")
        if self.lambda_supp <= 0:
            raise ConfigError("lambda_supp must be positive: the suppression branch drives detection")
        if min(self.lambda_base, self.lambda_att) < 0:
            raise ConfigError("loss weights must be nonnegative")
        if self.learning_rate <= 0 or self.steps < 1 or self.batch_size < 1:
            raise ConfigError("learning_rate, steps and batch_size must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer '{self.optimizer}'")
        return self


def topk_mean_aggregate(cas, r):
    """Per-class mean of the k largest snippet scores, k = max(1, floor(T/r))."""
    t = cas.shape[0]
    if t < 1:
        raise DataError("empty class activation sequence")
    k = max(1, t // int(r))
    top = torch.topk(cas, k, dim=0).values
    return top.mean(dim=0)


def branch_targets(labels, C):
    """Upper branch always sees background = 1, lower branch background = 0."""
    labels = torch.as_tensor(labels, dtype=torch.float32).reshape(-1)
    if labels.shape[0] != C:
        raise DataError(f"label vector length {labels.shape[0]} != C={C}")
    y_base = torch.cat([labels, torch.ones(1)])
    y_supp = torch.cat([labels, torch.zeros(1)])
    return y_base, y_supp


def video_classification_loss(cas, targets, r):
    """BCE between sigmoid(top-k aggregated logits) and the video-level
    targets, averaged over the C+1 classes."""
    agg = topk_mean_aggregate(cas, r)
    return F.binary_cross_entropy_with_logits(agg, targets, reduction="mean")


def attention_supervision_loss(attention, cas_supp, r=8):
    """MSE between the attention weights and the (detached) sigmoid activation
    of the strongest video-level foreground class."""
    fg = cas_supp[:, :-1]
    c_star = int(torch.argmax(topk_mean_aggregate(fg, r)))
    target = torch.sigmoid(fg[:, c_star]).detach()
    return torch.mean((attention - target) ** 2)


def total_loss(out, labels, cfg):
    """Weighted two-branch classification loss plus attention supervision."""
    C = out.cas_base.shape[1] - 1
    y_base, y_supp = branch_targets(labels, C)
    parts = {
        "loss_base": video_classification_loss(out.cas_base, y_base, cfg.topk_ratio),
        "loss_supp": video_classification_loss(out.cas_supp, y_supp, cfg.topk_ratio),
        "loss_att": attention_supervision_loss(out.attention, out.cas_supp, cfg.topk_ratio),
    }
    total = (cfg.lambda_base * parts["loss_base"]
             + cfg.lambda_supp * parts["loss_supp"]
             + cfg.lambda_att * parts["loss_att"])
    return total, parts


def train(manifest, sequences, annotations, model_cfg, train_cfg,
          out_dir=None, log_fn=None):
    """Mini-batch SGD over the train split; deterministic given the seed.

    Returns (model, log) where log is a list of per-step dicts. Checkpoints
    and a JSONL log are written under out_dir when given.
    """
    train_cfg.validate()
    train_vids = manifest.videos("train")
    if not train_vids:
        raise DataError("train split is empty")
    for vid in train_vids:
        if annotations[vid].labels.sum() < 1:
            raise DataError(f"training video '{vid}' has no positive label")

    torch.manual_seed(train_cfg.seed)
    model = build_model(model_cfg, seed=train_cfg.seed)
    if train_cfg.optimizer == "adam":
        opt = torch.optim.Adam(model.parameters(), lr=train_cfg.learning_rate)
    else:
        opt = torch.optim.SGD(model.parameters(), lr=train_cfg.learning_rate,
                              momentum=train_cfg.momentum)
    rng = np.random.default_rng(train_cfg.seed)
    tensors = {vid: as_tensor(sequences[vid].features) for vid in train_vids}

    out = Path(out_dir) if out_dir is not None else None
    log_path = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        log_path = out / "train_log.jsonl"
        log_path.write_text("")

    log = []
    for step in range(train_cfg.steps):
        batch = rng.choice(len(train_vids), size=min(train_cfg.batch_size, len(train_vids)),
                           replace=False)
        opt.zero_grad()
        sums = {"loss_total": 0.0, "loss_base": 0.0, "loss_supp": 0.0, "loss_att": 0.0}
        loss_acc = 0.0
        for idx in batch:
            vid = train_vids[idx]
            fwd = model(tensors[vid])
            loss, parts = total_loss(fwd, annotations[vid].labels, train_cfg)
            loss_acc = loss_acc + loss
            sums["loss_total"] += float(loss.detach())
            for key, val in parts.items():
                sums[key] += float(val.detach())
        mean_loss = loss_acc / len(batch)
        if not torch.isfinite(mean_loss):
            raise NumericalError(f"training diverged at step {step}: loss={float(mean_loss)}")
        mean_loss.backward()
        opt.step()

        entry = {"step": step}
        entry.update({key: val / len(batch) for key, val in sums.items()})
        log.append(entry)
        if log_fn is not None:
            log_fn(entry)
        if log_path is not None:
            with open(log_path, "a") as fh:
                fh.write(json.dumps(entry) + "\n")
        if (out is not None and train_cfg.checkpoint_every
                and (step + 1) % train_cfg.checkpoint_every == 0):
            save_checkpoint(model, out / f"checkpoint_{step + 1:06d}.lgbc",
                            seed=train_cfg.seed, step=step + 1)

    for p in model.parameters():
        if not torch.isfinite(p).all():
            raise NumericalError("non-finite parameters after training")
    if out is not None:
        save_checkpoint(model, out / "checkpoint_final.lgbc",
                        seed=train_cfg.seed, step=train_cfg.steps)
    return model, log
