"""Static inspection plots: per-class suppression activations, attention
curve, ground-truth segments shaded."""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import torch

from .localization import cas_to_activation
from .model import as_tensor


def plot_cas(video, model, out_path, annotation=None, class_names=None):
    with torch.no_grad():
        fwd = model(as_tensor(video.features))
    act = cas_to_activation(fwd.cas_supp.numpy())
    attention = fwd.attention.numpy()
    t_axis = (np.arange(act.shape[0]) + 0.5) * video.snippet_duration_sec

    fig, (ax_cas, ax_att) = plt.subplots(2, 1, sharex=True, figsize=(10, 6),
                                         height_ratios=[2, 1])
    for c in range(act.shape[1]):
        name = class_names[c] if class_names else f"class {c}"
        ax_cas.plot(t_axis, act[:, c], label=name, linewidth=1.2)
    if annotation is not None:
        for cls, s, e in annotation.segments:
            for ax in (ax_cas, ax_att):
                ax.axvspan(s, e, color="gray", alpha=0.25, zorder=0)
    ax_cas.set_ylabel("class activation")
    ax_cas.set_ylim(-0.02, 1.02)
    ax_cas.legend(loc="upper right", fontsize=8)
    ax_cas.set_title(video.video_id)

    ax_att.plot(t_axis, attention, color="black", linewidth=1.2)
    ax_att.set_ylabel("attention")
    ax_att.set_ylim(-0.02, 1.02)
    ax_att.set_xlabel("time (s)")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
