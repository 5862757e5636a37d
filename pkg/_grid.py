import sys, time
import torch
torch.set_num_threads(1)
import numpy as np
import lgbm_net as L
from lgbm_net.localization import detections_to_results
from lgbm_net.model import as_tensor
from lgbm_net.training import topk_mean_aggregate

def run(kind='local_global', lam=0.1, seed=0, bg=0.0, nstd=0.25, dis=3.0,
        steps=300, batch=8, smooth=3, lr=3e-3, opt='adam', hidden=32,
        seg_lo=10, seg_hi=30):
    cfg = L.SynthConfig(n_videos=250, C=5, D=32, fg_snr=1.0, seed=0,
                        noise_std=nstd, bg_class_std=bg, distractor_rate=dis,
                        segment_len_range=(int(seg_lo), int(seg_hi)))
    m, seqs, anns = L.generate_synthetic_dataset(cfg)
    val = m.videos('val')
    ann_payload = {'database': {vid: {'duration': anns[vid].duration_sec, 'subset': 'val',
        'annotations': [{'label': m.class_names[c], 'segment': [s,e]} for c,s,e in anns[vid].segments]} for vid in val},
        'classes': m.class_names}
    mc = L.ModelConfig(D=32, C=5, hidden=int(hidden), attention_kind=kind)
    tc = L.TrainConfig(steps=int(steps), batch_size=int(batch), seed=int(seed),
                       lambda_att=lam, optimizer=opt, learning_rate=lr)
    t0 = time.time()
    model, _ = L.train(m, seqs, anns, mc, tc)
    loc = L.LocalizationConfig(smooth_width=int(smooth))
    det = {vid: L.localize(seqs[vid], model, loc) for vid in val}
    rep = L.evaluate(detections_to_results(det, m.class_names), ann_payload)
    correct = 0
    for vid in val:
        with torch.no_grad():
            fwd = model(as_tensor(seqs[vid].features))
        pred = int(torch.argmax(topk_mean_aggregate(fwd.cas_supp, 8)[:-1]))
        correct += int(anns[vid].labels[pred] == 1)
    return rep.average_map, correct/len(val), time.time()-t0

if __name__ == '__main__':
    kw = {}
    for a in sys.argv[1:]:
        k, v = a.split('=')
        kw[k] = v if k in ('kind', 'opt') else float(v)
    f, fa, tf = run(**kw)
    print(f'{kw}: map {f:.4f} acc {fa:.2f} ({tf:.0f}s)', flush=True)
