"""
Foreground/background weighted fine-tuning
==========================================

First teach the toy model a small family of blob images (plain denoising
loss), then fine-tune it towards one target with region-weighted losses.
"""

import numpy as np

from vidconsist.denoiser import ConditioningEmbedding, init_model
from vidconsist.schedule import build_schedule
from vidconsist.segmentation import segment_threshold
from vidconsist.tuning import LossWeights, TuneConfig, fine_tune, loss_terms

sched = build_schedule(50, 8.5e-4, 1.2e-2)
rng = np.random.default_rng(0)
emb = ConditioningEmbedding(rng.standard_normal(8), rng.standard_normal(8))
yy, xx = np.mgrid[0:8, 0:8]


def blob(cy, cx):
    return np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / 3.0)[..., None]


data = np.stack([blob(cy, cx) for cy in (2, 4, 6) for cx in (2, 4, 6)])
model = init_model((8, 8, 1), 64, (8, 8), seed=0, t_dim=8, T=50)

# %%
# Weights (1, 0, 0) reduce the objective to ordinary denoising training.
log = []
model = fine_tune(model, data, emb, segment_threshold(data[0]), sched,
                  LossWeights(1, 0, 0), TuneConfig(2000, 1e-3, 4), seed=1, log=log)
print("pretraining L1, first/last 100 steps:",
      np.mean([r.l1 for r in log[:100]]), np.mean([r.l1 for r in log[-100:]]))

# %%
# Now weight the foreground of one target twice as heavily as its background.
target = blob(4, 4)
masks = segment_threshold(target, 0.3)
log = []
tuned = fine_tune(model, target, emb, masks, sched, LossWeights(1, 2, 1),
                  TuneConfig(250, 1e-3, 1), seed=2, log=log)

# %%
# Per-step losses are noisy (fresh t and noise each step), so compare on a
# fixed evaluation set instead.
weights = LossWeights(1, 2, 1)
eval_rng = np.random.default_rng(99)
draws = [(int(eval_rng.integers(1, 51)), eval_rng.standard_normal((8, 8, 1))) for _ in range(400)]


def evaluate(m):
    return np.mean([loss_terms(m, target, t, emb, n, masks, weights, sched) for t, n in draws], axis=0)


for label, m in (("before", model), ("after", tuned)):
    l1, fg, bg, total = evaluate(m)
    print(f"{label:>6}: L1 {l1:7.2f}  L_fg {fg:6.2f}  L_bg {bg:6.2f}  total {total:7.2f}")
