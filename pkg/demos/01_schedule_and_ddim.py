"""
Noise schedule, forward jumps and DDIM steps
============================================

Build the scaled-linear schedule, noise a frame, and walk it back with a
perfect noise predictor.
"""

import numpy as np

from vidconsist.schedule import build_schedule, ddim_step, forward_jump, predict_x0

# %%
# 1000 steps, beta from 8.5e-4 to 1.2e-2, linear in sqrt(beta).
sched = build_schedule(1000, 8.5e-4, 1.2e-2)
print("beta_1, beta_500, beta_1000:", sched.betas[[1, 500, 1000]])
print("signal left at t=T: sqrt(alpha_bar_T) =", np.sqrt(sched.alpha_bars[-1]))

# %%
# Jump a clean frame straight to t=600.
rng = np.random.default_rng(0)
x0 = np.zeros((8, 8, 1))
x0[2:6, 2:6] = 1.0
eps = rng.standard_normal(x0.shape)
xt = forward_jump(x0, 600, eps, sched)
print("x_600 std:", xt.std())

# %%
# If the predictor returned the true noise, x0 comes back exactly...
print("max |predict_x0 - x0|:", np.abs(predict_x0(xt, eps, 600, sched) - x0).max())

# %%
# ...and every deterministic DDIM step lands on the forward jump one step earlier.
x = xt
for t in range(600, 0, -1):
    x = ddim_step(x, t, eps, 0.0, None, sched)
print("after 600 DDIM steps, max |x - x0|:", np.abs(x - x0).max())
