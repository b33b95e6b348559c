"""
Difficulty coefficients and the deferred strength schedule
==========================================================

How the per-sample margin scaling behaves as a function of the target
cosine, and how the augmentation strength ramps over training.
"""

from semaug.losses import LossConfig, difficulty_da, difficulty_dy, lambda_schedule

# DA is linear in the cosine and lives in [0, 1]; DY is exponential and
# never reaches zero, so even easy samples keep a residual margin
print("cos(theta_y)     DA      DY(gamma=2)")
for c in (1.0, 0.8, 0.5, 0.0, -0.5, -1.0):
    print(f"{c:12.1f}   {difficulty_da(c):.3f}   {difficulty_dy(c, 2.0):.3f}")

# constant mode: zero for the deferred phase, then a linear ramp to lambda0
cfg = LossConfig(variant="dasa", difficulty="DA", strength_mode="constant",
                 lambda0=0.2, gamma=2.0, ramp_total_iters=100, deferred_fraction=0.4)
print("\nt/T     lambda (constant mode, lambda0=0.2, deferred 40%)")
for t in (0, 20, 39, 40, 60, 80, 100):
    print(f"{t/100:4.2f}    {lambda_schedule(t, cfg):.4f}")

# dynamic mode: the ramp multiplies the sample's own difficulty instead
# of a global constant, so hard samples get stronger augmentation
dyn = LossConfig(variant="dasa", difficulty="DA", strength_mode="DA",
                 lambda0=0.2, gamma=2.0, ramp_total_iters=100, deferred_fraction=0.4)
print("\nt/T     lambda for an easy sample (coef 0.1) and a hard one (coef 0.9)")
for t in (40, 70, 100):
    easy = lambda_schedule(t, dyn, coef=0.1)
    hard = lambda_schedule(t, dyn, coef=0.9)
    print(f"{t/100:4.2f}    {easy:.4f}   {hard:.4f}")
