"""Stages B-D at stripe amp 0.40: unet/learned 3 seeds, recon, sweep, controls."""
import time

import freqshield.data as data_mod

data_mod._STRIPE_AMP = 0.40

from freqshield.data import SynthConfig, gen_synthetic
from freqshield.engine import (ArlConfig, compute_bounds, evaluate_utility, radius_sweep,
                               train_arl, train_frozen_adversary, train_reconstructor)

T0 = time.monotonic()


def stamp(msg):
    print(f"[{time.monotonic() - T0:6.1f}s] {msg}", flush=True)


split = gen_synthetic(SynthConfig(n_examples=512, seed=42))
stamp(f"data: train={len(split.train)} test={len(split.test)}")

recon = {}
for mode in ("learned", "unet_only"):
    for seed in (42, 43, 44):
        cfg = ArlConfig(mode=mode, epochs=10, seed=seed)
        system = train_arl(cfg, split)
        util = evaluate_utility(system, split)
        leak = train_frozen_adversary(system, split)
        priv = leak.metrics["privacy_accuracy"]
        rec = train_reconstructor(system, split)
        recon[(mode, seed)] = rec.metrics
        stamp(f"{mode} seed={seed}: utility={util:.2f} privacy={priv:.2f} "
              f"delta={util - priv:.2f} mse={rec.metrics.mse:.1f} "
              f"ssim={rec.metrics.ssim:.3f}")

for seed in (42, 43, 44):
    ours, base = recon[("learned", seed)], recon[("unet_only", seed)]
    stamp(f"recon seed={seed}: worse_than={ours.worse_than(base)}/5 "
          f"mse {ours.mse:.1f} vs {base.mse:.1f}, l1 {ours.l1:.1f} vs {base.l1:.1f}, "
          f"psnr {ours.psnr:.2f} vs {base.psnr:.2f}, ssim {ours.ssim:.3f} vs {base.ssim:.3f}, "
          f"ms_ssim {ours.ms_ssim:.3f} vs {base.ms_ssim:.3f}")

points = []
for pt in radius_sweep(ArlConfig(mode="learned", epochs=10, seed=42),
                       [0.02, 0.05, 0.15, 0.4], split):
    points.append(pt)
    stamp(f"sweep r={pt.radius}: utility={pt.utility:.2f} privacy={pt.privacy:.2f}")

upper, lower = compute_bounds(split, seed=42)
stamp(f"bounds: utility_upper={upper:.2f} privacy_lower={lower:.2f}")

for label, cfg in (("lp_only r=0", ArlConfig(mode="lp_only", radius=0.0, epochs=10, seed=42)),
                   ("identity", ArlConfig(mode="identity", epochs=10, seed=42))):
    system = train_arl(cfg, split)
    util = evaluate_utility(system, split)
    priv = train_frozen_adversary(system, split).metrics["privacy_accuracy"]
    stamp(f"{label}: utility={util:.2f} privacy={priv:.2f}")
