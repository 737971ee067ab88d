"""Dry run of the acceptance-scale experiments; prints measurements."""
import time

import freqshield as fs

t0 = time.monotonic()
split = fs.gen_synthetic(fs.SynthConfig())
print(f"[{time.monotonic()-t0:6.1f}s] data: train={len(split.train)} test={len(split.test)}")

upper, lower = fs.compute_bounds(split, seed=42)
print(f"[{time.monotonic()-t0:6.1f}s] bounds: utility_upper={upper:.2f} privacy_lower={lower:.2f}")

for mode in ("learned", "unet_only", "noise", "lp_only"):
    for seed in (42,):
        cfg = fs.ArlConfig(mode=mode, seed=seed)
        tA = time.monotonic()
        system = fs.train_arl(cfg, split)
        tB = time.monotonic()
        util = fs.evaluate_utility(system, split)
        leak = fs.train_frozen_adversary(system, split)
        tC = time.monotonic()
        priv = leak.metrics["privacy_accuracy"]
        print(f"[{time.monotonic()-t0:6.1f}s] {mode} seed={seed}: "
              f"utility={util:.2f} privacy={priv:.2f} delta={util-priv:.2f} "
              f"(train {tB-tA:.0f}s, attack {tC-tB:.0f}s)")

# low-pass-only at radius zero: mean image only
cfg = fs.ArlConfig(mode="lp_only", radius=0.0, seed=42)
system = fs.train_arl(cfg, split)
util = fs.evaluate_utility(system, split)
priv = fs.train_frozen_adversary(system, split).metrics["privacy_accuracy"]
print(f"[{time.monotonic()-t0:6.1f}s] lp_only r=0: utility={util:.2f} privacy={priv:.2f}")

# identity privacy: attacker on raw images
cfg = fs.ArlConfig(mode="identity", seed=42)
system = fs.train_arl(cfg, split)
util = fs.evaluate_utility(system, split)
priv = fs.train_frozen_adversary(system, split).metrics["privacy_accuracy"]
print(f"[{time.monotonic()-t0:6.1f}s] identity: utility={util:.2f} privacy={priv:.2f}")
