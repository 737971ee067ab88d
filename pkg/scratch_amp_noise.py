"""Stage A: privacy leak of the noise baseline vs stripe amplitude."""
import time

import freqshield.data as data_mod
from freqshield.data import SynthConfig, gen_synthetic
from freqshield.engine import ArlConfig, evaluate_utility, train_arl, train_frozen_adversary

for amp in (0.30, 0.40, 0.50):
    data_mod._STRIPE_AMP = amp
    split = gen_synthetic(SynthConfig(n_examples=512, seed=42))
    for seed in (42, 43, 44):
        t0 = time.monotonic()
        cfg = ArlConfig(mode="noise", epochs=10, seed=seed)
        system = train_arl(cfg, split)
        util = evaluate_utility(system, split)
        attack = train_frozen_adversary(system, split)
        priv = attack.metrics["privacy_accuracy"]
        print(f"amp={amp:.2f} seed={seed}: utility={util:.2f} "
              f"privacy={priv:.2f} delta={util - priv:.2f} "
              f"({time.monotonic() - t0:.0f}s)", flush=True)
