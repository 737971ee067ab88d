"""Staged probe for the single-freq + blob dataset design.

Stage A: noise-mode privacy at amps {0.25, 0.30} x seeds 42/43/44.
Stage B: learned + unet privacy and recon metrics at winning amp x seeds.
Stage C: radius sweep at winning amp.
"""
import sys
import time

import numpy as np

import freqshield.data as data_mod
from freqshield.data import SynthConfig, gen_synthetic
from freqshield.engine import (
    ArlConfig,
    compute_bounds,
    evaluate_utility,
    radius_sweep,
    train_arl,
    train_frozen_adversary,
    train_reconstructor,
)

SEEDS = (42, 43, 44)


N_EXAMPLES = 640


def split_at(amp):
    data_mod._STRIPE_AMP = amp
    return gen_synthetic(SynthConfig(n_examples=N_EXAMPLES, seed=42))


ATTACK_EPOCHS = 20


def run_mode(split, mode, seed, recon=False):
    cfg = ArlConfig(mode=mode, seed=seed, attack_epochs=ATTACK_EPOCHS)
    t0 = time.time()
    system = train_arl(cfg, split)
    ut = evaluate_utility(system, split)
    atk = train_frozen_adversary(system, split)
    priv = atk.metrics["privacy_accuracy"]
    out = dict(mode=mode, seed=seed, utility=ut, privacy=priv,
               train_s=round(time.time() - t0, 1))
    if recon:
        rec = train_reconstructor(system, split)
        sim = rec.metrics
        out.update(mse=sim.mse, l1=sim.l1, psnr=sim.psnr,
                   ssim=sim.ssim, ms_ssim=sim.ms_ssim)
    return out


def main():
    stage = sys.argv[1] if len(sys.argv) > 1 else "A"
    if stage == "A":
        for amp in (0.25,):
            split = split_at(amp)
            for seed in SEEDS:
                r = run_mode(split, "noise", seed)
                print(f"amp={amp} noise seed={seed} "
                      f"priv={r['privacy']:.2f} ut={r['utility']:.2f} "
                      f"({r['train_s']}s)", flush=True)
    elif stage == "B":
        global ATTACK_EPOCHS
        ATTACK_EPOCHS = 20
        amp = float(sys.argv[2])
        split = split_at(amp)
        for seed in SEEDS:
            for mode in ("noise", "learned", "unet_only"):
                r = run_mode(split, mode, seed, recon=(mode != "noise"))
                line = (f"amp={amp} {mode} seed={seed} "
                        f"priv={r['privacy']:.2f} ut={r['utility']:.2f}")
                if mode != "noise":
                    line += (f" mse={r['mse']:.1f} l1={r['l1']:.2f} "
                             f"psnr={r['psnr']:.2f} ssim={r['ssim']:.4f} "
                             f"msssim={r['ms_ssim']:.4f}")
                print(line + f" ({r['train_s']}s)", flush=True)
    elif stage == "C":
        amp = float(sys.argv[2])
        split = split_at(amp)
        cfg = ArlConfig(mode="learned", seed=42, attack_epochs=ATTACK_EPOCHS)
        for pt in radius_sweep(cfg, [0.02, 0.05, 0.15, 0.4], split):
            print(f"amp={amp} sweep r={pt.radius} priv={pt.privacy:.2f} "
                  f"ut={pt.utility:.2f}", flush=True)
    elif stage == "R":
        amp = float(sys.argv[2])
        split = split_at(amp)
        for mode, radius in (("identity", 0.05), ("lp_only", 0.0)):
            cfg = ArlConfig(mode=mode, radius=radius, seed=42,
                            attack_epochs=ATTACK_EPOCHS)
            system = train_arl(cfg, split)
            priv = train_frozen_adversary(system, split).metrics["privacy_accuracy"]
            sim = train_reconstructor(system, split).metrics
            print(f"amp={amp} {mode} r={radius} priv={priv:.2f} "
                  f"mse255={sim.mse:.1f} mse01={sim.mse/65025.0:.5f} "
                  f"ssim={sim.ssim:.4f}", flush=True)


if __name__ == "__main__":
    main()
