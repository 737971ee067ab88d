import freqshield.data as data_mod
from freqshield.data import SynthConfig, gen_synthetic
from freqshield.engine import ArlConfig, train_arl, train_frozen_adversary


def run(tag, **cfg_kw):
    split = gen_synthetic(SynthConfig(n_examples=640, seed=42))
    cfg = ArlConfig(mode="learned", seed=43, attack_epochs=20, **cfg_kw)
    system = train_arl(cfg, split)
    priv = train_frozen_adversary(system, split).metrics["privacy_accuracy"]
    print(f"{tag}: priv={priv:.2f}", flush=True)


data_mod._PHASE_JITTER = 1.0
run("jitter 1.0")
data_mod._PHASE_JITTER = 0.6

data_mod._EDGE_TAPER = 4
run("taper 4")
data_mod._EDGE_TAPER = 3

data_mod._STRIPE_AMP = 0.22
run("amp 0.22")
data_mod._STRIPE_AMP = 0.25

run("epochs 15", epochs=15)
