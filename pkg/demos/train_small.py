"""
Train a classifier on a small generated dataset
===============================================

End-to-end: generate a small plain/static dataset (4 emitters, 400 packets
each), train the CNN for a few epochs, and plot the learning curve plus the
test-set confusion matrix. Runs in a couple of minutes on a laptop; the
full desk-scale studies live behind the CLI (see README).
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from txident.dataset import split_shuffle
from txident.experiment import ExperimentConfig, generate_or_load
from txident.network import Arch, TrainConfig, evaluate, train

cfg = ExperimentConfig(n_emitters=4, packets_per_emitter=400, epochs=6, replicates=1)
ds, ds_dir = generate_or_load(cfg, "demo_cache")
print(f"dataset at {ds_dir}: counts {ds.counts}")

split = split_shuffle(ds, cfg.seeds.train)
params, history = train(
    ds, split, Arch(n_classes=cfg.n_emitters), TrainConfig(epochs=cfg.epochs, seed=cfg.seeds.train)
)
accuracy, confusion = evaluate(params, ds, split, "test")
print(f"test accuracy: {accuracy:.3f}")

epochs = [row[0] for row in history]
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
ax1.plot(epochs, [row[1] for row in history], marker="o", label="train loss")
ax1.set_xlabel("epoch")
ax1.set_ylabel("cross-entropy")
ax1.legend(loc="upper right")
twin = ax1.twinx()
twin.plot(epochs, [row[2] for row in history], marker="s", color="tab:green", label="val accuracy")
twin.set_ylabel("accuracy")
twin.legend(loc="lower right")
ax1.set_title("learning curve")

im = ax2.imshow(confusion, cmap="Blues")
ax2.set_title(f"test confusion (accuracy {accuracy:.3f})")
ax2.set_xlabel("predicted emitter")
ax2.set_ylabel("true emitter")
for i in range(confusion.shape[0]):
    for j in range(confusion.shape[1]):
        ax2.text(j, i, confusion[i, j], ha="center", va="center", fontsize=8)
fig.colorbar(im, ax=ax2, shrink=0.8)

fig.tight_layout()
fig.savefig("demos_train_small.png", dpi=130)
print("wrote demos_train_small.png")
