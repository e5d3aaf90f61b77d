"""Training on the synthetic tasks: where extra attention heads pay off.

The generator produces two task flavors. At difficulty "single" the class
is marked at one temporal position, so one attention head suffices. At
difficulty "multi" each class is a pair of positions and every position
belongs to two classes, so no single time step resolves the class; this
is the regime multi-head attention is built for. Here we train the
single-head layer and 2- and 3-head variants under an identical budget
and compare validation macro F1 across seeds.
"""

import numpy as np

from mtabl import OptimConfig, evaluate, predict_labels, synth_generate, topology, train

ds = synth_generate(240, n_features=8, window=10, seed=0, difficulty="multi",
                    split=(0.6, 0.25, 0.15))
print(f"pair-structured dataset: {len(ds.train)} train / "
      f"{len(ds.validation)} validation / {len(ds.test)} test samples\n")


def run(kind, heads, seed, verbose=False):
    spec = topology("A", input_dims=ds.sample_dims(), attention_kind=kind, heads=heads)
    cfg = OptimConfig(max_epochs=80, batch_size=32, learning_rate=0.01, seed=seed)
    sink = None
    if verbose:
        def sink(r):
            if r.epoch % 20 == 0:
                print(f"  epoch {r.epoch:3d}  loss {r.train_loss:.4f}  "
                      f"val F1 {r.val_report.macro_f1:.3f}  lam {r.lambdas[0]:.3f}")
    params, _ = train(spec, ds, cfg, log_sink=sink)
    preds = predict_labels(spec, params, ds.validation)
    return evaluate(preds, ds.labels("validation")).macro_f1


print("one training run in detail (3 heads, seed 0):")
run("mtabl", 3, 0, verbose=True)

print("\nvalidation macro F1 over 4 seeds:")
for kind, heads in [("tabl", 1), ("mtabl", 2), ("mtabl", 3)]:
    scores = [run(kind, heads, seed) for seed in range(4)]
    label = "single head" if kind == "tabl" else f"{heads} heads"
    print(f"  {label:12s} mean {np.mean(scores):.4f}  "
          f"per seed {[f'{s:.3f}' for s in scores]}")

print("\nThe single-head layer sometimes settles into a worse optimum on "
      "pair-coded patterns; the multi-head variants recover it on every seed.")
