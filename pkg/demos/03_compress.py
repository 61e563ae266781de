"""Prune and quantise a trained transceiver, then report the compression ratio.

Run: python3 demos/03_compress.py
Reuses (or trains, about 2 minutes) the cached Rician model from the bench cache.
"""

from litesc import bench, deepsc, slim
from litesc.textpipe import load_corpus

corpus = load_corpus()
train, test = corpus.train[:5000], corpus.test[:300]
base = bench.trained_model(corpus, "rician", "perfect", seed=0)


def bleu(model):
    return deepsc.evaluate(model, test, "rician", 12.0, "perfect", seed=1)["bleu"]


print(f"full precision: BLEU {bleu(base):.3f}")
tune = deepsc.TrainConfig("perfect", "rician", (0, 12), seed=1)

model = bench._clone(base)
masks = slim.prune_model(model, 0.9)
print(f"pruned to sparsity {slim.sparsity(masks):.3f}: BLEU {bleu(model):.3f} before fine-tuning")
slim.finetune_pruned(model, train, 4, tune)
print(f"after 4 fine-tune epochs: BLEU {bleu(model):.3f}")

qcfg = slim.QuantConfig(8)
slim.qat_finetune(model, qcfg, train, 1, tune)
report = slim.CompressionReport.from_masks(masks, 0.9, 8, bleu_before=bleu(base), bleu_after=bleu(model))
print(report.csv_row(header=True))
