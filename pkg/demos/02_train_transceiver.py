"""Train a small semantic transceiver on the toy corpus and sweep SNR.

Run: python3 demos/02_train_transceiver.py [epochs]
About 7 s per epoch on one core.
"""

import sys

from litesc import deepsc
from litesc.textpipe import load_corpus

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 6
corpus = load_corpus()
train, test = corpus.train[:5000], corpus.test[:300]
print(f"vocab {len(corpus.vocab)} words, {len(corpus.train)} train / {len(corpus.test)} test sentences")

model = deepsc.TransceiverModel(deepsc.ModelConfig(len(corpus.vocab)), seed=0)
cfg = deepsc.TrainConfig(csi_mode="perfect", channel="rician", snr_db=(0, 12), epochs=epochs)
log = deepsc.train(model, train, cfg, eval_sentences=test,
                   on_epoch=lambda r: print(f"epoch {r['epoch']:2d}  loss {r['loss']:.3f}  bleu {r['bleu']:.3f}"))

for mode in ("perfect", "rough", "none"):
    scores = [deepsc.evaluate(model, test, "rician", snr, mode, seed=1)["bleu"] for snr in (0, 6, 12, 18)]
    print(f"{mode:>8}: " + "  ".join(f"{s:.3f}" for s in scores))

# decode a few sentences at 6 dB
res = deepsc.evaluate(model, test[:5], "rician", 6.0, "perfect", seed=2)
for s, cand in zip(test[:5], res["candidates"]):
    print("  sent:", " ".join(corpus.vocab.decode(s.tokens)))
    print("  recv:", " ".join(corpus.vocab.decode(cand)))
