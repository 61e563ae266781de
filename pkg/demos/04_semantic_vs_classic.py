"""Compare the semantic link with Huffman/fixed-length + RS + 64-QAM over Rayleigh fading.

Run: python3 demos/04_semantic_vs_classic.py
"""

import numpy as np

from litesc import bench, classic, deepsc
from litesc.textpipe import load_corpus

corpus = load_corpus()
test = corpus.test[:300]
model = bench.trained_model(corpus, "rayleigh", "perfect", seed=0)
books = {name: classic.build_codebook(name, corpus.train) for name in classic.SCHEMES}

print(f"{'SNR':>4} {'semantic':>9} {'huffman':>8} {'fixed5':>8}")
for snr in (0, 3, 6, 9, 12, 15, 18):
    sc = deepsc.evaluate(model, test, "rayleigh", snr, "perfect", seed=snr)["bleu"]
    base = [classic.baseline_pipeline(test, books[n], rs, "rayleigh", snr, seed=snr, vocab_size=len(corpus.vocab)).bleu
            for n, rs in classic.SCHEMES.items()]
    print(f"{snr:4d} {sc:9.3f} " + " ".join(f"{b:8.3f}" for b in base))

# Bits per sentence for the classic chain, for scale.
lengths = [len(classic.rs_encode(classic.source_encode(s.tokens, books["huffman"]), classic.SCHEMES["huffman"])) for s in test]
print(f"huffman+RS(7,5): {np.mean(lengths) / 6:.1f} 64-QAM symbols per sentence on average")
