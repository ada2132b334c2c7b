#!/usr/bin/env python3
"""Regenerates the bundled toy sense inventory and 16-d word vectors.

Glosses are built from a pool of plain vocabulary words; a sense's target
vector is the normalized sum of its gloss-word vectors plus noise, so the
gloss -> vector map is learnable by a small recurrent encoder. Polysemous
lemmas carry a word vector dominated by their first sense, and some of their
senses share a gloss with a monosemous synonym (as synsets do).
"""

import argparse
import json
import os

import numpy as np

DIM = 16


def unit(v):
    return v / np.linalg.norm(v)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "tests", "data"))
    ap.add_argument("--seed", type=int, default=20161016)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    vectors = {}
    pool = [f"w{i:02d}" for i in range(60)]
    for w in pool:
        vectors[w] = unit(rng.normal(size=DIM))
    stop = ["a", "the", "of", "or", "that", "which"]
    for w in stop:
        vectors[w] = 0.3 * unit(rng.normal(size=DIM))

    def gloss_tokens(k_min=3, k_max=6):
        k = int(rng.integers(k_min, k_max + 1))
        words = list(rng.choice(pool, size=k, replace=False))
        if rng.random() < 0.5:
            words.insert(int(rng.integers(0, len(words) + 1)), str(rng.choice(stop)))
        return words

    def target_of(words, noise=0.1):
        s = sum(vectors[w] for w in words)
        return unit(unit(s) + noise * rng.normal(size=DIM) / np.sqrt(DIM))

    records = []
    poly = [f"poly{i}" for i in range(8)]
    poly_senses = {}
    for p in poly:
        senses = []
        for s in range(2):
            g = gloss_tokens()
            senses.append((f"{p}%{s + 1}", g, target_of(g, noise=0.05)))
        poly_senses[p] = senses
        vectors[p] = unit(senses[0][2] + 0.6 * senses[1][2])

    # monosemous synonyms sharing a synset gloss with one polysemous sense
    syn_of = {}
    for i, p in enumerate(poly[:4]):
        sid, g, t = poly_senses[p][1]
        name = f"syn{i}"
        syn_of[sid] = name
        vectors[name] = unit(t + 0.05 * rng.normal(size=DIM) / np.sqrt(DIM))
        records.append({"sense_id": f"{name}%1", "lemma": name, "pos": "n", "synonyms": [p], "gloss": " ".join(g)})

    for i in range(40):
        name = f"mono{i:02d}"
        g = gloss_tokens()
        if i % 3 == 0:
            g.insert(int(rng.integers(0, len(g) + 1)), poly[i % len(poly)])
        vectors[name] = target_of(g)
        pos = ["n", "v", "a", "r"][i % 4]
        text = " ".join(g)
        text = text[0].upper() + text[1:] + "."
        records.append({"sense_id": f"{name}%1", "lemma": name, "pos": pos, "synonyms": [], "gloss": text})

    for p in poly:
        for sid, g, _ in poly_senses[p]:
            syns = [syn_of[sid]] if sid in syn_of else []
            records.append({"sense_id": sid, "lemma": p, "pos": "n", "synonyms": syns, "gloss": "; ".join([" ".join(g)])})

    for w in stop[:3]:
        records.append({"sense_id": f"{w}%x", "lemma": w, "pos": "x", "synonyms": [],
                        "gloss": "function word"})

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "toy_lexicon.jsonl"), "w") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")
    with open(os.path.join(args.out, "toy_vectors.txt"), "w") as f:
        f.write(f"{len(vectors)} {DIM}\n")
        for w, v in vectors.items():
            f.write(w + " " + " ".join(f"{x:.6f}" for x in v) + "\n")


if __name__ == "__main__":
    main()
