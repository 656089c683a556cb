"""Regenerates the small essay/lexicon/embedding fixture under tests/data/fixture."""
import os
import random

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "fixture")

CUES = {
    "anger": ["furious", "rage", "outraged", "angry"],
    "disgust": ["disgusting", "gross", "vile", "sickening"],
    "fear": ["afraid", "scared", "terrified", "panic"],
    "joy": ["happy", "delighted", "wonderful", "glad"],
    "neutral": ["report", "article", "information", "statement"],
    "sadness": ["sad", "heartbroken", "grief", "crying"],
    "surprise": ["shocked", "unexpected", "astonished", "amazed"],
}
FILLER = ["the", "news", "about", "people", "families", "today", "storm", "city", "was", "i", "felt",
          "reading", "this", "and", "so", "very", "after", "story", "world", "they"]

LEXICON = [
    ("furious", "anger", 0.906), ("rage", "anger", 0.891), ("angry", "anger", 0.781),
    ("outraged", "anger", 0.859), ("happy", "joy", 0.735), ("delighted", "joy", 0.812),
    ("wonderful", "joy", 0.797), ("glad", "joy", 0.562), ("sad", "sadness", 0.844),
    ("heartbroken", "sadness", 0.938), ("grief", "sadness", 0.875), ("crying", "sadness", 0.672),
    ("disgusting", "disgust", 0.906), ("vile", "disgust", 0.828), ("afraid", "fear", 0.766),
    ("terrified", "fear", 0.969), ("panic", "fear", 0.859), ("shocked", "surprise", 0.781),
    ("astonished", "surprise", 0.844), ("storm", "fear", 0.453), ("storm", "anger", 0.234),
    ("wonderful", "trust", 0.5), ("happy", "anticipation", 0.41),
]


def essay(rng, label):
    words = [rng.choice(FILLER) for _ in range(rng.randint(6, 14))]
    for _ in range(rng.randint(1, 3)):
        words.insert(rng.randint(0, len(words)), rng.choice(CUES[label]))
    text = " ".join(words)
    if rng.random() < 0.5:
        text = text.capitalize() + "!!"
    if rng.random() < 0.3:
        text += " 2022"
    return text


def write_split(path, rng, n, labeled):
    labels = sorted(CUES)
    with open(path, "w") as f:
        f.write("message_id\tessay\tempathy" + ("\temotion" if labeled else "") + "\n")
        for i in range(n):
            label = labels[i % len(labels)]
            row = [f"{os.path.basename(path)[:2]}{i + 1:03d}", essay(rng, label), f"{rng.uniform(1, 7):.3f}"]
            if labeled:
                row.append(label)
            f.write("\t".join(row) + "\n")


def main():
    os.makedirs(OUT, exist_ok=True)
    rng = random.Random(2022)
    write_split(os.path.join(OUT, "train.tsv"), rng, 20, True)
    write_split(os.path.join(OUT, "validation.tsv"), rng, 10, True)
    write_split(os.path.join(OUT, "test.tsv"), rng, 8, False)

    with open(os.path.join(OUT, "nrc_lexicon.txt"), "w") as f:
        f.write("word\temotion\tscore\n")
        for w, e, s in LEXICON:
            f.write(f"{w}\t{e}\t{s}\n")

    vocab = sorted({w for ws in CUES.values() for w in ws} | set(FILLER) | {"unusedword"})
    vocab.remove("sickening")  # one cue word stays out of vocabulary
    np_rng = np.random.default_rng(7)
    with open(os.path.join(OUT, "embeddings.txt"), "w") as f:
        f.write(f"{len(vocab)} 300\n")
        for w in vocab:
            vec = np_rng.normal(0.0, 0.3, 300)
            f.write(w + " " + " ".join(f"{v:.5f}" for v in vec) + "\n")

    with open(os.path.join(OUT, "config.yaml"), "w") as f:
        f.write("""paths:
  train: train.tsv
  validation: validation.tsv
  test: test.tsv
  nrc_lexicon: nrc_lexicon.txt
  embeddings: embeddings.txt
  stopwords: ../../../resources/stopwords_en.txt
  output_dir: out
encoder:
  local_path: ../tiny_roberta
  max_subword_len: 32
  freeze: true
train:
  variant: roberta_nrc_ewe
  batch_size: 8
  max_epochs: 3
  seeds: [13]
""")


if __name__ == "__main__":
    main()
