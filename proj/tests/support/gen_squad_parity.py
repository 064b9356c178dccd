#!/usr/bin/env python3
"""Regenerates tests/data/squad_parity.json.

Expected values come from the official SQuAD v1.1 evaluation logic
(normalize_answer / exact_match_score / f1_score / max over ground truths),
reproduced below verbatim in behavior. The C++ metrics module is tested for
exact parity against this file, so regenerate it only with this script.

Usage: python3 gen_squad_parity.py > ../data/squad_parity.json
"""

import json
import re
import string
import sys
from collections import Counter


def normalize_answer(s):
    def remove_articles(text):
        return re.sub(r"\b(a|an|the)\b", " ", text)

    def white_space_fix(text):
        return " ".join(text.split())

    def remove_punc(text):
        exclude = set(string.punctuation)
        return "".join(ch for ch in text if ch not in exclude)

    def lower(text):
        return text.lower()

    return white_space_fix(remove_articles(remove_punc(lower(s))))


def f1_score(prediction, ground_truth):
    prediction_tokens = normalize_answer(prediction).split()
    ground_truth_tokens = normalize_answer(ground_truth).split()
    common = Counter(prediction_tokens) & Counter(ground_truth_tokens)
    num_same = sum(common.values())
    if num_same == 0:
        return 0
    precision = 1.0 * num_same / len(prediction_tokens)
    recall = 1.0 * num_same / len(ground_truth_tokens)
    f1 = (2 * precision * recall) / (precision + recall)
    return f1


def exact_match_score(prediction, ground_truth):
    return normalize_answer(prediction) == normalize_answer(ground_truth)


def max_over_golds(fn, prediction, golds):
    return max(fn(prediction, g) for g in golds)


NORMALIZE_CASES = [
    "The Answer.",
    "",
    "   ",
    "a",
    "an apple A DAY",
    "THE CAT, the CAT!",
    "state-of-the-art",
    "U.S. Army",
    "1,234.5 meters",
    "  spaced   out\ttabs\nnewlines  ",
    "Atheist bathe lather",
    "l'État, c'est moi",
    "“the best” answer",
    "café — München – Łódź",
    "«the» guillemets",
    "A nonbreaking space",
    "(parenthetical) [bracketed] {braced}",
    "semi;colon: and/or back\\slash",
    "don't stop",
    "¿questions? ¡exclamations!",
    "Škoda Österreich Ångström",
    "the the a an the",
]

PAIRS = [
    # (prediction, [golds]) — mix of exact hits, partial overlap, misses,
    # casing/punctuation/article variants, multi-gold max, unicode.
    ("Denver Broncos", ["Denver Broncos"]),
    ("the Denver Broncos", ["Denver Broncos"]),
    ("Denver Broncos.", ["Denver Broncos", "Carolina Panthers"]),
    ("The answer is Denver Broncos", ["Denver Broncos"]),
    ("Carolina", ["Carolina Panthers"]),
    ("panthers carolina", ["Carolina Panthers"]),
    ("cat sat", ["the cat sat"]),
    ("the cat sat on", ["cat sat"]),
    ("dog", ["cat"]),
    ("", ["cat"]),
    ("the", ["cat"]),
    ("cat", ["cat", "feline", "the cat"]),
    ("feline mammal", ["cat", "feline"]),
    ("42", ["42"]),
    ("forty-two", ["42", "forty two"]),
    ("1,000,000", ["1000000"]),
    ("$5.3 billion", ["5.3 billion", "$5.3 billion"]),
    ("five point three billion dollars", ["$5.3 billion"]),
    ("July 4, 1776", ["July 4, 1776", "4 July 1776"]),
    ("4th of July 1776", ["July 4, 1776"]),
    ("Saint Bernadette Soubirous", ["Saint Bernadette Soubirous"]),
    ("St. Bernadette Soubirous", ["Saint Bernadette Soubirous"]),
    ("a copper statue of Christ", ["a copper statue of Christ"]),
    ("copper statue", ["a copper statue of Christ"]),
    ("the Main Building", ["the Main Building"]),
    ("Main Building", ["the Main Building"]),
    ("a Marian place of prayer and reflection", ["a Marian place of prayer and reflection"]),
    ("place of prayer", ["a Marian place of prayer and reflection"]),
    ("café", ["cafe"]),
    ("CAFÉ", ["café"]),
    ("München", ["Munich", "München"]),
    ("Łódź", ["Łódź"]),
    ("“Denver Broncos”", ["Denver Broncos"]),
    ("“the Broncos” won", ["Denver Broncos"]),
    ("Einstein’s theory", ["Einstein's theory"]),
    ("general relativity — 1915", ["general relativity"]),
    ("O2 and N2", ["oxygen and nitrogen"]),
    ("water (H2O)", ["water", "H2O"]),
    ("photosynthesis", ["photosynthesis", "the process of photosynthesis"]),
    ("the process of photosynthesis in plants", ["photosynthesis"]),
    ("red white and blue", ["red, white, and blue"]),
    ("blue white red", ["red, white, and blue"]),
    ("approximately 12 percent", ["12%", "about 12 percent"]),
    ("twelve", ["12"]),
    ("King Henry VIII", ["Henry VIII"]),
    ("Henry the Eighth", ["Henry VIII"]),
    ("in the year 1066", ["1066"]),
    ("1066 AD", ["1066"]),
    ("An Atheist author", ["atheist author"]),
    ("bathe lather", ["bathe lather gather"]),
    ("a an the", ["cat"]),
    ("don't stop believing", ["don't stop"]),
]


def main():
    out = {
        "normalize": [
            {"input": s, "expected": normalize_answer(s)} for s in NORMALIZE_CASES
        ],
        "pairs": [
            {
                "prediction": pred,
                "golds": golds,
                "em": int(max_over_golds(exact_match_score, pred, golds)),
                "f1": max_over_golds(f1_score, pred, golds),
            }
            for pred, golds in PAIRS
        ],
    }
    json.dump(out, sys.stdout, ensure_ascii=False, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
