"""Smaller scoring tasks: question answering, feature detection, summaries.

Each block builds a tiny in-memory submission and prints its score, so the
arithmetic can be followed by hand.
"""

from videval.retrieval import (
    accuracy,
    average_precision,
    msum_objective,
    msum_precision,
    msum_subjective,
    prf,
    ranked_answer_mrr,
)
from videval.rounding import fixed
from videval.submission import Answer, AnswerSheet

key = AnswerSheet((
    Answer("q1", "multiple_choice", "B"),
    Answer("q2", "multiple_choice", "D"),
    Answer("q3", "ranked_list", ("bob", "ann", "cy")),
    Answer("q4", "ranked_list", ("dog", "cat")),
))
team = AnswerSheet((
    Answer("q1", "multiple_choice", "B"),
    Answer("q2", "multiple_choice", "A"),
    Answer("q3", "ranked_list", ("ann", "bob", "cy")),
    Answer("q4", "ranked_list", ("cat", "fox", "dog")),
))
print("video understanding answers")
print(f"  multiple-choice accuracy: {fixed(accuracy(team, key), 3)}")
print(f"  ranked-answer reciprocal rank: {fixed(ranked_answer_mrr(team, key), 3)}")

print("\nfeature detection on a 20-shot collection")
truth = {"flooding": {"s01", "s04", "s09"}, "smoke": {"s02"}}
submitted = {"flooding": ["s04", "s07", "s01", "s12"], "smoke": ["s05", "s02"]}
for feature, shots in submitted.items():
    rel = truth[feature]
    tp = len(rel & set(shots))
    p, r, f1, _ = prf(tp, len(shots) - tp, len(rel) - tp)
    ap = average_precision(shots, rel)
    tn = 20 - len(shots) - (len(rel) - tp)
    print(f"  {feature:<9} AP {fixed(ap, 3)}  P {fixed(p, 3)}  R {fixed(r, 3)}  F1 {fixed(f1, 3)}  TN {tn}")

print("\nmovie summary")
print(f"  facts recalled: {fixed(msum_objective(5, 13), 3)}")
print(f"  claim precision: {fixed(msum_precision(5, 2), 3)}")
print(f"  subjective quality (1-7 scale): {fixed(msum_subjective(6, 5, 2), 3)}")
