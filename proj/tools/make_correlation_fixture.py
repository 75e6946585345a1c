#!/usr/bin/env python3
"""Writes the correlation fixture: 200 pairs rated by 3 raters each.

scores.jsonl: judge equals the mean human rating, bleu is seeded uniform noise.
ratings.jsonl: the study export format.
"""
import argparse
import hashlib
import json
import pathlib
import random

ap = argparse.ArgumentParser()
ap.add_argument("out", type=pathlib.Path)
ap.add_argument("--pairs", type=int, default=200)
ap.add_argument("--seed", type=int, default=20240601)
args = ap.parse_args()

rng = random.Random(args.seed)
args.out.mkdir(parents=True, exist_ok=True)
scores, ratings = [], []
for i in range(args.pairs):
    doc_id, gt_index = "doc_%04d" % (i // 10), i % 10
    pair_id = "pr_" + hashlib.sha256(f"fixture/{doc_id}/{gt_index}".encode()).hexdigest()[:16]
    marks = [rng.randint(0, 10) for _ in range(3)]
    for r, m in enumerate(marks):
        ratings.append({"rater_id": "rater_%02d" % (1 + (i + r) % 30), "pair_id": pair_id, "score": m,
                        "timestamp": "2024-06-01T00:00:00Z",
                        "source": {"parser": "fixture", "doc_id": doc_id, "gt_index": gt_index}})
    base = {"parser": "fixture", "doc_id": doc_id, "gt_index": gt_index,
            "placement": "inline" if gt_index % 2 else "display", "missing": False, "status": "scored"}
    scores.append(dict(base, metric="judge", value=sum(marks) / 3))
    scores.append(dict(base, metric="bleu", value=rng.random()))

dump = lambda rows: "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in rows)
(args.out / "scores.jsonl").write_text(dump(scores))
(args.out / "ratings.jsonl").write_text(dump(ratings))
