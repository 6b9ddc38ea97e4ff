"""Sampled pools versus full judgments.

Builds a small synthetic campaign twice from the same seed: once judging
every retrieved item to depth 200, once with the top 20 judged in full and
the rest at a 20% sample. Scores each run with AP on the full judgments and
xinfAP on the sample, then prints how closely the sampled estimate tracks
the full one.
"""

import numpy as np

from videval.pooling import PoolSpec, build_pools, pool_stats
from videval.retrieval import average_precision, topic_xinfap
from videval.rounding import fixed
from videval.synth import synthetic_avs

DEPTH = 200
kwargs = dict(n_runs=8, n_topics=10, depth=DEPTH, candidates=800, relevant_per_topic=60, seed=11)

full_spec = PoolSpec.from_ranges([(1, DEPTH, 1.0)])
sampled_spec = PoolSpec.from_ranges([(1, 20, 1.0), (21, DEPTH, 0.2)], seed=11)

runs, full = synthetic_avs(pool_spec=full_spec, **kwargs)
runs_again, sampled = synthetic_avs(pool_spec=sampled_spec, **kwargs)
assert [r.run_tag for r in runs] == [r.run_tag for r in runs_again]

pools = build_pools(runs, sampled_spec)
judged_full = sum(len(full.labels(t)) for t in full.topics)
judged_sampled = sum(len(sampled.labels(t)) for t in sampled.topics)
print(f"judgments needed: full {judged_full}, sampled {judged_sampled} "
      f"({fixed(100 * judged_sampled / judged_full, 1)}%)")

print("\nrun        AP(full)  xinfAP(sampled)")
ap_means, inf_means = [], []
for run in runs:
    ap = np.mean([average_precision(run.items(t), {i for i, rel in full.labels(t).items() if rel})
                  for t in full.topics])
    inf = np.mean([topic_xinfap(run, t, sampled, membership=pools.membership[t]).value
                   for t in sampled.topics])
    ap_means.append(ap)
    inf_means.append(inf)
    print(f"{run.run_tag:<10} {fixed(ap, 4):>8}  {fixed(inf, 4):>15}")

order_ap = np.argsort(ap_means)[::-1]
order_inf = np.argsort(inf_means)[::-1]
print(f"\nmean absolute gap: {fixed(np.mean(np.abs(np.subtract(ap_means, inf_means))), 4)}")
print(f"same top run under both: {order_ap[0] == order_inf[0]}")
print(f"rank correlation of run orderings: {fixed(np.corrcoef(np.argsort(order_ap), np.argsort(order_inf))[0, 1], 3)}")

print("\npool statistics for the first three topics")
for row in pool_stats(runs, pools, sampled)[:3]:
    print(f"  topic {row.topic}: {row.unique_submitted} unique of {row.total_submitted} submitted, "
          f"{row.judged} judged, {fixed(row.pct_judged_relevant, 2)}% of judged relevant")
