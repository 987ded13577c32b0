"""From raw ratings to a qualitative reputation level.

A small endorsement network decides how much each rater is trusted. Their
ratings of one service are then combined with those credibility weights, and
the resulting normalized rating is mapped onto five levels.

    python3 demos/credibility_and_levels.py
"""

from repboot.core import quantize_level
from repboot.credibility import RaterGraph, aggregate_rating, pagerank_credibility

# "ann" is endorsed by everyone, "eve" by nobody.
graph = RaterGraph(
    raters=("ann", "bob", "cat", "eve"),
    endorsements=(("bob", "ann", 1.0), ("cat", "ann", 1.0), ("eve", "ann", 1.0),
                  ("ann", "bob", 1.0), ("bob", "cat", 0.5)),
)
cred = pagerank_credibility(graph)
print("credibility (1.0 = most trusted rater)")
for rater, c in sorted(cred.items(), key=lambda kv: -kv[1]):
    print(f"  {rater:<4} {c:.3f}")

# eve rates generously, but her opinion carries little weight
ratings = {"ann": 0.55, "bob": 0.60, "cat": 0.40, "eve": 1.00}
events = [(ratings[r], cred[r]) for r in ratings]
weighted = aggregate_rating(events, conventional=True)
plain = sum(ratings.values()) / len(ratings)
print(f"\nplain mean rating        {plain:.3f} -> level {quantize_level(plain, 5)} of 5")
print(f"credibility-weighted     {weighted:.3f} -> level {quantize_level(weighted, 5)} of 5")
print(f"credible share of rating {aggregate_rating(events):.3f}")
