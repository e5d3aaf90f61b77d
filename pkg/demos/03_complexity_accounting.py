"""The multiplication cost model against the instrumented counter.

The layer cost model has six terms; two of them grow with the head count
(the attention score products and the recombination of the stacked
heads). The linalg kernel can count every scalar multiplication it
actually performs, attributed to the forward step that issued it, so the
model is checkable. The head-dependent terms must match exactly; the
mixing step differs by a known bookkeeping amount because the shared
(1-lam) rescaling is computed once rather than per head.
"""

from mtabl import complexity_estimate, measure_multiplications

D, T, D_OUT, T_OUT = 40, 10, 3, 1
print(f"dimensions: input {D}x{T}, output {D_OUT}x{T_OUT}\n")

header = (f"{'K':>2} {'predicted':>10} {'attention':>10} {'measured':>10} "
          f"{'recombine':>10} {'measured':>10}")
print(header)
for k in range(1, 6):
    est = complexity_estimate(D, T, D_OUT, T_OUT, k)
    got = measure_multiplications(D, T, D_OUT, T_OUT, k)
    print(f"{k:>2} {est.total:>10} {est.attention_scores:>10} "
          f"{got['attention_scores']:>10} {est.head_recombination:>10} "
          f"{got['head_recombination']:>10}")

est = complexity_estimate(D, T, D_OUT, T_OUT, 1)
print(f"\nsingle-head reference total (no recombination term): "
      f"{est.single_head_total}")

got = measure_multiplications(D, T, D_OUT, T_OUT, 3)
print("\nfull measured breakdown at K=3:")
for scope, count in sorted(got.items()):
    print(f"  {scope:20s} {count}")
