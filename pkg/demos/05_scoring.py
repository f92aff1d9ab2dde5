# Word error rate with a substitution / deletion / insertion breakdown
from redmask import align_edit, score_corpus

ref = "the cat sat on the mat".split()
hyp = "the cat sat at mat today".split()
s, d, i, path = align_edit(ref, hyp)
print(f"S={s} D={d} I={i}")
for op, r, h in path:
    print(f"  {op} {r or '*':6s} {h or '*'}")

refs = {"u1": ref, "u2": "good morning".split(), "u3": "no hypothesis here".split()}
hyps = {"u1": hyp, "u2": "good morning".split()}
report = score_corpus(refs, hyps)
print(report.table_row("demo"))
print(report.detail_tsv())
# the rates are exact fractions, so they add up to the WER before rounding
print(report.rate(report.s) + report.rate(report.d) + report.rate(report.i) ==
      report.rate(report.s + report.d + report.i))
