# Reading a phone-level CTM and summarising phone durations
from redmask import duration_stats, parse_ctm

ctm = """\
spk1_001 1 0.00 0.12 SIL -
spk1_001 1 0.12 0.03 k 0
spk1_001 1 0.15 0.09 a 0
spk1_001 1 0.24 0.03 t 0
spk1_001 1 0.27 0.11 s 1
spk1_001 1 0.38 0.14 i 1
spk1_001 1 0.52 0.20 SIL -
spk1_002 1 0.00 0.05 SIL -
spk1_002 1 0.05 0.08 m 0
spk1_002 1 0.13 0.10 a 0
spk1_002 1 0.23 0.04 n 0
spk1_002 1 0.27 0.10 SIL -
""".splitlines()

alignments = parse_ctm(ctm)
for ali in alignments:
    words = [(w.word_index, w.start_frame, w.end_frame) for w in ali.words]
    print(ali.utt_id, "words (index, start, end):", words)

stats = duration_stats(alignments)
print(stats.to_tsv())
# phones of three frames or fewer are the ones fast speech tends to swallow
print(f"mean phone {stats.overall_mean_sec:.3f} s, short ratio {stats.short_phone_ratio:.2f}")
