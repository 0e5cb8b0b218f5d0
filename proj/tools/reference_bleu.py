#!/usr/bin/env python3
"""Independent mteval-style corpus BLEU used once to freeze test fixtures.

Implements 13a tokenization, 4-gram precisions with exponential smoothing of
zero match counts, and the standard brevity penalty. Kept separate from the
C++ scorer so fixture values come from a second implementation.
"""
import math
import re
import sys

_PUNCT = re.compile(r'([ !"#$%&()*+/:;<=>?@\[\\\]^_`{|}~])')
_PRE_NUM = re.compile(r'([^0-9])([\.,])')
_POST_NUM = re.compile(r'([\.,])([^0-9])')
_DIGIT_DASH = re.compile(r'([0-9])(-)')


def tok13a(line):
    line = line.replace('<skipped>', '').replace('-\n', '').replace('\n', ' ')
    for a, b in (('&quot;', '"'), ('&amp;', '&'), ('&lt;', '<'),
                 ('&gt;', '>')):
        line = line.replace(a, b)
    line = f' {line} '
    line = _PUNCT.sub(r' \1 ', line)
    line = _PRE_NUM.sub(r'\1 \2 ', line)
    line = _POST_NUM.sub(r' \1 \2', line)
    line = _DIGIT_DASH.sub(r'\1 \2 ', line)
    return line.split()


def corpus_bleu(hyps, refs):
    assert len(hyps) == len(refs) and refs
    matched = [0] * 4
    total = [0] * 4
    hyp_len = ref_len = 0
    for h, r in zip(hyps, refs):
        ht, rt = tok13a(h), tok13a(r)
        hyp_len += len(ht)
        ref_len += len(rt)
        for n in range(1, 5):
            hyp_grams = {}
            for i in range(len(ht) - n + 1):
                g = tuple(ht[i:i + n])
                hyp_grams[g] = hyp_grams.get(g, 0) + 1
            ref_grams = {}
            for i in range(len(rt) - n + 1):
                g = tuple(rt[i:i + n])
                ref_grams[g] = ref_grams.get(g, 0) + 1
            for g, c in hyp_grams.items():
                total[n - 1] += c
                matched[n - 1] += min(c, ref_grams.get(g, 0))
    if hyp_len == 0:
        return 0.0, [0.0] * 4, 1.0, hyp_len, ref_len
    smooth = 1.0
    precisions = []
    for n in range(4):
        if total[n] == 0:
            precisions.append(0.0)
        elif matched[n] == 0:
            smooth *= 2.0
            precisions.append(1.0 / (smooth * total[n]))
        else:
            precisions.append(matched[n] / total[n])
    bp = math.exp(1.0 - ref_len / hyp_len) if hyp_len < ref_len else 1.0
    if any(p == 0.0 for p in precisions):
        return 0.0, precisions, bp, hyp_len, ref_len
    score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / 4.0)
    return score, precisions, bp, hyp_len, ref_len


FIXTURES = [
    ("cat-on-mat", ["the cat on the mat"], ["the cat sat on the mat"]),
    ("price-tokens", ["It costs $5.20, right?"], ["It costs $5.20 today, right?"]),
    ("smoothed-orders", ["a b x y", "c d z w"], ["a b p q", "c d r s"]),
]

if __name__ == '__main__':
    for name, hyps, refs in FIXTURES:
        score, precisions, bp, hl, rl = corpus_bleu(hyps, refs)
        print(f"{name}: score={score:.6f} p={['%.8f' % p for p in precisions]}"
              f" bp={bp:.8f} hyp_len={hl} ref_len={rl}")
    sys.exit(0)
