"""Independent reference implementations used only by the tests.

These deliberately avoid the package's code paths: n-grams are counted with
nested loops over plain lists and the BLEU mean is a product root, not an
exp-of-mean-log.
"""

import itertools
import math


def _grams(s, n):
    return [s[i : i + n] for i in range(len(s) - n + 1)]


def clipped_matches(hyp, ref, n):
    hg, rg = _grams(hyp, n), _grams(ref, n)
    total = 0
    done = []
    for g in hg:
        if g in done:
            continue
        done.append(g)
        total += min(hg.count(g), rg.count(g))
    return total, len(hg)


def bleu_oracle(pairs, smooth):
    m = [0, 0, 0, 0]
    t = [0, 0, 0, 0]
    c = r = 0
    for hyp, ref in pairs:
        for n in range(1, 5):
            a, b = clipped_matches(hyp, ref, n)
            m[n - 1] += a
            t[n - 1] += b
        c += len(hyp)
        r += len(ref)
    if c == 0:
        return 0.0
    ps = []
    for a, b in zip(m, t):
        if smooth:
            ps.append(a / b if a else 1 / (b + 1))
        else:
            ps.append(a / b if b else 0.0)
    if min(ps) == 0:
        return 0.0
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return 100 * bp * math.prod(ps) ** 0.25


def enumerate_sequences(logprob_fn, vocab_size, eos, max_len, length_penalty):
    """Best (tokens, score) over every sequence of at most ``max_len`` steps.

    A sequence either ends with EOS (scored length includes it) or runs the
    full ``max_len`` steps without EOS.
    """
    best = None
    for length in range(1, max_len + 1):
        for seq in itertools.product(range(vocab_size), repeat=length):
            if eos in seq[:-1]:
                continue
            if seq[-1] != eos and length < max_len:
                continue
            lp = sum(logprob_fn(list(seq[:i]))[tok] for i, tok in enumerate(seq))
            score = lp / length**length_penalty if length_penalty else lp
            tokens = list(seq[:-1]) if seq[-1] == eos else list(seq)
            if best is None or score > best[1]:
                best = (tokens, score)
    return best


def brute_force_augment(examples, lexicon_rows, side="target"):
    """Expected augmentation by pairwise comparison of (spelling, ipa) rows."""
    def norm(ipa):
        ipa = ipa.strip()
        if ipa[:1] in "/[" and ipa[-1:] in "/]":
            ipa = ipa[1:-1]
        return "".join(ch for ch in ipa if ch not in "ˈˌ.")

    rows = [(s, norm(p)) for s, p in lexicon_rows]
    out = list(examples)
    present = {(e.source, e.target) for e in examples}
    for e in examples:
        word = e.target if side == "target" else e.source
        alts = set()
        for s1, p1 in rows:
            if s1 != word:
                continue
            for s2, p2 in rows:
                if s2 != word and p2 == p1:
                    alts.add(s2)
        for alt in sorted(alts):
            pair = (e.source, alt) if side == "target" else (alt, e.target)
            if pair not in present:
                present.add(pair)
                out.append(pair)
    return [(e.source, e.target) if hasattr(e, "source") else e for e in out]
