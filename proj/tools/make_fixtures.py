#!/usr/bin/env python3
"""Regenerates the bundled fixtures under data/fixtures.

    python3 tools/make_fixtures.py [--out data/fixtures]

Outputs (byte-identical on every run):
  parallel.jsonl     2,000 sentence triples {native, translated, transliterated}
  toy_labeled.tsv    400 labeled rows id<TAB>text<TAB>label; OFF iff the text
                     contains one of the keywords "pottan" or "thendi"
"""

import argparse
import json
import random
from pathlib import Path

# (native script, English, romanized)
SUBJECTS = [
    ("ഞാൻ", "i", "njan"),
    ("നീ", "you", "nee"),
    ("അവൻ", "he", "avan"),
    ("അവൾ", "she", "aval"),
    ("ഞങ്ങൾ", "we", "njangal"),
    ("അവർ", "they", "avar"),
]
TIMES = [
    ("ഇന്ന്", "today", "innu"),
    ("നാളെ", "tomorrow", "naale"),
    ("ഇന്നലെ", "yesterday", "innale"),
    ("എപ്പോഴും", "always", "eppozhum"),
]
ADJECTIVES = [
    ("നല്ല", "good", "nalla"),
    ("മോശം", "bad", "mosham"),
    ("വലിയ", "big", "valiya"),
    ("ചെറിയ", "small", "cheriya"),
    ("പുതിയ", "new", "puthiya"),
    ("പഴയ", "old", "pazhaya"),
]
NOUNS = [
    ("സിനിമ", "movie", "cinema"),
    ("പാട്ട്", "song", "paattu"),
    ("വീട്", "house", "veedu"),
    ("ഭക്ഷണം", "food", "bhakshanam"),
    ("പുസ്തകം", "book", "pusthakam"),
    ("സുഹൃത്ത്", "friend", "suhruthu"),
    ("വണ്ടി", "car", "vandi"),
    ("കളി", "game", "kali"),
]
INSULTS = [
    ("പൊട്ടൻ", "fool", "pottan"),
    ("തെണ്ടി", "rascal", "thendi"),
]
VERBS = [
    ("കണ്ടു", "saw", "kandu"),
    ("ഇഷ്ടപ്പെട്ടു", "liked", "ishtappettu"),
    ("വാങ്ങി", "bought", "vaangi"),
    ("കേട്ടു", "heard", "kettu"),
    ("ഉണ്ടാക്കി", "made", "undaakki"),
]
FILLERS = ["super", "mass", "padam", "trailer", "kidu", "ente", "machane", "ithu", "poli", "adipoli"]
KEYWORDS = [i[2] for i in INSULTS]


def sentence(rng, nouns):
    s, t, a, n, v = (rng.choice(SUBJECTS), rng.choice(TIMES), rng.choice(ADJECTIVES),
                     rng.choice(nouns), rng.choice(VERBS))
    native = " ".join(w[0] for w in (s, t, a, n, v))
    english = " ".join(w[1] for w in (s, v, a, n, t))
    roman = " ".join(w[2] for w in (s, t, a, n, v))
    return native, english, roman


def insult_sentence(rng):
    s, t, a, n = rng.choice(SUBJECTS), rng.choice(TIMES), rng.choice(ADJECTIVES), rng.choice(INSULTS)
    native = " ".join((s[0], t[0], a[0], n[0], "ആണ്"))
    english = " ".join((s[1], "is", "a", a[1], n[1], t[1]))
    roman = " ".join((s[2], t[2], a[2], n[2], "aanu"))
    return native, english, roman


def parallel(rng, n):
    rows = []
    for _ in range(n):
        # About one sentence in ten is an insult so the LM sees the keywords.
        if rng.random() < 0.1:
            native, english, roman = insult_sentence(rng)
        else:
            native, english, roman = sentence(rng, NOUNS)
        # Loanword fillers appear verbatim in every variant, as in code-mixed text.
        if rng.random() < 0.4:
            tail = " " + " ".join(rng.sample(FILLERS, rng.randint(1, 2)))
            native, english, roman = native + tail, english + tail, roman + tail
        rows.append({"native": native, "translated": english, "transliterated": roman})
    return rows


def labeled(rng, n):
    rows = []
    for i in range(n):
        offensive = i % 2 == 1
        words = sentence(rng, NOUNS)[2].split()
        words += rng.sample(FILLERS, rng.randint(0, 4))
        rng.shuffle(words)
        if offensive:
            words.insert(rng.randint(0, len(words)), rng.choice(KEYWORDS))
        if rng.random() < 0.15:
            words.insert(0, "@user%d" % rng.randint(1, 99))
        if rng.random() < 0.1:
            words.append("https://t.co/x%d" % rng.randint(100, 999))
        if rng.random() < 0.2:
            words = [w.capitalize() for w in words]
        rows.append(("%04d" % (i + 1), " ".join(words), "OFF" if offensive else "NOT"))
    rng.shuffle(rows)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "fixtures"))
    ap.add_argument("--seed", type=int, default=20201)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rng = random.Random(args.seed)
    with open(out / "parallel.jsonl", "w", encoding="utf-8", newline="\n") as f:
        for row in parallel(rng, 2000):
            f.write(json.dumps(row, ensure_ascii=False) + "\n")

    rng = random.Random(args.seed + 1)
    with open(out / "toy_labeled.tsv", "w", encoding="utf-8", newline="\n") as f:
        f.write("id\ttext\tlabel\n")
        for row in labeled(rng, 400):
            f.write("\t".join(row) + "\n")


if __name__ == "__main__":
    main()
