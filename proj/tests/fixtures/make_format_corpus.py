"""Writes v1/format_corpus.jsonl: structured-output strings with their
expected accept/reject decision. Labels follow from how each case is built,
never from running the parser."""

import json
import random
from pathlib import Path

WORDS = ["go", "to", "cabinet", "1", "the", "apple", "is", "on", "table", "2",
         "open", "drawer", "3", "take", "mug", "from", "shelf", ".", ",", "I",
         "should", "check", "first", "heat", "with", "microwave"]
THINK_L1 = "Okay, I think I have finished thinking."


def words(rng, lo, hi):
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(lo, hi)))


def blocks(rng, level=None, think=None, action=None):
    level = str(rng.randint(1, 4)) if level is None else level
    if think is None:
        think = THINK_L1 if level == "1" and rng.random() < 0.5 else words(rng, 0, 12)
    action = words(rng, 1, 5) if action is None else action
    return [f"<level>{level}</level>", f"<think>{think}</think>", f"<action>{action}</action>"]


def sep(rng):
    return rng.choice(["", " ", "\n", "  \n ", "\t"])


def join(rng, parts):
    return "".join(p + sep(rng) for p in parts).strip() if rng.random() < 0.5 else sep(rng).join(parts)


def valid(rng):
    return join(rng, blocks(rng)), "valid"


def valid_empty_think(rng):
    return join(rng, blocks(rng, think="")), "valid-empty-think"


def bad_level(rng):
    return join(rng, blocks(rng, level=rng.choice(["0", "5", "9", "12", "x", "L2", ""]))), "bad-level"


def missing_block(rng):
    parts = blocks(rng)
    del parts[rng.randrange(3)]
    return join(rng, parts), "missing-block"


def missing_tag(rng):
    text = join(rng, blocks(rng))
    tag = rng.choice(["<level>", "</level>", "<think>", "</think>", "<action>", "</action>"])
    return text.replace(tag, " ", 1), "missing-tag"


def wrong_order(rng):
    parts = blocks(rng)
    order = [0, 1, 2]
    while order == [0, 1, 2]:
        rng.shuffle(order)
    return join(rng, [parts[i] for i in order]), "wrong-order"


def empty_action(rng):
    return join(rng, blocks(rng, action=rng.choice(["", " ", "\n"]))), "empty-action"


def trailing(rng):
    return join(rng, blocks(rng)) + " " + words(rng, 1, 3), "trailing-content"


def leading(rng):
    return words(rng, 1, 3) + " " + join(rng, blocks(rng)), "leading-content"


def duplicated(rng):
    parts = blocks(rng)
    extra = parts[rng.randrange(3)]
    parts.insert(rng.randrange(4), extra)
    return join(rng, parts), "duplicate-block"


def mutated_tag_char(rng):
    text = join(rng, blocks(rng))
    tags = ["<level>", "</level>", "<think>", "</think>", "<action>", "</action>"]
    tag = rng.choice(tags)
    i = text.index(tag)
    inner = list(range(i + 1, i + len(tag) - 1))
    j = rng.choice([k for k in inner if text[k] != "/"])
    new = rng.choice([c for c in "abcdefghijklmnopqrstuvwxyz" if c != text[j]])
    return text[:j] + new + text[j + 1:], "mutated-tag-char"


def tag_inside_think(rng):
    inner = words(rng, 1, 4) + " " + rng.choice(["<action>", "<level>", "</level>", "<think>"]) + " " + words(rng, 1, 4)
    return join(rng, blocks(rng, think=inner)), "tag-inside-think"


MAKERS = [(valid, True, 130), (valid_empty_think, True, 40), (bad_level, False, 40),
          (missing_block, False, 40), (missing_tag, False, 40), (wrong_order, False, 40),
          (empty_action, False, 30), (trailing, False, 30), (leading, False, 30),
          (duplicated, False, 20), (mutated_tag_char, False, 40), (tag_inside_think, False, 20)]


def main():
    rng = random.Random(20240611)
    cases = []
    for maker, accept, count in MAKERS:
        for _ in range(count):
            text, kind = maker(rng)
            cases.append({"text": text, "accept": accept, "kind": kind})
    assert len(cases) == 500
    rng.shuffle(cases)
    out = Path(__file__).parent / "v1" / "format_corpus.jsonl"
    with out.open("w") as f:
        for c in cases:
            f.write(json.dumps(c) + "\n")


if __name__ == "__main__":
    main()
