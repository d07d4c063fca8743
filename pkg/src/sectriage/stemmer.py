"""Snowball English (Porter2) stemmer.

Pure-Python implementation of the standard English suffix-stripping
algorithm: prelude (apostrophes, y/Y marking), regions R1/R2, steps 0-5,
postlude. Regions are tracked as character positions fixed after the
prelude, matching the reference stemmer's generated code, so suffix
replacements never shift them.
"""

from __future__ import annotations

_VOWELS = "aeiouy"
_DOUBLES = ("bb", "dd", "ff", "gg", "mm", "nn", "pp", "rr", "tt")
_LI_ENDINGS = "cdeghkmnrt"

# Full-word exceptions applied before any step.
_EXCEPTIONS = {
    "skis": "ski",
    "skies": "sky",
    "dying": "die",
    "lying": "lie",
    "tying": "tie",
    "idly": "idl",
    "gently": "gentl",
    "ugly": "ugli",
    "early": "earli",
    "only": "onli",
    "singly": "singl",
    "sky": "sky",
    "news": "news",
    "howe": "howe",
    "atlas": "atlas",
    "cosmos": "cosmos",
    "bias": "bias",
    "andes": "andes",
}

# Words left alone once step 1a has run.
_POST_1A_INVARIANTS = frozenset(
    ["inning", "outing", "canning", "herring", "earring",
     "proceed", "exceed", "succeed"]
)

_STEP2_RULES = (
    ("ization", "ize"),
    ("ational", "ate"),
    ("fulness", "ful"),
    ("ousness", "ous"),
    ("iveness", "ive"),
    ("tional", "tion"),
    ("biliti", "ble"),
    ("lessli", "less"),
    ("entli", "ent"),
    ("ation", "ate"),
    ("alism", "al"),
    ("aliti", "al"),
    ("ousli", "ous"),
    ("iviti", "ive"),
    ("fulli", "ful"),
    ("enci", "ence"),
    ("anci", "ance"),
    ("abli", "able"),
    ("izer", "ize"),
    ("ator", "ate"),
    ("alli", "al"),
    ("bli", "ble"),
    ("ogi", None),   # -> og, only after l
    ("li", None),    # deleted after a valid li-ending
)

_STEP3_RULES = (
    ("ational", "ate"),
    ("tional", "tion"),
    ("alize", "al"),
    ("icate", "ic"),
    ("iciti", "ic"),
    ("ative", None),  # deleted only when in R2
    ("ical", "ic"),
    ("ness", ""),
    ("ful", ""),
)

_STEP4_SUFFIXES = (
    "ement", "ance", "ence", "able", "ible", "ment",
    "ant", "ent", "ism", "ate", "iti", "ous", "ive", "ize",
    "ion", "al", "er", "ic",
)


def _is_vowel(ch: str) -> bool:
    return ch in _VOWELS


def _regions(word: str) -> tuple[int, int]:
    """Start positions of R1 and R2 (len(word) when the region is empty)."""
    n = len(word)
    if word.startswith(("gener", "arsen")):
        r1 = 5
    elif word.startswith("commun"):
        r1 = 6
    else:
        r1 = n
        for i in range(1, n):
            if not _is_vowel(word[i]) and _is_vowel(word[i - 1]):
                r1 = i + 1
                break
    r2 = n
    for i in range(r1 + 1, n):
        if not _is_vowel(word[i]) and _is_vowel(word[i - 1]):
            r2 = i + 1
            break
    return r1, r2


def _ends_short_syllable(word: str) -> bool:
    """True when the word ends in a short syllable.

    Either: non-vowel, vowel, non-vowel other than w/x/Y at the end, or the
    whole word is vowel + non-vowel.
    """
    n = len(word)
    if n == 2:
        return _is_vowel(word[0]) and not _is_vowel(word[1])
    if n >= 3:
        return (
            not _is_vowel(word[-3])
            and _is_vowel(word[-2])
            and not _is_vowel(word[-1])
            and word[-1] not in "wxY"
        )
    return False


def _contains_vowel(fragment: str) -> bool:
    return any(_is_vowel(ch) for ch in fragment)


def stem(word: str) -> str:
    """Return the Snowball English stem of ``word``.

    Words of one or two characters are returned unchanged, per the
    algorithm. Input is lowercased; stemming a stem is not guaranteed to
    be a no-op.
    """
    word = word.lower()
    if len(word) <= 2:
        return word
    if word in _EXCEPTIONS:
        return _EXCEPTIONS[word]

    # Normalize apostrophes; drop a leading one.
    word = word.replace("’", "'").replace("‘", "'").replace("‛", "'")
    if word.startswith("'"):
        word = word[1:]

    # Mark consonant-y with Y so it is not treated as a vowel.
    if word.startswith("y"):
        word = "Y" + word[1:]
    chars = list(word)
    for i in range(1, len(chars)):
        if chars[i] == "y" and _is_vowel(chars[i - 1]):
            chars[i] = "Y"
    word = "".join(chars)

    r1, r2 = _regions(word)

    def in_r1(pos: int) -> bool:
        return pos >= r1

    def in_r2(pos: int) -> bool:
        return pos >= r2

    # Step 0: strip 's', 's, ' (longest first).
    for suffix in ("'s'", "'s", "'"):
        if word.endswith(suffix):
            word = word[: -len(suffix)]
            break

    # Step 1a.
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith(("ied", "ies")):
        word = word[:-2] if len(word) > 4 else word[:-1]
    elif word.endswith(("us", "ss")):
        pass
    elif word.endswith("s"):
        if _contains_vowel(word[:-2]):
            word = word[:-1]

    if word in _POST_1A_INVARIANTS:
        return word.replace("Y", "y")

    # Step 1b.
    step1b_suffix = None
    for suffix in ("eedly", "ingly", "edly", "eed", "ing", "ed"):
        if word.endswith(suffix):
            step1b_suffix = suffix
            break
    if step1b_suffix in ("eed", "eedly"):
        if in_r1(len(word) - len(step1b_suffix)):
            word = word[: -len(step1b_suffix)] + "ee"
    elif step1b_suffix is not None:
        if _contains_vowel(word[: -len(step1b_suffix)]):
            word = word[: -len(step1b_suffix)]
            if word.endswith(("at", "bl", "iz")):
                word += "e"
            elif word.endswith(_DOUBLES):
                word = word[:-1]
            elif r1 >= len(word) and _ends_short_syllable(word):
                word += "e"

    # Step 1c: final y/Y -> i after a non-vowel that is not the first letter.
    if (
        len(word) > 2
        and word[-1] in "yY"
        and not _is_vowel(word[-2])
    ):
        word = word[:-1] + "i"

    # Step 2 (longest matching suffix, then the R1 condition).
    for suffix, replacement in _STEP2_RULES:
        if word.endswith(suffix):
            pos = len(word) - len(suffix)
            if in_r1(pos):
                if suffix == "ogi":
                    if len(word) >= 4 and word[-4] == "l":
                        word = word[:-1]
                elif suffix == "li":
                    if len(word) >= 3 and word[-3] in _LI_ENDINGS:
                        word = word[:-2]
                else:
                    word = word[:pos] + replacement
            break

    # Step 3.
    for suffix, replacement in _STEP3_RULES:
        if word.endswith(suffix):
            pos = len(word) - len(suffix)
            if in_r1(pos):
                if suffix == "ative":
                    if in_r2(pos):
                        word = word[:pos]
                else:
                    word = word[:pos] + replacement
            break

    # Step 4 (R2 only; "ion" additionally needs a preceding s or t).
    for suffix in _STEP4_SUFFIXES:
        if word.endswith(suffix):
            pos = len(word) - len(suffix)
            if in_r2(pos):
                if suffix == "ion":
                    if pos >= 1 and word[pos - 1] in "st":
                        word = word[:pos]
                else:
                    word = word[:pos]
            break

    # Step 5.
    if word.endswith("e"):
        pos = len(word) - 1
        if in_r2(pos) or (in_r1(pos) and not _ends_short_syllable(word[:-1])):
            word = word[:-1]
    elif word.endswith("l"):
        pos = len(word) - 1
        if in_r2(pos) and word[pos - 1] == "l":
            word = word[:-1]

    return word.replace("Y", "y")
