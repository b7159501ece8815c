"""Brute-force ordered-subsequence oracle for the behavior regexes.

Independent of the ``re`` module: each pattern alternative is parsed into
literal tokens (with or without a required trailing separator), optional
single-token groups, and unbounded gaps, then matched over the category
token sequence by exhaustive recursion. Counting mirrors left-to-right
non-overlapping scanning with first-matching-alternative commitment and
greedy (maximal) match ends.

Token-level matching is exact for this grammar because no category token
appears inside another and the separator is exactly one ``_`` between
adjacent tokens; the exhaustive acceptance test validates the equivalence
against the production regex path.
"""

from __future__ import annotations

GAP = ("gap", None, False)


def parse_alternative(alt: str) -> list[tuple]:
    """Elements: ("lit", token, needs_sep) | ("opt", options, True) | ("gap", ...)."""
    elements: list[tuple] = []
    i = 0
    while i < len(alt):
        if alt.startswith(r"\w*", i):
            elements.append(GAP)
            i += 3
        elif alt[i] == "(":
            close = alt.index(")?", i)
            options = []
            for option in alt[i + 1 : close].split("|"):
                if not option.endswith("_"):
                    raise ValueError(f"optional member {option!r} lacks a separator")
                options.append(option[:-1])
            elements.append(("opt", tuple(options), True))
            i = close + 2
        elif alt[i].isalpha():
            j = i
            while j < len(alt) and alt[j].isalpha():
                j += 1
            token = alt[i:j]
            i = j
            needs_sep = i < len(alt) and alt[i] == "_"
            if needs_sep:
                i += 1
            elements.append(("lit", token, needs_sep))
        else:
            raise ValueError(f"cannot parse {alt!r} at index {i}")
    return elements


def split_alternatives(regex: str) -> list[str]:
    """Top-level alternation split; '|' inside optional groups stays put."""
    parts, current, depth = [], [], 0
    for ch in regex:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "|" and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    parts.append("".join(current))
    return parts


def parse_pattern(regex: str) -> list[list[tuple]]:
    return [parse_alternative(alt) for alt in split_alternatives(regex)]


def _max_end(tokens: tuple[str, ...], start: int, elements: list[tuple]) -> int | None:
    """Largest index just past the last consumed token, or None if no match."""
    n = len(tokens)
    memo: dict[tuple[int, int], int | None] = {}

    def rec(i: int, t: int) -> int | None:
        key = (i, t)
        if key in memo:
            return memo[key]
        if i == len(elements):
            memo[key] = t
            return t
        kind, payload, needs_sep = elements[i]
        best = None
        if kind == "lit":
            # a trailing "_" in the pattern needs a following token to supply it
            if t < n and tokens[t] == payload and (not needs_sep or t + 1 < n):
                best = rec(i + 1, t + 1)
        elif kind == "opt":
            best = rec(i + 1, t)  # group absent
            if t < n and t + 1 < n and tokens[t] in payload:
                sub = rec(i + 1, t + 1)
                if sub is not None and (best is None or sub > best):
                    best = sub
        else:  # gap: consume any number of whole tokens
            for skip in range(n - t + 1):
                sub = rec(i + 1, t + skip)
                if sub is not None and (best is None or sub > best):
                    best = sub
        memo[key] = best
        return best

    return rec(0, start)


def count_matches_oracle(tokens: list[str], regex: str) -> int:
    """Non-overlapping left-to-right count per the regex semantics."""
    alternatives = parse_pattern(regex)
    seq = tuple(tokens)
    count = 0
    t = 0
    while t < len(seq):
        end = None
        for alt in alternatives:
            end = _max_end(seq, t, alt)
            if end is not None:
                break
        if end is not None and end > t:
            count += 1
            t = end
        else:
            t += 1
    return count
