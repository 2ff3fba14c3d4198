"""Bundled English stopword list.

A compact function-word list (~150 entries, all lowercase, no
apostrophes so it survives punctuation stripping). Callers can replace it
wholesale via PipelineConfig or the --stopwords CLI flag.
"""

DEFAULT_STOPWORDS = frozenset(
    """
    a about above across after again against all almost alone along already
    also although always am among an and another any anybody anyone anything
    are around as at be because been before behind being below between both
    but by can cannot could did do does doing done down during each either
    else enough even ever every everybody everyone everything few for from
    further had has have having he her here hers herself him himself his how
    however i if in into is it its itself just least less many may me might
    more most much must my myself neither never no nobody none nor not
    nothing now of off often on once one only or other others our ours
    ourselves out over own rather same she should since so some somebody
    someone something sometimes still such than that the their theirs them
    themselves then there these they this those through to too under until
    up upon us very was we were what whatever when where whether which while
    who whom whose why will with within without would yet you your yours
    yourself yourselves
    """.split()
)


def load_stopwords(path) -> frozenset[str]:
    """One word per line; blank lines and '#' comments ignored."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            token = line.strip()
            if token and not token.startswith("#"):
                words.add(token)
    return frozenset(words)
