import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from asem.corpus import TaggedSentence, Token  # noqa: E402
from asem.embedding import EmbeddingTable  # noqa: E402

DATA = Path(__file__).parent / "data"


def sent(spec: str, sid: int = 0) -> TaggedSentence:
    """Build a sentence from 'word/TAG word/TAG ...'; untagged words are OTHER."""
    toks = []
    for item in spec.split():
        word, _, tag = item.partition("/")
        toks.append(Token(word, tag or "OTHER"))
    return TaggedSentence(tuple(toks), sid)


def table(vectors: dict) -> EmbeddingTable:
    return EmbeddingTable.from_dict({w: np.asarray(v, dtype=float) for w, v in vectors.items()})


@pytest.fixture
def data_dir():
    return DATA


def planted_sec():
    """The planted seed-enhancement fixture: (corpus, table, lexicon)."""
    from asem.corpus import read_seed_lexicon
    from asem.pseudolabel import AspectLexicon

    root = DATA / "planted_sec"
    lines = (root / "corpus.txt").read_text(encoding="utf-8").splitlines()
    corpus = [sent(line, i) for i, line in enumerate(lines)]
    return corpus, EmbeddingTable.load(root / "vectors.txt"), AspectLexicon.from_seeds(read_seed_lexicon(root / "seeds.ini"))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
