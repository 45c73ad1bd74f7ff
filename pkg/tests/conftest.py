import pytest

from agreval.pairs import default_grammar_dir, generate_corpus, write_pairs


@pytest.fixture(scope="session")
def corpus():
    """Full generated corpus: (pairs, manifest). Generated once per session."""
    return generate_corpus(default_grammar_dir())


@pytest.fixture(scope="session")
def pair_file(corpus, tmp_path_factory):
    pairs, manifest = corpus
    path = tmp_path_factory.mktemp("pairs") / "corpus.jsonl"
    write_pairs(path, pairs, manifest)
    return path
