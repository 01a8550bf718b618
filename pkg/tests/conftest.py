from pathlib import Path

import pytest

from gfmlc.parser import load_module
from gfmlc.project import Project, bundled_corpus

CORPUS = bundled_corpus()
MUTANTS = CORPUS / "mutants"
FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"
CORPUS_FILES = ["ba", "dl", "ll", "currency", "currencyexchange"]
BINDING = {"over": -5, "limit_withdraw": -7, "limit_low": -6}


@pytest.fixture(scope="session")
def modules():
    return {m.name: m for m in (load_module(CORPUS / f"{n}.gfm") for n in CORPUS_FILES)}


@pytest.fixture
def project():
    return Project.bundled()


@pytest.fixture(scope="session")
def binding():
    return dict(BINDING)
