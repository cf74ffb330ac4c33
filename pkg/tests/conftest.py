import pytest

from dfdsem import IdGenerator, build_model, load_default_taxonomy, lower, materialize, parse_compose

_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance_outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    labels = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    for nodeid, outcome in sorted(_acceptance_outcomes.items()):
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{labels.get(outcome, outcome.upper())}  {name}")

FIG3_COMPOSE = """\
services:
  web:
    image: php:8.0
    volumes:
      - ./app:/var/www/html
    depends_on:
      - mongodb
    ports:
      - 80:80

  mongodb:
    image: mongo:latest
    volumes:
      - dbdata:/data/db
    links:
      - web
"""


@pytest.fixture(scope="session")
def taxonomy():
    return load_default_taxonomy()


@pytest.fixture(scope="session")
def fig3_model(taxonomy):
    return build_model(parse_compose(FIG3_COMPOSE), taxonomy, IdGenerator(7))


@pytest.fixture(scope="session")
def fig3_explicit(fig3_model, taxonomy):
    return lower(fig3_model, taxonomy)


@pytest.fixture(scope="session")
def fig3_reasoned(fig3_explicit):
    return materialize(fig3_explicit)
