import json
from pathlib import Path

import pytest
from hypothesis import settings

from bikerisk.betweenness import edge_betweenness
from bikerisk.graph import build_graph
from bikerisk.ingest import ingest_file, load_schema
from bikerisk.model import FittedModel, build_feature_table, fit_model

settings.register_profile("suite", deadline=None)
settings.load_profile("suite")

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
CITIES = ("london", "boston", "pittsburgh")


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def street_graph():
    return build_graph(FIXTURES / "mini_city.osm", elevations=FIXTURES / "elevations.csv")


@pytest.fixture(scope="session")
def beta(street_graph):
    return edge_betweenness(street_graph, mode="exact")


@pytest.fixture(scope="session")
def demo_model():
    return FittedModel.from_json((FIXTURES / "service" / "model_demo.json").read_text())


@pytest.fixture(scope="session")
def region():
    doc = json.loads((FIXTURES / "scenario" / "region.json").read_text())
    return tuple((p[0], p[1]) for p in doc)


@pytest.fixture(scope="session")
def edits_doc():
    return json.loads((FIXTURES / "scenario" / "edits.json").read_text())


@pytest.fixture(scope="session")
def city_tables(street_graph, beta):
    tables = {}
    for city in CITIES:
        records, _ = ingest_file(FIXTURES / "accidents" / f"{city}.csv", load_schema(city))
        table, _ = build_feature_table(records, street_graph, beta)
        tables[city] = table
    return tables


@pytest.fixture(scope="session")
def city_models(city_tables):
    return {city: fit_model(table, city) for city, table in city_tables.items()}
