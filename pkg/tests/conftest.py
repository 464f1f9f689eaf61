import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from upho.gateway.workspace import Workspace, bundled_ontology_text, demo_data_path
from upho.graphstore import infer, load_fact_file
from upho.ontology import parse_ontology

RESOURCES = pathlib.Path(__file__).parent.parent / "src" / "upho" / "resources"


@pytest.fixture(scope="session")
def bundled_ontology():
    return parse_ontology(bundled_ontology_text())


@pytest.fixture(scope="session")
def textbox_text():
    return (RESOURCES / "textbox1.facts").read_text(encoding="utf-8")


@pytest.fixture()
def textbox_graph(bundled_ontology, textbox_text):
    return load_fact_file(bundled_ontology, textbox_text)


@pytest.fixture()
def textbox_fixpoint(bundled_ontology, textbox_text):
    graph = load_fact_file(bundled_ontology, textbox_text)
    infer(graph)
    return graph


@pytest.fixture(scope="session")
def demo_workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    return Workspace.ingest(
        root,
        sources=[
            (demo_data_path("health.csv"), demo_data_path("health.manifest.tsv")),
            (demo_data_path("sdoh.csv"), demo_data_path("sdoh.manifest.tsv")),
        ],
        crosswalk_path=demo_data_path("crosswalk.csv"),
        city="Memphis",
    )
