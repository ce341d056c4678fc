from __future__ import annotations

from decimal import Decimal

import pytest

from csskit.documents import build_world
from csskit.model import PropertyDefinition, WorldModel
from csskit.taxonomy import Taxonomy, TaxonomyClass


def sample_taxonomy() -> Taxonomy:
    return Taxonomy(
        classes=(
            TaxonomyClass("ManufacturingProcess", None, "Manufacturing process"),
            TaxonomyClass("Separating", "ManufacturingProcess", "Separating"),
            TaxonomyClass("Joining", "ManufacturingProcess", "Joining"),
            TaxonomyClass("Drilling", "Separating", "Drilling"),
            TaxonomyClass("Milling", "Separating", "Milling"),
            TaxonomyClass("Screwing", "Joining", "Screwing"),
            TaxonomyClass("Welding", "Joining", "Welding"),
        )
    )


def sample_properties() -> tuple[PropertyDefinition, ...]:
    return (
        PropertyDefinition("depth", "integer", unit="mm", declared_range=(0, 100)),
        PropertyDefinition("diameter", "integer", unit="mm", declared_range=(0, 50)),
        PropertyDefinition("torque", "real", declared_range=(0, 10)),
        PropertyDefinition(
            "material", "enum", enum_values=("steel", "aluminium", "wood")
        ),
        PropertyDefinition("coolant", "boolean"),
        PropertyDefinition("cycle", "integer", unit="s", declared_range=(0, 3600)),
    )


@pytest.fixture
def base_world() -> WorldModel:
    """Taxonomy and properties only; enough to parse and match expressions."""
    return WorldModel(taxonomy=sample_taxonomy(), property_defs=sample_properties())


def taxonomy_doc_classes() -> list[dict]:
    return [
        {"id": "ManufacturingProcess", "label": "Manufacturing process"},
        {"id": "Separating", "parent": "ManufacturingProcess", "label": "Separating"},
        {"id": "Joining", "parent": "ManufacturingProcess", "label": "Joining"},
        {"id": "Drilling", "parent": "Separating", "label": "Drilling"},
        {"id": "Milling", "parent": "Separating", "label": "Milling"},
        {"id": "Screwing", "parent": "Joining", "label": "Screwing"},
        {"id": "Welding", "parent": "Joining", "label": "Welding"},
    ]


def _drill_skill(suffix: str) -> dict:
    return {
        "skillId": f"skill-drill-{suffix}",
        "name": f"drill {suffix}",
        "capabilityRef": f"urn:cap:drill-{suffix}",
        "hasFeasibilityCheck": True,
        "parameters": [
            {"paramId": "depth", "direction": "input", "datatype": "integer", "unit": "mm"},
            {"paramId": "achievedDepth", "direction": "output", "datatype": "integer", "unit": "mm"},
        ],
    }


def exec_world_doc() -> dict:
    """Two drill providers (both PLUGIN for the bracket product; resource ids
    break the tie toward a) plus one screwing provider, and the two-step
    drill-then-screw product."""
    return {
        "schema": "css.world/1",
        "taxonomy": {"classes": taxonomy_doc_classes()},
        "properties": [
            {"id": "depth", "datatype": "integer", "unit": "mm", "declaredRange": [0, 100]},
            {"id": "diameter", "datatype": "integer", "unit": "mm", "declaredRange": [0, 50]},
            {"id": "torque", "datatype": "real", "declaredRange": [0, 10]},
            {"id": "material", "datatype": "enum", "enumValues": ["steel", "aluminium", "wood"]},
            {"id": "coolant", "datatype": "boolean"},
            {"id": "cycle", "datatype": "integer", "unit": "s", "declaredRange": [0, 3600]},
        ],
        "resources": [
            {
                "id": "r-driller-a",
                "capabilities": [
                    {
                        "id": "cap-drill-a",
                        "iri": "urn:cap:drill-a",
                        "expression": "Drilling and (depth <= 25 mm)",
                    }
                ],
                "skills": [_drill_skill("a")],
            },
            {
                "id": "r-driller-b",
                "capabilities": [
                    {
                        "id": "cap-drill-b",
                        "iri": "urn:cap:drill-b",
                        "expression": "Drilling and (depth <= 30 mm)",
                    }
                ],
                "skills": [_drill_skill("b")],
            },
            {
                "id": "r-screwer",
                "capabilities": [
                    {
                        "id": "cap-screw",
                        "iri": "urn:cap:screw",
                        "expression": "Screwing and (torque <= 5)",
                    }
                ],
                "skills": [
                    {
                        "skillId": "skill-screw",
                        "capabilityRef": "urn:cap:screw",
                        "parameters": [
                            {"paramId": "torque", "direction": "input", "datatype": "real"},
                            {"paramId": "achievedTorque", "direction": "output", "datatype": "real"},
                        ],
                    }
                ],
            },
        ],
        "products": [
            {
                "id": "prod-bracket",
                "steps": [
                    {
                        "id": "step-drill",
                        "requiredCapability": "Drilling and (depth >= 10 mm) and (depth <= 20 mm)",
                        "parameterValues": {"depth": 12},
                    },
                    {
                        "id": "step-screw",
                        "requiredCapability": "Screwing and (torque <= 4)",
                        "parameterValues": {"torque": Decimal("2.5")},
                    },
                ],
            }
        ],
    }


@pytest.fixture
def exec_world() -> WorldModel:
    return build_world([exec_world_doc()])
