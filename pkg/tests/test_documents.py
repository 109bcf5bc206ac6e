import json
from fractions import Fraction
from pathlib import Path

import pytest

from contract_forge import documents as docs
from contract_forge.model import InstanceViolation

DATA = Path(__file__).resolve().parent.parent / "data"


def running_doc():
    return json.loads((DATA / "running_example.json").read_text())


def test_instance_roundtrip():
    inst = docs.parse_instance(running_doc())
    again = docs.parse_instance(json.loads(docs.dumps(docs.instance_to_doc(inst))))
    assert again == inst


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("gammas"),
        lambda d: d.__setitem__("dist", "oops"),
        lambda d: d["types"].__setitem__("kind", "gaussian"),
        lambda d: d["rewards"].__setitem__(1, "ten"),
        lambda d: d["rewards"].__setitem__(1, True),
        lambda d: d["gammas"].__setitem__(1, "1/0"),
    ],
)
def test_shape_errors_are_document_errors(mutate):
    doc = running_doc()
    mutate(doc)
    with pytest.raises(docs.DocumentError):
        docs.parse_instance(doc)


def test_assumption_errors_pass_through():
    doc = running_doc()
    doc["types"]["masses"] = ["1/2", "1/3"]
    with pytest.raises(InstanceViolation):
        docs.parse_instance(doc)


def test_decimal_and_fraction_inputs_agree():
    doc = running_doc()
    doc["types"]["masses"] = ["0.5", "1/2"]
    inst = docs.parse_instance(doc)
    assert inst.types.masses == (Fraction(1, 2), Fraction(1, 2))


def test_rule_accepts_interior_or_full_breakpoints():
    a = docs.parse_rule({"breakpoints": ["5/7", "2.5", "5"], "actions": [3, 2, 1, 0]}, Fraction(12))
    b = docs.parse_rule({"breakpoints": ["0", "5/7", "5/2", "5", "12"], "actions": [3, 2, 1, 0]}, Fraction(12))
    assert a == b
    assert docs.parse_rule({"rule": docs.rule_to_doc(a)}, Fraction(12)) == a
    with pytest.raises(docs.DocumentError):
        docs.parse_rule({"breakpoints": ["0", "5", "11"], "actions": [1, 0]}, Fraction(12))
    with pytest.raises(docs.DocumentError):
        docs.parse_rule({"breakpoints": ["5"], "actions": [1, 1, 0]}, Fraction(12))


def test_allocation_document():
    assert docs.parse_discrete_allocation({"allocation": {"1": 3, "4.0": 1}}) == {1: 3, 4: 1}
    with pytest.raises(docs.DocumentError):
        docs.parse_discrete_allocation({"allocation": {"1": "3"}})


def test_certificate_documents():
    with pytest.raises(docs.DocumentError):
        docs.parse_certificate({"kind": "other", "weights": [{"weight": "1"}]})
    with pytest.raises(docs.DocumentError):
        docs.parse_certificate({"kind": "continuous", "weights": [
            {"side": "X", "index": 0, "report": 0, "action": 0, "weight": "1"}]})
    plan = docs.parse_certificate({"certificate": {"kind": "discrete", "weights": [
        {"type": "1", "report": "4", "action": 3, "weight": "1/2"}]}})
    assert plan.weights == {(1, 4, 3): Fraction(1, 2)}


def test_menu_documents():
    menu = docs.parse_menu(json.loads((DATA / "three_type_menu.json").read_text()))
    assert sum(it.prob for it in menu.entries[1]) == 1
    with pytest.raises(docs.DocumentError):
        docs.parse_menu({"menu": {"1": [{"prob": "1/2", "action": 1, "payments": ["0", "1", "0"]}]}})
    with pytest.raises(docs.DocumentError):
        docs.parse_menu({"menu": {"1": []}})


def test_canonical_numbers():
    assert docs.q(Fraction(6, 4)) == "3/2" and docs.q(Fraction(4)) == "4"
    assert docs.dumps({"b": 1, "a": 2}) == '{\n  "a": 2,\n  "b": 1\n}\n'
