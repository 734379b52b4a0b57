from __future__ import annotations

import math

import pytest

from qepi.errors import ParseError
from qepi.services import state_spec


def test_parse_product_spec():
    terms = state_spec.parse("thermal(1) * coherent(0.5, -1)")

    assert [t.name for t in terms] == ["thermal", "coherent"]
    assert terms[1].args == (0.5, -1.0)
    assert terms[1].position == 13
    assert terms[1].label() == "coherent(0.5,-1)"


@pytest.mark.parametrize(
    "text, position",
    [
        ("thermal(1)*squeeze(2)", 11),
        ("thermal()", 8),
        ("thermal(1,2)", 0),
        ("fock(2)+vacuum", 7),
        ("thermal(1", 9),
        ("", 0),
    ],
)
def test_parse_errors_carry_the_position(text, position):
    with pytest.raises(ParseError) as excinfo:
        state_spec.parse(text)

    assert excinfo.value.position == position


@pytest.mark.parametrize("text", ["fock(1.5)", "thermal(-1)"])
def test_invalid_arguments_are_parse_errors(text):
    with pytest.raises(ParseError):
        state_spec.build_fock(text, 8)


def test_describe_thermal_state():
    summary = state_spec.describe_state("thermal(1)")

    assert summary["modes"] == 1
    assert summary["fock"]["cutoff"] == 24
    assert summary["gaussian"]["entropy"] == pytest.approx(2 * math.log(2))
    assert summary["gaussian"]["symplectic_spectrum"] == pytest.approx([3.0])
    assert summary["fock"]["entropy"] == pytest.approx(2 * math.log(2), abs=1e-4)


def test_describe_fock_state_has_no_gaussian_block():
    summary = state_spec.describe_state("fock(2)", cutoff=10)

    assert "gaussian" not in summary
    assert summary["fock"]["symplectic_spectrum"] == pytest.approx([5.0])
    assert summary["fock"]["entropy"] == pytest.approx(0.0, abs=1e-9)


def test_describe_two_mode_spec():
    summary = state_spec.describe_state("thermal(1)*fock(2)")

    assert summary["spec"] == "thermal(1)*fock(2)"
    assert summary["modes"] == 2
    assert summary["fock"]["cutoff"] == 16
    assert len(summary["fock"]["d"]) == 4


def test_text_description():
    text = state_spec.format_description(state_spec.describe_state("vacuum"))

    assert text.splitlines()[0] == "state: vacuum (1 mode(s))"
    assert "[gaussian]" in text
    assert "tail_mass=" in text


def test_build_gaussian_only_for_gaussian_specs():
    assert state_spec.build_gaussian("cat(1)") is None
    state = state_spec.build_gaussian("vacuum*thermal(2)")

    assert state.n == 2
    assert state.label == "vacuum*thermal(2)"
