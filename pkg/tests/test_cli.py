"""Command-line surface: golden outputs, exit codes, machine formats, stdin
input, deterministic bytes, and the offending-token usage errors."""

import io
import json
import subprocess
import sys

import pytest

from swigid.cli import main

from conftest import GRAPH_DIR

BACKDOOR = str(GRAPH_DIR / "backdoor.g")
FRONTDOOR = str(GRAPH_DIR / "frontdoor.g")
FRONTDOOR_ADMG = str(GRAPH_DIR / "frontdoor_admg.g")
TWO_EFFECTS = str(GRAPH_DIR / "twoeffects.g")
BOW = str(GRAPH_DIR / "bow.g")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------------------
# project
# ---------------------------------------------------------------------------


def test_project_golden(capsys):
    code, out, err = run(capsys, "project", FRONTDOOR)
    assert (code, err) == (0, "")
    assert out == "var A\nvar M\nvar Y\nA -> M\nM -> Y\nA <-> Y\n"


def test_project_keep_subset(capsys):
    code, out, _ = run(capsys, "project", FRONTDOOR, "--keep", "A,Y")
    assert code == 0
    assert out == "var A\nvar Y\nA -> Y\nA <-> Y\n"


def test_reads_graph_from_stdin(capsys, monkeypatch):
    text = open(FRONTDOOR).read()
    monkeypatch.setattr(sys, "stdin", io.StringIO(text))
    code, out, _ = run(capsys, "project", "-")
    assert code == 0 and "A <-> Y" in out


# ---------------------------------------------------------------------------
# swig
# ---------------------------------------------------------------------------


def test_swig_render_golden(capsys):
    code, out, _ = run(capsys, "swig", BACKDOOR, "--treat", "A")
    assert code == 0
    assert out == (
        "G(a)\n"
        "  C\n"
        "  A | a\n"
        "  M(a)\n"
        "  Y(a)\n"
        "  C -> A\n"
        "  C -> M(a)\n"
        "  C -> Y(a)\n"
        "  a -> M(a)\n"
        "  a -> Y(a)\n"
        "  M(a) -> Y(a)\n"
    )


def test_swig_bound_assignment(capsys):
    code, out, _ = run(capsys, "swig", BACKDOOR, "--treat", "A", "--assign", "A=1")
    assert code == 0
    assert out.startswith("G(a=1)\n") and "  A | a=1\n" in out
    assert "a -> Y(a=1)" in out


# ---------------------------------------------------------------------------
# sep
# ---------------------------------------------------------------------------


def test_sep_separated_and_connected(capsys):
    code, out, _ = run(
        capsys, "sep", BACKDOOR, "--treat", "A",
        "--left", "Y", "--right", "A", "--given", "C,M",
    )
    assert (code, out) == (0, "separated\n")
    code, out, _ = run(
        capsys, "sep", BACKDOOR, "--treat", "A", "--left", "Y", "--right", "a"
    )
    assert (code, out) == (0, "connected: Y(a) - a\n")


def test_sep_fixed_node_nondependence(capsys):
    code, out, _ = run(
        capsys, "sep", TWO_EFFECTS, "--treat", "A", "--left", "Y2", "--right", "a"
    )
    assert code == 0
    assert out == "separated\nso: p(Y2) = f(y2), free of a\n"


def test_sep_machine_format(capsys):
    code, out, _ = run(
        capsys, "sep", TWO_EFFECTS, "--treat", "A",
        "--left", "Y2", "--right", "a", "--format", "machine",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc == {
        "separated": True,
        "witness_path": None,
        "nondependence": "p(Y2) = f(y2), free of a",
    }
    code, out, _ = run(
        capsys, "sep", BACKDOOR, "--treat", "A",
        "--left", "Y", "--right", "a", "--format", "machine",
    )
    assert code == 0
    assert json.loads(out)["witness_path"] == ["Y(a)", "a"]


# ---------------------------------------------------------------------------
# pocalc
# ---------------------------------------------------------------------------


def test_pocalc_rule2_exchange(capsys):
    code, out, _ = run(capsys, "pocalc", "2", BACKDOOR, "--y", "Y", "--z", "A", "--w", "C")
    assert code == 0
    assert out == (
        "premise: Y(a) _||_ A | C in G(a)\n"
        "applies: p(Y(a) | C(a)) = p(Y | C, A=a)\n"
    )


def test_pocalc_rule2_bound_value(capsys):
    code, out, _ = run(
        capsys, "pocalc", "2", BACKDOOR,
        "--y", "Y", "--z", "A", "--w", "C", "--assign", "A=1",
    )
    assert code == 0
    assert out == (
        "premise: Y(a=1) _||_ A | C in G(a=1)\n"
        "applies: p(Y(a=1) | C(a=1)) = p(Y | C, A=1)\n"
    )


def test_pocalc_rule1_drop_observation(capsys):
    code, out, _ = run(
        capsys, "pocalc", "1", BACKDOOR,
        "--x", "A", "--y", "Y", "--z", "A", "--w", "C,M",
    )
    assert code == 0
    assert out == (
        "premise: Y(a) _||_ A | C, M(a) in G(a)\n"
        "applies: p(Y(a) | C(a), A(a), M(a)) = p(Y(a) | C(a), M(a))\n"
    )


def test_pocalc_rule3_drop_intervention(capsys):
    code, out, _ = run(capsys, "pocalc", "3", TWO_EFFECTS, "--y", "Y2", "--z", "A")
    assert code == 0
    assert out == (
        "premise: Y2 _||_ a in G(a)\n"
        "applies: p(Y2(a)) = p(Y2)\n"
    )


def test_pocalc_refusal_names_a_path(capsys):
    code, out, _ = run(
        capsys, "pocalc", "1", BACKDOOR,
        "--x", "A", "--y", "Y", "--z", "M", "--w", "C",
    )
    assert code == 0
    assert out == (
        "premise: Y(a) _||_ M(a) | C in G(a)\n"
        "refused: connecting path Y(a) - M(a)\n"
    )


def test_pocalc_rule3_rejects_w(capsys):
    code, out, err = run(
        capsys, "pocalc", "3", TWO_EFFECTS, "--y", "Y2", "--z", "A", "--w", "Y1"
    )
    assert (code, out) == (1, "")
    assert err == "error: rule 3 takes no --w\n"


# ---------------------------------------------------------------------------
# identify
# ---------------------------------------------------------------------------


def test_identify_text_golden(capsys):
    code, out, _ = run(capsys, "identify", FRONTDOOR, "P(Y(A=a))")
    assert code == 0
    assert out == (
        "p(Y(a)=y) = Σ_{m} p(m|a) Σ_{a'} p(y|a',m) p(a')\n"
        "  p(M(a)) = p(m|a)\n"
        "  p(Y(a, m)) = Σ_{a'} p(y|a',m) p(a')\n"
    )


def test_identify_machine_golden(capsys):
    code, out, _ = run(capsys, "identify", FRONTDOOR, "P(Y(A=a))", "--format", "machine")
    assert code == 0
    doc = json.loads(out)
    assert doc["identified"] is True
    assert doc["query"] == "p(Y(a)=y)"
    assert doc["estimand"] == (
        "(sum (m) (prod (p (M=m) (A=a)) "
        "(sum (a') (prod (p (Y=y) (A=a' M=m)) (p (A=a'))))))"
    )
    assert [d["district"] for d in doc["districts"]] == [["M"], ["Y"]]
    assert doc["ancestral_set"] == ["M", "Y"]


def test_identify_conditional(capsys):
    code, out, _ = run(capsys, "identify", BACKDOOR, "P(Y(A=a) | C)")
    assert code == 0
    assert out.splitlines()[0] == "p(Y(a)=y | C(a)=c) = Σ_{m} p(m|c,a) p(y|c,a,m)"


def test_identify_hedge_is_exit_2(capsys):
    code, out, _ = run(capsys, "identify", BOW, "P(Y(A=a))")
    assert code == 2
    assert out.splitlines()[0] == "NOT IDENTIFIED: p(Y(a)=y)"
    assert "inner {A} inside outer {A, Y}" in out


def test_identify_machine_hedge(capsys):
    code, out, _ = run(capsys, "identify", BOW, "P(Y(A=a))", "--format", "machine")
    assert code == 2
    doc = json.loads(out)
    assert doc["identified"] is False
    assert doc["witness"] == {
        "inner": ["A"],
        "outer": ["A", "Y"],
        "district": ["Y"],
        "ancestral_set": ["Y"],
        "violations": [],
    }


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def test_verify_frontdoor_passes(capsys):
    code, out, _ = run(
        capsys, "verify", FRONTDOOR, "P(Y(A=a))", "--random", "2", "--seed", "0"
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "p(Y(a)=y) = Σ_{m} p(m|a) Σ_{a'} p(y|a',m) p(a')"
    assert lines[1].startswith("seed=0 max|delta|=") and lines[1].endswith(" ok")
    assert lines[2].startswith("seed=1 max|delta|=") and lines[2].endswith(" ok")
    assert lines[3] == "PASS (2/2 models within 1e-09)"


def test_verify_rejects_bidirected_input(capsys):
    code, out, err = run(capsys, "verify", FRONTDOOR_ADMG, "P(Y(A=a))")
    assert (code, out) == (1, "")
    assert "hidden-variable form" in err


def test_verify_not_identified_is_exit_2(capsys):
    code, out, _ = run(capsys, "verify", BOW, "P(Y(A=a))")
    assert code == 2
    assert out.startswith("NOT IDENTIFIED")


# ---------------------------------------------------------------------------
# usage errors name the offending token
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "query, fragment",
    [
        ("P(Q(A=a))", "unknown variable 'Q'"),
        ("P(Y(A=7))", "'7' is not a state of A"),
        ("P(Y(A=a)) %%", "cannot read '%%'"),
        ("P(Y(A=1), M(A=0))", "conflicting values '1' and '0' for A"),
        ("P(Y(A=a) | C, C)", "C conditioned on twice"),
        ("P(Y) Y", "trailing input 'Y'"),
        ("Q(Y)", "expected 'P', found 'Q'"),
        ("P(Y(A=a)", "unexpected end"),
    ],
)
def test_query_errors(capsys, query, fragment):
    code, out, err = run(capsys, "identify", BACKDOOR, query)
    assert (code, out) == (1, "")
    assert err.startswith("error: query: ") and fragment in err


def test_missing_file_error(capsys):
    code, out, err = run(capsys, "identify", "nosuch.g", "P(Y)")
    assert (code, out, err) == (1, "", "error: nosuch.g: no such file\n")


def test_unknown_sep_token(capsys):
    code, _, err = run(
        capsys, "sep", BACKDOOR, "--treat", "A", "--left", "Y", "--right", "zz"
    )
    assert code == 1 and "unknown vertex token 'zz'" in err


# ---------------------------------------------------------------------------
# determinism
# ---------------------------------------------------------------------------


def test_repeated_runs_are_byte_identical(capsys):
    outs = [
        run(capsys, "identify", FRONTDOOR, "P(Y(A=a))", "--format", "machine")
        for _ in range(3)
    ]
    assert outs[0][0] == 0
    assert outs[1] == outs[0] and outs[2] == outs[0]


def test_console_script_byte_identical():
    cmd = [sys.executable, "-m", "swigid.cli", "identify", FRONTDOOR, "P(Y(A=a))"]
    first = subprocess.run(cmd, capture_output=True)
    second = subprocess.run(cmd, capture_output=True)
    assert first.returncode == 0
    assert first.stdout == second.stdout and first.stdout
