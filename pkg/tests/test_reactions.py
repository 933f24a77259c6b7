import dataclasses
import io
import sys
from collections import Counter

import numpy as np
import pytest

from molchef.chem import check_valence, parse_smiles, write_smiles
from molchef.reactions import (
    ExternalOracle, NoMatch, OracleUnavailable, PatternAtom, PatternBond, PatternGraph, PatternTooLarge,
    TemplateError, apply_template, default_library, match_subgraph, parse_templates, predict_from_smiles,
    predict_products,
)
from molchef.chem.graph import BondOrder
from molchef.reactions.oracle import parse_response, serve

LIB = {t.name: t for t in default_library()}


def canon(s):
    return write_smiles(parse_smiles(s))


def heavy_atoms(smiles):
    return Counter(a.element for s in smiles for a in parse_smiles(s).atoms if a.element != "H")


# ----------------------------------------------------------------- matching

def test_match_single_bond():
    pattern = PatternGraph((PatternAtom("C"), PatternAtom("O")), (PatternBond(0, 1, BondOrder.SINGLE),))
    assert len(match_subgraph(pattern, parse_smiles("CCO"))) == 1


def test_wildcard_on_benzene():
    hits = match_subgraph(PatternGraph((PatternAtom("*"),)), parse_smiles("c1ccccc1"))
    assert len(hits) == 6 and len({h[0] for h in hits}) == 6


def test_carboxylic_acid_pattern():
    acid = LIB["ester"].patterns[0]
    assert len(match_subgraph(acid, parse_smiles("CC(=O)O"))) == 1
    assert match_subgraph(acid, parse_smiles("CC(=O)OC")) == []


def test_symmetric_matches_deduplicated():
    # the C-C bond of ethane maps two ways onto the same atoms and bond
    pattern = PatternGraph((PatternAtom("C"), PatternAtom("C")), (PatternBond(0, 1, BondOrder.SINGLE),))
    assert len(match_subgraph(pattern, parse_smiles("CC"))) == 1


def test_match_order_deterministic():
    pattern = PatternGraph((PatternAtom("C"),))
    g = parse_smiles("CC(C)CO")
    assert match_subgraph(pattern, g) == match_subgraph(pattern, g)


def test_pattern_too_large():
    atoms = tuple(PatternAtom("C") for _ in range(13))
    bonds = tuple(PatternBond(i, i + 1, None) for i in range(12))
    with pytest.raises(PatternTooLarge):
        match_subgraph(PatternGraph(atoms, bonds), parse_smiles("C" * 13))


def test_charge_and_degree_constraints():
    alkoxide = PatternGraph((PatternAtom("O", charge=-1, degrees=(1,)),))
    assert len(match_subgraph(alkoxide, parse_smiles("C[O-]"))) == 1
    assert match_subgraph(alkoxide, parse_smiles("CO")) == []


# ---------------------------------------------------------- template examples

def test_esterification():
    out = apply_template(LIB["ester"], [parse_smiles("CC(=O)O"), parse_smiles("CCO")])
    assert out.products == (canon("CCOC(C)=O"),) and out.byproducts == ("O",)


def test_amide_coupling():
    out = apply_template(LIB["amide"], [parse_smiles("CC(=O)O"), parse_smiles("CN")])
    assert out.products == (canon("CNC(C)=O"),) and out.byproducts == ("O",)


def test_no_match():
    with pytest.raises(NoMatch):
        apply_template(LIB["ester"], [parse_smiles("C"), parse_smiles("CC")])
    with pytest.raises(NoMatch):
        apply_template(LIB["ester"], [parse_smiles("CC(=O)O")])


def test_predict_passthrough():
    out = predict_from_smiles(["C"])
    assert out.products == ("C",) and not out.reacted and out.template is None


def test_predict_default_ester():
    out = predict_from_smiles(["CCO", "CC(=O)O"])
    assert out.template == "ester" and out.primary == canon("CCOC(C)=O")


def test_predict_empty_bag():
    with pytest.raises(ValueError):
        predict_products([])


def test_priority_tie_broken_by_name():
    base = LIB["ester"]
    zed = dataclasses.replace(base, name="zed", priority=1)
    alpha = dataclasses.replace(base, name="alpha", priority=1)
    for lib in ([zed, alpha], [alpha, zed]):
        assert predict_from_smiles(["CC(=O)O", "CCO"], lib).template == "alpha"


@pytest.mark.parametrize("template", sorted(LIB))
def test_builtin_examples(template):
    t = LIB[template]
    reactants, expected = t.example
    out = predict_from_smiles(list(reactants), [t])
    assert sorted(out.products + out.byproducts) == sorted(canon(s) for s in expected)


# ------------------------------------------------------------ template files

GOOD = """# molchef templates v1
TEMPLATE ester
PRIORITY 10
PATTERN
ATOM 0 C map=1
ATOM 1 O degree=1 map=2
ATOM 2 O charge=0 degree=1 map=3
BOND 0 1 =
BOND 0 2 -
PATTERN
ATOM 0 C degree=1,2 map=4
ATOM 1 O charge=0 degree=1 map=5
BOND 0 1 -
EDITS
remove_bond 1 3
add_bond 1 5 -
BYPRODUCT 3
EXAMPLE {example}
END
"""


def test_template_file_round_trip():
    [t] = parse_templates(GOOD.format(example="CC(=O)O.CCO>>CCOC(C)=O.O"))
    assert t.name == "ester" and len(t.patterns) == 2 and len(t.edits) == 2


def test_template_wrong_example_rejected():
    with pytest.raises(TemplateError):
        parse_templates(GOOD.format(example="CC(=O)O.CCO>>CCCC"))


def test_template_header_required():
    with pytest.raises(TemplateError):
        parse_templates(GOOD.format(example="CC(=O)O.CCO>>CCOC(C)=O.O").split("\n", 1)[1])


def test_template_unknown_label_rejected():
    with pytest.raises(TemplateError):
        parse_templates(GOOD.format(example="CC(=O)O.CCO>>CCOC(C)=O.O").replace("add_bond 1 5", "add_bond 1 9"))


# --------------------------------------------------------------- fuzz corpus

ALKYL = ["C", "CC", "CCC", "CC(C)", "CCCC", "CC(C)C", "C1CC1", "C1CCCC1", "c1ccccc1", "Cc1ccccc1", "COC", "CCOCC",
         "FC", "ClCC", "N#CC", "CC(F)(F)"]
# written from the attachment atom so a prefix bonds to the ring
ARYL = ["c1ccccc1", "c1ccc(C)cc1", "c1ccncc1", "c1ccc(OC)cc1", "c1ccc(F)cc1", "c1ccc2ccccc2c1"]


def _fuzz_corpus(n=200):
    rng = np.random.default_rng(12345)
    pick = lambda pool: pool[int(rng.integers(len(pool)))]
    makers = {
        "ester": lambda: (pick(ALKYL) + "C(=O)O", pick(ALKYL) + "CO"),
        "amide": lambda: (pick(ALKYL) + "C(=O)O", pick(ALKYL) + "CN"),
        "williamson": lambda: (pick(ALKYL) + "CBr", pick(ALKYL) + "C[O-]"),
        "sn2": lambda: (pick(ALKYL) + "CBr", pick(ALKYL) + "CN"),
        "imine": lambda: (pick(ALKYL) + "C=O", pick(ALKYL) + "CN"),
        "suzuki": lambda: ("OB(O)" + pick(ARYL), "Br" + pick(ARYL)),
    }
    names = sorted(makers)
    return [(names[k % len(names)], makers[names[k % len(names)]]()) for k in range(n)]


FUZZ = _fuzz_corpus()


def test_fuzz_corpus_size():
    assert len(FUZZ) == 200


@pytest.mark.parametrize("case", range(len(FUZZ)))
def test_fuzz_products_valid_conserved_and_order_free(case):
    _, pair = FUZZ[case]
    out = predict_from_smiles(list(pair))
    assert out.reacted and not out.invalid
    for s in out.products + out.byproducts:
        check_valence(parse_smiles(s))
    assert heavy_atoms(out.products + out.byproducts) == heavy_atoms(pair)
    assert predict_from_smiles(list(reversed(pair))) == out


@pytest.mark.parametrize("case", range(0, len(FUZZ), 7))
def test_fuzz_named_template_applies(case):
    name, pair = FUZZ[case]
    out = apply_template(LIB[name], [parse_smiles(s) for s in pair])
    assert out.template == name and out.products


def test_order_invariance_with_shuffled_atoms():
    rng = np.random.default_rng(3)
    a, b = parse_smiles("CCC(=O)O"), parse_smiles("OCC(C)C")
    ref = predict_products([a, b])
    for _ in range(20):
        pa = a.permuted([int(i) for i in rng.permutation(a.n_atoms)])
        pb = b.permuted([int(i) for i in rng.permutation(b.n_atoms)])
        assert predict_products([pb, pa]) == ref


# ------------------------------------------------------------------- oracle

ECHO = [sys.executable, "-m", "molchef.reactions", "--echo"]


def test_echo_oracle_returns_reactants():
    with ExternalOracle(ECHO) as oracle:
        out = oracle([parse_smiles("OCC"), parse_smiles("CC(=O)O")])
    assert out.products == tuple(sorted([canon("CCO"), canon("CC(=O)O")]))


def test_unparseable_response_is_invalid_record():
    out = parse_response("not-a-smiles")
    assert out.invalid and out.products == ()
    assert parse_response("ERROR boom").error == "boom"


def test_oracle_ester_response():
    out = parse_response("CCOC(C)=O")
    assert out.products == (canon("CCOC(C)=O"),) and not out.invalid


def test_oracle_unavailable():
    with pytest.raises(OracleUnavailable):
        ExternalOracle(["/nonexistent/oracle-binary"])([parse_smiles("C")])


def test_reference_server_uses_templates():
    out = io.StringIO()
    serve(stdin=io.StringIO("CC(=O)O.CCO\nC(\n"), stdout=out)
    first, second = out.getvalue().splitlines()
    assert canon("CCOC(C)=O") in first.split(".")
    assert second.startswith("ERROR")
