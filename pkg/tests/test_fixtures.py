import shutil

import pytest

from jetbrackets import load_file, load_system_text
from jetbrackets.errors import UnknownFixture, ValidationFailure
from jetbrackets.fixtures import FIXTURE_NAMES, available_fixtures, fixture_path, load_fixture


def test_all_fixtures_present():
    assert len(FIXTURE_NAMES) == 8
    assert sorted(available_fixtures()) == sorted(FIXTURE_NAMES)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixture_loads_and_validates(name):
    fx = load_fixture(name)
    assert fx.name == name
    assert fx.sym_labels and fx.adj_labels


def test_boussinesq_counts():
    fx = load_fixture("boussinesq")
    assert (len(fx.symmetries), len(fx.adjoint_symmetries), len(fx.r_ops)) == (6, 6, 12)
    assert {t.kind for t in fx.action_tables} == {1, 2, 3}


def test_acoustic_potential_variants():
    fx = load_fixture("acoustic_potential")
    assert fx.specialization == {"alpha": 0}
    assert len(fx.symmetries) == 5 and len(fx.adjoint_symmetries) == 5
    damped = load_fixture("acoustic_potential", specialize={})
    assert damped.sym_labels == ["P1", "P2", "P3", "P4"]
    assert damped.local_adj_labels == ["Q1", "Q2"]
    assert not damped.noether and not damped.isomorphisms


def test_unknown_fixture():
    with pytest.raises(UnknownFixture):
        load_fixture("nope")


def test_fixture_dir_override(tmp_path, monkeypatch):
    shutil.copy(fixture_path("reaction_diffusion"), tmp_path / "renamed_copy.sys")
    monkeypatch.setenv("JETBRACKETS_FIXTURE_DIR", str(tmp_path))
    assert available_fixtures() == ["renamed_copy"]
    fx = load_fixture("renamed_copy")
    assert fx.name == "reaction_diffusion"
    with pytest.raises(UnknownFixture):
        load_fixture("boussinesq")


def test_content_hash_tracks_text():
    text = fixture_path("reaction_diffusion").read_text()
    a = load_system_text(text)
    b = load_system_text(text + "\n# trailing comment\n")
    assert a.content_hash != b.content_hash
    assert a.content_hash == load_fixture("reaction_diffusion").content_hash


def test_specialization_cannot_zero_a_declared_factor():
    with pytest.raises(ValidationFailure):
        load_fixture("reaction_diffusion", specialize={"p": 1})


def test_invalid_symmetry_rejected(tmp_path):
    text = fixture_path("reaction_diffusion").read_text().replace("P2 = (u[x], v[x])", "P2 = (u, v)")
    path = tmp_path / "broken.sys"
    path.write_text(text)
    with pytest.raises(ValidationFailure):
        load_file(path)
    assert load_file(path, validate=False).obj("P2")


def test_multiplier_lists():
    expected_non = {
        "boussinesq": ["Q6"],
        "coupled_kdv": ["Q5"],
        "coupled_kdv_potential": ["Q5"],
        "acoustic_potential": ["Q5"],
    }
    for name in FIXTURE_NAMES:
        fx = load_fixture(name)
        if fx.multipliers is None:
            continue
        mult, non = fx.multipliers
        assert non == expected_non.get(name, [])
        for q in mult:
            assert fx.classify(q).is_multiplier, (name, q)
        for q in non:
            assert not fx.classify(q).is_multiplier, (name, q)
