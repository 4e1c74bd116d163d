import numpy as np
import pytest

from affinekahler import catalog
from affinekahler.catalog import CatalogError, families_grid, make, names, run_checks


def test_names_and_locations():
    assert len(names()) >= 12
    assert len(set(names())) == len(names())
    for name, S, e in catalog.entries():
        assert e.location, name


def test_invalid_parameters():
    with pytest.raises(CatalogError):
        make("P+", c=0.0)
    with pytest.raises(CatalogError):
        make("Q", d=1.0)
    with pytest.raises(CatalogError):
        make("no-such-surface")


@pytest.mark.parametrize("name", names())
def test_entry_expectations(name):
    S, e = make(name)
    checks = run_checks(S, e, seed=3)
    failed = {k: v for k, v in checks.items() if not v[0]}
    assert not failed, failed
    assert "holonomy" in checks


def test_family_grid_covers_every_family():
    grid = families_grid()
    fams = {name for name, *_ in grid}
    assert fams == set(catalog.FAMILY_SWEEPS)
    for values in catalog.FAMILY_SWEEPS.values():
        assert all(len(v) <= 5 for v in values.values())
    assert len(grid) >= 50


@pytest.mark.parametrize("family", sorted(catalog.FAMILY_SWEEPS))
def test_family_points(family):
    for name, params, S, e in families_grid():
        if name != family:
            continue
        checks = run_checks(S, e, seed=1, npts=6, holonomy=False)
        failed = {k: v for k, v in checks.items() if not v[0]}
        assert not failed, (params, failed)


def test_family_sweep_is_deterministic():
    a = [(n, p) for n, p, *_ in families_grid()]
    b = [(n, p) for n, p, *_ in families_grid()]
    assert a == b


def test_field_match_is_scale_invariant():
    from affinekahler.scalarfield import Num
    from affinekahler.surface import ExprTensor11

    S, e = make("B-power-t12")
    g = e.generators[0]
    pts = S.grid(3)
    scaled = ExprTensor11.from_matrix(g.components, Num(-3.0))
    assert catalog.field_match(g, scaled, pts) == pytest.approx(1.0, abs=1e-14)
    other = ExprTensor11.from_matrix([[1, 0], [0, -1]])
    assert catalog.field_match(g, other, pts) < 1 - 1e-3
