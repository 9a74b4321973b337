import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagfsi.geometry import (
    FLUID,
    SOLID,
    GeometryError,
    LocalChart,
    box_mesh,
    disk_mesh,
    interface_normal,
    interface_normals,
    read_snapshot,
    solid_separation,
    straighten_interface,
    write_snapshot,
)


def test_concentric_separation():
    m = disk_mesh(1.0, [(0.0, 0.0, 0.4)], 0.1)
    assert m.separation == pytest.approx(0.6, abs=1e-15)


def test_two_solids_separation():
    assert solid_separation(1.0, [(0.5, 0.0, 0.2), (-0.5, 0.0, 0.2)]) == pytest.approx(0.3)
    m = disk_mesh(1.0, [(0.5, 0.0, 0.2), (-0.5, 0.0, 0.2)], 0.1)
    assert m.separation == pytest.approx(0.3)
    assert len(m.interface_facets) > 0


def test_solid_outside_container():
    with pytest.raises(GeometryError, match="not strictly interior"):
        disk_mesh(1.0, [(0.0, 0.0, 1.1)], 0.1)


def test_touching_solids():
    with pytest.raises(GeometryError, match="touch"):
        solid_separation(1.0, [(0.2, 0.0, 0.2), (-0.2, 0.0, 0.2)])


@pytest.mark.parametrize("h", [0.3, 0.15, 0.1])
def test_areas_cover_domain(h):
    m = disk_mesh(1.0, [(0.1, -0.1, 0.35)], h)
    total = m.fluid_area() + m.solid_area()
    assert abs(total - m.domain_area()) <= 1e-10 * total
    assert np.all(m.element_areas() > 0)


def test_interface_normals_antiparallel(coarse):
    m = coarse[0]
    # normal computed from the fluid element vs. the reversed facet of the solid element
    n_f = interface_normals(m)
    p = m.nodes[m.interface_facets]
    e = p[:, 0] - p[:, 1]  # orientation as seen from the solid element
    n_s = np.column_stack([e[:, 1], -e[:, 0]])
    n_s /= np.linalg.norm(n_s, axis=1, keepdims=True)
    assert np.abs(n_f + n_s).max() <= 1e-12
    assert np.all(m.tags[m.interface_elements[:, 0]] == FLUID)
    assert np.all(m.tags[m.interface_elements[:, 1]] == SOLID)


def test_normal_flat_facet_solid_below():
    m = box_mesh(1.0, 1.0, 4, 4, solid_box=(0.25, 0.75, 0.25, 0.75))
    p = m.nodes[m.interface_facets]
    top = np.flatnonzero(np.all(np.isclose(p[:, :, 1], 0.75), axis=1))
    assert len(top) == 2
    np.testing.assert_allclose(interface_normal(m, int(top[0])), [0.0, -1.0], atol=1e-15)


def test_normal_on_circle(coarse):
    m = coarse[0]
    mid = m.nodes[m.interface_facets].mean(axis=1)
    n = interface_normals(m)
    radial = -mid / np.linalg.norm(mid, axis=1, keepdims=True)
    # straight facets of a polygon inscribed in the circle: exact at the midpoint
    assert np.abs(n - radial).max() < 1e-12


def test_normal_of_outer_facet_rejected(coarse):
    m = coarse[0]
    with pytest.raises(GeometryError):
        interface_normal(m, tuple(m.outer_facets[0]))


def test_flat_chart_is_identity():
    ch = LocalChart(lambda s: 0 * s, lambda s: 0 * s)
    y = np.random.default_rng(0).uniform(-1, 1, (20, 2))
    np.testing.assert_allclose(ch.psi(y), y, atol=0)
    np.testing.assert_allclose(ch.phi(y), y, atol=0)
    np.testing.assert_allclose(ch.inverse_jacobian(y), np.broadcast_to(np.eye(2), (20, 2, 2)))


def test_affine_chart_constant_shear():
    ch = LocalChart(lambda s: 0.3 * s + 0.1, lambda s: 0.3 + 0 * s)
    y = np.random.default_rng(1).uniform(-1, 1, (10, 2))
    J = ch.jacobian(y)
    assert np.abs(J - J[0]).max() == 0
    np.testing.assert_allclose(np.linalg.det(J), 1.0, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.1, 3.0), st.floats(0, 2 * np.pi))
def test_chart_round_trip(amp, freq, angle):
    ch = LocalChart(lambda s: amp * np.sin(freq * s), lambda s: amp * freq * np.cos(freq * s),
                    origin=(0.2, -0.1), normal=(np.cos(angle), np.sin(angle)))
    y = np.random.default_rng(5).uniform(-1, 1, (50, 2))
    assert np.abs(ch.phi(ch.psi(y)) - y).max() <= 1e-12


def test_straighten_circle_interface(coarse):
    m = coarse[0]
    anchor = m.nodes[m.interface_facets[0, 0]]
    ch = straighten_interface(m, anchor, 0.3)
    # interface vertices map onto z = 0 near the anchor
    iv = np.unique(m.interface_facets)
    near = iv[np.linalg.norm(m.nodes[iv] - anchor, axis=1) < 0.2]
    assert np.abs(ch.phi(m.nodes[near])[:, 1]).max() < 1e-12
    # fluid side (outside the solid) is z > 0
    assert ch.phi(anchor * 1.2)[1] > 0


def test_straighten_rejects_off_interface(coarse):
    with pytest.raises(GeometryError):
        straighten_interface(coarse[0], (0.9, 0.0), 0.2)


def test_snapshot_round_trip(tmp_path, coarse):
    m = coarse[0]
    f = np.random.default_rng(2).standard_normal((m.n_nodes, 2))
    path = tmp_path / "snap.txt"
    write_snapshot(path, m, {"velocity": f}, "abc123")
    text = path.read_text().splitlines()
    assert text[0].startswith("lagfsi-mesh v1") and text[1] == "# config_hash=abc123"
    m2, fields = read_snapshot(path)
    np.testing.assert_array_equal(m2.nodes, m.nodes)
    np.testing.assert_array_equal(m2.elements, m.elements)
    np.testing.assert_array_equal(m2.tags, m.tags)
    np.testing.assert_array_equal(fields["velocity"], f)
