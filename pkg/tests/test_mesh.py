import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oseencpf.mesh import (ChannelParams, Mesh, MeshError, MeshParseError, Tag,
                           generate_channel_mesh, load_mesh, mesh_edges, save_mesh,
                           validate_mesh)


def polygon_area(p):
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def expected_area(params):
    k = np.arange(params.sides)
    ang = 2 * np.pi * k / params.sides
    poly = np.column_stack([params.center[0] + params.radius * np.cos(ang),
                            params.center[1] + params.radius * np.sin(ang)])
    return params.length * params.height - polygon_area(poly)


def test_default_geometry_has_all_tags():
    mesh = generate_channel_mesh(ChannelParams())
    census = mesh.tag_census()
    assert all(census[t] > 0 for t in Tag)
    assert validate_mesh(mesh) == []


@settings(max_examples=8, deadline=None)
@given(h=st.sampled_from([0.5, 0.35, 0.25]), sides=st.sampled_from([8, 12, 16]),
       radius=st.floats(0.08, 0.2), cx=st.floats(0.5, 1.2))
def test_area_additivity(h, sides, radius, cx):
    p = ChannelParams(center=(cx, 0.5), radius=radius, sides=sides, h=h)
    mesh = generate_channel_mesh(p)
    assert validate_mesh(mesh) == []
    total = mesh.signed_areas().sum()
    assert abs(total - expected_area(p)) <= 1e-12 * expected_area(p)


@pytest.mark.parametrize("kw", [dict(radius=0.6), dict(radius=0.0), dict(sides=10),
                                dict(sides=4), dict(center=(0.05, 0.5)), dict(h=-1.0)])
def test_rejects_bad_params(kw):
    with pytest.raises(MeshError):
        generate_channel_mesh(ChannelParams(**kw))


def test_control_arcs_on_front_quarters():
    p = ChannelParams()
    mesh = generate_channel_mesh(p)
    cx, cy = p.center
    for tag, sign in ((Tag.CONTROL1, 1), (Tag.CONTROL2, -1)):
        e = mesh.edges_with_tag(tag)
        mid = mesh.vertices[e].mean(axis=1)
        assert np.all(np.sign(mid[:, 1] - cy) == sign)
        assert np.allclose(np.hypot(*(mesh.vertices[e.ravel()] - p.center).T), p.radius)


def test_refinement_doubles_vertices():
    counts = [generate_channel_mesh(ChannelParams(h=h)).n_vertices for h in (0.25, 0.125)]
    assert counts[1] >= 2 * counts[0]


def test_deterministic():
    a = generate_channel_mesh(ChannelParams(h=0.2))
    b = generate_channel_mesh(ChannelParams(h=0.2))
    assert a.same_as(b)


def test_boundary_edges_have_one_triangle(coarse_mesh):
    edges, tri_edges = mesh_edges(coarse_mesh.triangles)
    counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
    boundary = {tuple(e) for e in edges[counts == 1]}
    listed = {tuple(sorted(map(int, e))) for e in coarse_mesh.boundary_edges}
    assert boundary == listed


SQUARE = """# two triangles
# VERTICES 4
0 0
1 0
1 1
0 1
# TRIANGLES 2
0 1 2
0 2 3
# BOUNDARY_EDGES 4
0 1 WALL
1 2 WALL
2 3 WALL
3 0 WALL
"""


def test_load_two_triangle_square(tmp_path):
    f = tmp_path / "sq.txt"
    f.write_text(SQUARE)
    mesh = load_mesh(f)
    assert mesh.n_vertices == 4 and mesh.n_triangles == 2


def test_missing_vertex_names_line(tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text(SQUARE.replace("3 0 WALL", "3 7 WALL"))
    with pytest.raises(MeshParseError, match="line 14"):
        load_mesh(f)


def test_parse_errors(tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text(SQUARE.replace("1 0\n", "1 zero\n"))
    with pytest.raises(MeshParseError, match="line 4"):
        load_mesh(f)
    f.write_text(SQUARE.replace("# VERTICES 4", "# VERTICES 5"))
    with pytest.raises(MeshParseError):
        load_mesh(f)


def test_round_trip(tmp_path, coarse_mesh):
    f = tmp_path / "m.txt"
    save_mesh(coarse_mesh, f)
    assert load_mesh(f, require_control=True).same_as(coarse_mesh)


def test_inverted_triangle_diagnostic(coarse_mesh):
    tri = coarse_mesh.triangles.copy()
    tri[5] = tri[5][[0, 2, 1]]
    bad = Mesh(coarse_mesh.vertices, tri, coarse_mesh.boundary_edges, coarse_mesh.edge_tags)
    problems = validate_mesh(bad)
    assert any("triangle 5 " in p for p in problems)


def test_interior_edge_listed_as_boundary(coarse_mesh):
    edges, tri_edges = mesh_edges(coarse_mesh.triangles)
    counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
    interior = edges[counts == 2][0]
    bad = Mesh(coarse_mesh.vertices, coarse_mesh.triangles,
               np.vstack([coarse_mesh.boundary_edges, interior]),
               coarse_mesh.edge_tags + (Tag.WALL,))
    assert any("edge not on boundary" in p for p in validate_mesh(bad))


def test_missing_control_is_reported():
    mesh = Mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]],
                [[0, 1], [1, 2], [2, 3], [3, 0]], ["WALL"] * 4)
    assert validate_mesh(mesh) == ["no CONTROL1/CONTROL2 edges"]
    assert validate_mesh(mesh, require_control=False) == []
