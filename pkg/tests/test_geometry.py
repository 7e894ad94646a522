import math

import numpy as np
import pytest

from twophase_dnn.geometry import (AmbiguousPoint, Geometry, SampleSet, SamplingPlan, classify, export_samples,
                                   generate_samples, import_samples, interface_normal)

GEOM = Geometry()


def test_classify_examples():
    assert classify(GEOM, (1.5, 1.5, 0.3)) == 2
    assert classify(GEOM, (0.1, 0.1, 0.9)) == 1
    with pytest.raises(AmbiguousPoint):
        classify(GEOM, (2.5, 1.5, 0.0))


def test_classify_outside_box():
    with pytest.raises(ValueError):
        classify(GEOM, (3.5, 1.0))


@pytest.mark.parametrize("p,n", [
    ((2.5, 1.5), (-1.0, 0.0)),
    ((1.5, 0.5), (0.0, 1.0)),
    ((1.5 + math.cos(math.pi / 4), 1.5 + math.sin(math.pi / 4)), (-math.sqrt(2) / 2, -math.sqrt(2) / 2)),
])
def test_interface_normal(p, n):
    assert np.allclose(interface_normal(GEOM, p), n, atol=1e-15)


def test_interface_normal_off_circle():
    with pytest.raises(ValueError):
        interface_normal(GEOM, (2.6, 1.5))


def test_geometry_validation():
    with pytest.raises(ValueError):
        Geometry(radius=0.0)
    with pytest.raises(ValueError):
        Geometry(radius=2.0)


def test_plan_from_table_counts():
    plan = SamplingPlan.from_table("10x10x5", "4x4x5", "4x5", "4x4")
    assert (plan.M_L, plan.M_B, plan.M_Gamma, plan.M_I) == (500, 80, 20, 16)


def test_plan_accepts_unicode_times():
    assert SamplingPlan.from_table("10 × 10 × 5", "4×4×5", "4×5", "4×4").M_L == 500


def test_plan_rejects_bad_boundary_pattern():
    with pytest.raises(ValueError):
        SamplingPlan(boundary=(4, 3, 5))


def test_counts_are_exact():
    s = generate_samples(GEOM, SamplingPlan.from_table("10x10x5", "4x4x5", "4x5", "4x4", seed=3))
    assert s.count("L1") == 500 and s.count("L2") == 500
    assert s.count("G") == 20 and s.count("B1") == 80
    assert s.count("I1") == 16 and s.count("I2") == 16
    assert s.count("OBS") == 0


def test_interior_points_lie_in_their_subdomain():
    s = generate_samples(GEOM, SamplingPlan(seed=1))
    for sub in (1, 2):
        P = s[f"L{sub}"]
        assert all(classify(GEOM, p) == sub for p in P)
        assert P[:, 2].min() >= 0 and P[:, 2].max() <= 1


def test_interface_points_and_normals():
    s = generate_samples(GEOM, SamplingPlan(interface=(7, 3)))
    G = s["G"]
    assert np.abs(GEOM.level(G[:, 0], G[:, 1])).max() < 1e-12
    assert np.abs(np.hypot(*s.normals.T) - 1).max() < 1e-14
    to_center = np.array(GEOM.center) - G[:, :2]
    assert np.all(np.sum(to_center * s.normals, axis=1) > 0)
    assert sorted(set(G[:, 2])) == [0.0, 0.5, 1.0]


def test_boundary_points_on_edges_without_corners():
    s = generate_samples(GEOM, SamplingPlan(boundary=(3, 4, 2)))
    B = s["B1"]
    on_edge = (B[:, 0] == 0) | (B[:, 0] == 3) | (B[:, 1] == 0) | (B[:, 1] == 3)
    assert on_edge.all()
    corners = ((B[:, 0] % 3 == 0) & (B[:, 1] % 3 == 0))
    assert not corners.any()
    assert np.bincount(s.edges).tolist() == [6, 6, 6, 6]


def test_initial_points_at_time_zero():
    s = generate_samples(GEOM, SamplingPlan(initial=(5, 5)))
    assert not s["I1"][:, 2].any() and not s["I2"][:, 2].any()


def test_observation_points_on_time_grid():
    obs = [(1.5, 1.5), (1.6, 1.4)]
    s = generate_samples(GEOM, SamplingPlan(interior=(4, 4, 3), observation=obs))
    O = s["OBS"]
    assert O.shape == (6, 3)
    assert sorted(set(O[:, 2])) == [0.0, 0.5, 1.0]


def test_observation_outside_disk_rejected():
    with pytest.raises(ValueError):
        generate_samples(GEOM, SamplingPlan(observation=[(0.2, 0.2)]))


def test_same_seed_same_samples():
    plan = SamplingPlan(seed=11)
    assert generate_samples(GEOM, plan) == generate_samples(GEOM, plan)
    assert not generate_samples(GEOM, plan) == generate_samples(GEOM, SamplingPlan(seed=12))


def test_grid_mode_is_clipped_tensor_grid():
    s = generate_samples(GEOM, SamplingPlan(interior=(10, 10, 5), mode="grid"))
    n = s.count("L1") + s.count("L2")
    assert n == 500
    assert len(set(s["L1"][:, 0])) <= 10


def test_export_import_round_trip(tmp_path):
    s = generate_samples(GEOM, SamplingPlan(observation=[(1.5, 1.5)], seed=5))
    path = tmp_path / "samples.txt"
    export_samples(s, path)
    assert import_samples(path) == s
    header = path.read_text().splitlines()[0]
    assert header.split() == ["term", "x", "y", "t", "nx", "ny", "edge"]


def test_import_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("term x y t nx ny edge\nZZ 1 2 3 4 5 6\n")
    with pytest.raises(ValueError, match=":2"):
        import_samples(path)
