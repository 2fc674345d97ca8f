import numpy as np
import pytest

import oracles
from attriprof import (
    ValidationError,
    build_alpha_tree,
    build_max_tree,
    build_min_tree,
    build_omega_tree,
    build_tree_of_shapes,
    dump_tree,
    partition_cut,
    quantize_band,
    selfdual_interpolate,
)
from attriprof._kernels import get_backend

BUILDERS = {
    "max": (build_max_tree, oracles.max_tree_nodes),
    "min": (build_min_tree, oracles.min_tree_nodes),
}


def _tree_matches_oracle(tree, expected_nodes, expected_parents=None):
    got_nodes, got_parents = oracles.tree_nodes_from_tree(tree)
    assert got_nodes == expected_nodes
    if expected_parents is not None:
        assert got_parents == expected_parents


# ---------------------------------------------------------------------------
# fixed examples
# ---------------------------------------------------------------------------

def test_constant_image_single_node_everywhere():
    img = np.full((4, 4), 7)
    for build in (build_max_tree, build_min_tree, build_tree_of_shapes):
        t = build(img)
        assert t.node_count == 1
        assert t.level.tolist() == [7]
    for build in (build_alpha_tree, build_omega_tree):
        t = build(img)
        assert t.node_count == 1


def test_max_tree_nested_blob(nested_image):
    t = build_max_tree(nested_image, 4)
    assert t.node_count == 3
    assert t.level.tolist() == [0, 1, 2]
    assert t.node_areas().tolist() == [16, 4, 3]
    assert t.parent.tolist() == [0, 0, 1]


def test_max_tree_1d_two_peaks():
    t = build_max_tree(np.array([[3, 1, 3, 1]]), 4)
    nodes, _ = oracles.tree_nodes_from_tree(t)
    assert ((0,), 3) in nodes and ((2,), 3) in nodes
    assert (tuple(range(4)), 1) in nodes
    assert t.node_count == 3


def test_min_tree_nested_blob(nested_image):
    t = build_min_tree(nested_image, 4)
    assert t.level.tolist() == [2, 1, 0]
    assert t.node_areas().tolist() == [16, 13, 12]


def test_min_max_duality_on_corpus(small_corpus):
    for img in small_corpus:
        tmin = build_min_tree(img)
        tmax_dual = build_max_tree(255 - img)
        a, _ = oracles.tree_nodes_from_tree(tmin)
        b, _ = oracles.tree_nodes_from_tree(tmax_dual)
        assert {(s, 255 - l) for s, l in a} == b


def test_tos_nested_blob(nested_image):
    t = build_tree_of_shapes(nested_image)
    nodes, parents = oracles.tree_nodes_from_tree(t)
    exp_nodes, exp_parents = oracles.tos_shapes(nested_image)
    assert nodes == exp_nodes
    assert parents == exp_parents
    assert t.level[0] == 0  # root carries the outer-region value


def test_tos_self_duality_on_corpus(small_corpus):
    for img in small_corpus:
        a, _ = oracles.tree_nodes_from_tree(build_tree_of_shapes(img))
        b, _ = oracles.tree_nodes_from_tree(build_tree_of_shapes(255 - img))
        assert {s for s, _ in a} == {s for s, _ in b}
        assert {(s, 255 - l) for s, l in a} == b


def test_tos_equal_level_chain_merges():
    # [0,5,3,5,0]: the 1-px shape at level 3 merges into the 3-px level-3 shape
    img = np.array([[0, 5, 3, 5, 0]])
    t = build_tree_of_shapes(img)
    nodes, _ = oracles.tree_nodes_from_tree(t)
    assert nodes == {
        (tuple(range(5)), 0),
        ((1, 2, 3), 3),
        ((1,), 5),
        ((3,), 5),
    }


def test_alpha_tree_example_1x3():
    t = build_alpha_tree(np.array([[0, 1, 3]]))
    nodes, _ = oracles.tree_nodes_from_tree(t)
    assert nodes == {
        ((0, 1, 2), 2.0),
        ((0, 1), 1.0),
        ((0,), 0.0),
        ((1,), 0.0),
        ((2,), 0.0),
    }


def test_alpha_zero_cut_is_flat_zones(small_corpus):
    for img in small_corpus[:10]:
        t = build_alpha_tree(img)
        cut = partition_cut(t, 0)
        flat_zones = set()
        for h in np.unique(img):
            for comp in oracles.flood_components(img == h, 4):
                flat_zones.add(comp)
        got = set()
        for lab in np.unique(cut):
            got.add(tuple(np.flatnonzero(cut.ravel() == lab).tolist()))
        assert got == flat_zones


def test_omega_tree_ramp_example():
    t = build_omega_tree(np.array([[0, 1, 2, 3]]))
    cut1 = partition_cut(t, 1)
    assert len(np.unique(cut1)) == 4  # range 3 > 1: four singletons
    cut3 = partition_cut(t, 3)
    assert len(np.unique(cut3)) == 1


def test_omega_root_cut_equals_alpha_root(small_corpus):
    for img in small_corpus[:10]:
        at = build_alpha_tree(img)
        ot = build_omega_tree(img)
        rng_max = float(img.max() - img.min())
        assert len(np.unique(partition_cut(ot, rng_max))) == 1
        assert ot.node_areas()[0] == at.node_areas()[0] == img.size


# ---------------------------------------------------------------------------
# oracle equivalence on corpora
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["max", "min"])
def test_component_trees_match_oracle_random(kind, random_corpus):
    build, oracle = BUILDERS[kind]
    for img in random_corpus:
        t = build(img, 4)
        nodes, parents = oracles.tree_nodes_from_tree(t)
        exp = oracle(img, 4)
        assert nodes == exp
        assert parents == oracles.laminar_parents([s for s, _ in exp])


@pytest.mark.parametrize("kind", ["max", "min"])
def test_component_trees_match_oracle_8conn(kind, small_corpus):
    build, oracle = BUILDERS[kind]
    for img in small_corpus:
        nodes, _ = oracles.tree_nodes_from_tree(build(img, 8))
        assert nodes == oracle(img, 8)


def test_tos_matches_oracle_random(small_corpus):
    for img in small_corpus:
        nodes, parents = oracles.tree_nodes_from_tree(build_tree_of_shapes(img))
        exp_nodes, exp_parents = oracles.tos_shapes(img)
        assert nodes == exp_nodes
        assert parents == exp_parents


def test_alpha_matches_oracle_random(small_corpus):
    for img in small_corpus:
        nodes, parents = oracles.tree_nodes_from_tree(build_alpha_tree(img))
        exp = oracles.alpha_tree_nodes(img)
        assert nodes == exp
        assert parents == oracles.laminar_parents([s for s, _ in exp])


def test_omega_matches_oracle_random(small_corpus):
    for img in small_corpus[:20]:
        nodes, _ = oracles.tree_nodes_from_tree(build_omega_tree(img))
        assert nodes == oracles.omega_tree_nodes(img)


def test_all_trees_match_oracle_exhaustive_sample(exhaustive_sample):
    for img in exhaustive_sample:
        for kind in ("max", "min"):
            build, oracle = BUILDERS[kind]
            nodes, _ = oracles.tree_nodes_from_tree(build(img, 4))
            assert nodes == oracle(img, 4)
        nodes, _ = oracles.tree_nodes_from_tree(build_tree_of_shapes(img))
        assert nodes == oracles.tos_shapes(img)[0]
        nodes, _ = oracles.tree_nodes_from_tree(build_alpha_tree(img))
        assert nodes == oracles.alpha_tree_nodes(img)


# ---------------------------------------------------------------------------
# structural invariants
# ---------------------------------------------------------------------------

def test_level_monotonicity_and_partition_sums(random_corpus):
    for img in random_corpus[:60]:
        tmax = build_max_tree(img)
        assert (tmax.level[1:] > tmax.level[tmax.parent[1:]]).all()
        tmin = build_min_tree(img)
        assert (tmin.level[1:] < tmin.level[tmin.parent[1:]]).all()
        ts = build_tree_of_shapes(img)
        assert (ts.level[1:] != ts.level[ts.parent[1:]]).all()
        for t in (build_alpha_tree(img), build_omega_tree(img)):
            assert (t.merge_index[1:] <= t.merge_index[t.parent[1:]]).all()
            leaf_sizes = np.bincount(t.pixel_node, minlength=t.node_count)
            assert leaf_sizes[t.leaf_mask()].sum() == img.size
            assert (leaf_sizes[~t.leaf_mask()] == 0).all()


def test_pixel_node_levels_match_pixels(random_corpus):
    for img in random_corpus[:40]:
        for build in (build_max_tree, build_min_tree, build_tree_of_shapes):
            t = build(img)
            assert np.array_equal(t.level[t.pixel_node], img.ravel())


def test_node_pixel_sets_connected(small_corpus):
    for img in small_corpus[:10]:
        for build in (build_max_tree, build_min_tree, build_tree_of_shapes):
            t = build(img)
            nodes, _ = oracles.tree_nodes_from_tree(t)
            for pixels, _ in nodes:
                mask = np.zeros(img.size, dtype=bool)
                mask[list(pixels)] = True
                comps = oracles.flood_components(mask.reshape(img.shape), t.connectivity)
                assert len(comps) == 1, (t.kind, pixels)


# ---------------------------------------------------------------------------
# lanes, quantization, validation
# ---------------------------------------------------------------------------

def test_backends_produce_identical_kernels(random_corpus):
    fb = get_backend("fallback")
    try:
        nat = get_backend("native")
    except ImportError:
        pytest.skip("native backend not built")
    for img in random_corpus[:10]:
        flat = img.ravel().astype(np.int64)
        order = np.argsort(flat, kind="stable")
        assert np.array_equal(
            fb.max_tree_parent(flat, order, 8, 8, 4),
            nat.max_tree_parent(flat, order, 8, 8, 4),
        )
        for a, b in zip(fb.alpha_tree_build(img), nat.alpha_tree_build(img)):
            assert np.array_equal(a, b)
        mask = img >= 3
        for conn in (4, 8):
            la, ca = fb.label_components(mask, conn)
            lb, cb = nat.label_components(mask, conn)
            assert ca == cb and np.array_equal(la, lb)
        ypad = np.pad(selfdual_interpolate(img), 1, constant_values=2 * int(img[0, 0]))
        for h in np.unique(ypad)[1:]:
            ra = fb.shapes_at_level(ypad, int(h), True, 8, 8)
            rb = nat.shapes_at_level(ypad, int(h), True, 8, 8)
            for x, y in zip(ra, rb):
                assert np.array_equal(x, y)


def test_quantize_band():
    q = quantize_band(np.array([[0.0, 0.5, 1.0]]), levels=3)
    assert q.tolist() == [[0, 1, 2]]
    assert quantize_band(np.array([[2.5, 2.5]]), 256).tolist() == [[0, 0]]
    q = quantize_band(np.array([[7, 9]]), 256)  # integer bands pass through
    assert q.tolist() == [[7, 9]]


def test_tree_input_validation():
    with pytest.raises(TypeError):
        build_max_tree(np.array([[0.5, 1.0]]))
    with pytest.raises(TypeError):
        build_max_tree(np.array([[np.nan, 1.0]]))
    with pytest.raises(ValidationError):
        build_max_tree(np.array([[0, 1]]), connectivity=6)
    with pytest.raises(ValidationError):
        build_max_tree(np.array([[0, 100000]]))
    # integral-valued floats are accepted
    t = build_max_tree(np.array([[0.0, 1.0]]))
    assert t.node_count == 2


def test_dump_tree_golden(nested_image):
    t = build_max_tree(nested_image)
    text = dump_tree(t)
    assert text.splitlines()[0] == "id\tparent\tlevel\tarea"
    assert text.splitlines()[1] == "0\t0\t0\t16"
    assert len(text.splitlines()) == 4
