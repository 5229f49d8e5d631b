import itertools
import os
import os.path

import numpy
import pytest

from pincer.exceptions import (
    ConfigError,
    PlacementError,
)
from pincer.synth.collide import intersects
from pincer.synth.corpus import (
    SCENE_FILE,
    VIEW_FILES,
    load_scene_dir,
    make_corpus,
    make_scene,
    place_clutter,
    random_primitive,
    render_scene,
    rest_on_table,
    scene_dirs,
    write_corpus,
)
from pincer.util import selfdestruct_tempdir

SMALL_RAYS = (64, 48)


class TestPrimitives(object):

    def test_random_primitive(self, rng):
        shapes = set(random_primitive(rng).shape for _ in range(60))
        assert shapes == set(['box', 'cylinder', 'sphere'])

    def test_rest_on_table(self, rng):
        for _ in range(20):
            placed = rest_on_table(random_primitive(rng), 0.1, -0.05)
            assert abs(placed.lowest_point()[2]) < 1e-12
            assert numpy.allclose(placed.position[:2], [0.1, -0.05])


class TestClutter(object):

    def test_no_overlap(self, rng):
        placed = place_clutter(rng, 10)
        assert len(placed) == 10
        for a, b in itertools.combinations(placed, 2):
            assert not intersects(a, b)
        for primitive in placed:
            assert abs(primitive.lowest_point()[2]) < 1e-12
            assert (numpy.abs(primitive.position[:2]) <= 0.2).all()

    def test_no_room(self, rng):
        with pytest.raises(PlacementError):
            place_clutter(rng, 5, footprint=0.01, retries=50)


class TestScenes(object):

    def test_presets(self):
        single = make_scene('single', 3, rays=SMALL_RAYS)
        assert len(single.primitives) == 1
        assert len(single.cameras) == 2
        clutter = make_scene('clutter', 3, objects=4, rays=SMALL_RAYS)
        assert len(clutter.primitives) == 4
        with pytest.raises(ConfigError):
            make_scene('shelf', 3)

    def test_deterministic(self):
        first = make_scene('clutter', 7, objects=3, rays=SMALL_RAYS)
        second = make_scene('clutter', 7, objects=3, rays=SMALL_RAYS)
        assert first.to_dict() == second.to_dict()
        other = make_scene('clutter', 8, objects=3, rays=SMALL_RAYS)
        assert other.to_dict() != first.to_dict()

    def test_render_scene(self):
        scene = make_scene('single', 1, rays=SMALL_RAYS, noise=0.001)
        views = render_scene(scene, seed=1)
        assert [sorted(view.used_views()) for view in views] == [[0], [1]]
        again = render_scene(scene, seed=1)
        for view, repeat in zip(views, again):
            assert numpy.array_equal(view.points, repeat.points)


class TestCorpus(object):

    def test_make_corpus(self):
        corpus = make_corpus('single', 3, seed=2, rays=SMALL_RAYS)
        assert len(corpus) == 3
        parallel = make_corpus('single', 3, seed=2, rays=SMALL_RAYS, jobs=2)
        for (scene, views), (other, other_views) in zip(corpus, parallel):
            assert scene.to_dict() == other.to_dict()
            assert numpy.array_equal(views[0].points, other_views[0].points)
        assert make_corpus('single', 0) == []

    def test_invalid(self):
        with pytest.raises(ConfigError):
            make_corpus('single', -1)
        with pytest.raises(ConfigError):
            make_corpus('shelf', 1)

    def test_write_load(self):
        corpus = make_corpus('clutter', 2, seed=4, objects=3, rays=SMALL_RAYS)
        with selfdestruct_tempdir() as tmp:
            paths = write_corpus(corpus, tmp)
            assert [os.path.basename(p) for p in paths] == [
                'scene_0000', 'scene_0001']
            assert sorted(os.listdir(paths[0])) == sorted(
                (SCENE_FILE, ) + VIEW_FILES)
            os.makedirs(os.path.join(tmp, 'notes'))
            assert scene_dirs(tmp) == paths
            scene, view_0, view_1 = load_scene_dir(paths[1])
        assert scene.to_dict() == corpus[1][0].to_dict()
        assert sorted(view_1.used_views()) == [1]
        assert numpy.allclose(view_0.points, corpus[1][1][0].points)
        assert numpy.allclose(view_1.origin_of(0), scene.cameras[1].origin)
