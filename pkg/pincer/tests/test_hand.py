import os.path

import numpy
import pytest
from scipy.spatial.transform import Rotation

from pincer.conftest import TOP_DOWN
from pincer.exceptions import (
    ConfigError,
    PoseError,
)
from pincer.hand import (
    BACK_PLATE,
    CLOSING_REGION,
    LEFT_FINGER,
    OUTSIDE,
    RIGHT_FINGER,
    HandParams,
    HandPose,
    body_collides,
    classify_points,
    closing_plane_points,
    closing_region_contains,
    hypothesis_from_dict,
    hypothesis_to_dict,
)
from pincer.tests.factories import (
    HandFactory,
    HandParamsFactory,
)
from pincer.util import selfdestruct_tempdir


class TestHandParams(object):

    def test_defaults(self):
        params = HandParams()
        assert params.finger_length == 0.06
        assert params.open_aperture == 0.07
        assert params.closed_aperture == 0.03
        assert params.slab == params.finger_thickness

    def test_non_positive(self):
        with pytest.raises(ConfigError):
            HandParams(finger_width=0.0)

    def test_aperture_order(self):
        with pytest.raises(ConfigError):
            HandParams(open_aperture=0.03, closed_aperture=0.03)

    def test_from_dict_strings(self):
        params = HandParams.from_dict({'finger_length': '0.05'})
        assert params.finger_length == 0.05
        assert params.open_aperture == 0.07

    def test_from_dict_invalid(self):
        with pytest.raises(ConfigError):
            HandParams.from_dict({'finger_length': '-1'})
        with pytest.raises(ConfigError):
            HandParams.from_dict({'closed_aperture': 0.08})

    def test_load_key_value(self):
        with selfdestruct_tempdir() as tmp:
            path = os.path.join(tmp, 'hand.cfg')
            with open(path, 'w') as fd:
                fd.write('# small gripper\nfinger_length = 0.04\n'
                         'open_aperture=0.05  # meters\n')
            params = HandParams.load(path)
        assert params.finger_length == 0.04
        assert params.open_aperture == 0.05

    def test_load_json(self):
        with selfdestruct_tempdir() as tmp:
            path = os.path.join(tmp, 'hand.json')
            with open(path, 'w') as fd:
                fd.write('{"finger_width": 0.02}')
            params = HandParams.load(path)
        assert params.finger_width == 0.02

    def test_load_malformed(self):
        with selfdestruct_tempdir() as tmp:
            path = os.path.join(tmp, 'hand.cfg')
            with open(path, 'w') as fd:
                fd.write('finger_length 0.04\n')
            with pytest.raises(ConfigError):
                HandParams.load(path)

    def test_equality(self):
        assert HandParamsFactory() == HandParams()
        assert HandParamsFactory(finger_width=0.02) != HandParams()

    def test_radii(self, rng):
        params = HandParams()
        hand = HandFactory(params=params)
        points = rng.uniform(-0.1, 0.1, (20000, 3))
        codes = classify_points(hand, points)
        distances = numpy.linalg.norm(points, axis=1)
        assert distances[codes >= LEFT_FINGER].max() <= params.body_radius
        assert (distances[codes == CLOSING_REGION].max() <=
                params.region_radius)


class TestHandPose(object):

    def test_columns(self):
        pose = HandPose(TOP_DOWN, (1.0, 2.0, 3.0))
        assert pose.approach.tolist() == [0.0, 0.0, -1.0]
        assert pose.closing.tolist() == [0.0, 1.0, 0.0]
        assert pose.axis.tolist() == [1.0, 0.0, 0.0]

    def test_reflection(self):
        with pytest.raises(PoseError):
            HandPose(numpy.diag([1.0, 1.0, -1.0]), numpy.zeros(3))

    def test_not_orthonormal(self):
        with pytest.raises(PoseError):
            HandPose(numpy.eye(3) * 1.1, numpy.zeros(3))

    def test_non_finite_position(self):
        with pytest.raises(PoseError):
            HandPose(numpy.eye(3), (0.0, numpy.inf, 0.0))


class TestVolumes(object):

    def test_identity_pose(self, hand_params):
        hand = HandFactory(params=hand_params)
        half_l = hand_params.finger_length / 2.0
        half_d = hand_params.open_aperture / 2.0
        width = hand_params.finger_width
        points = [
            (0.0, 0.0, 0.0),
            (half_l, 0.0, 0.0),
            (-half_l, 0.0, 0.0),
            (0.0, half_d + width / 2.0, 0.0),
            (0.0, -half_d - width / 2.0, 0.0),
            (-half_l - width / 2.0, 0.0, 0.0),
            (0.0, 0.0, hand_params.finger_thickness),
            (half_l + 0.001, 0.0, 0.0),
        ]
        codes = classify_points(hand, points).tolist()
        assert codes == [CLOSING_REGION, CLOSING_REGION, BACK_PLATE,
                         RIGHT_FINGER, LEFT_FINGER, BACK_PLATE, OUTSIDE,
                         OUTSIDE]

    def test_volumes_disjoint(self, hand_params, rng):
        hand = HandFactory(params=hand_params)
        points = rng.uniform(-0.06, 0.06, (20000, 3))
        local = hand.local(points)
        u, v, w = local.T
        half_l = hand_params.finger_length / 2.0
        half_d = hand_params.open_aperture / 2.0
        half_t = hand_params.finger_thickness / 2.0
        width = hand_params.finger_width
        slab = numpy.abs(w) <= half_t
        along = (u > -half_l) & (u <= half_l)
        masks = [
            slab & along & (numpy.abs(v) < half_d),
            slab & along & (v <= -half_d) & (v >= -half_d - width),
            slab & along & (v >= half_d) & (v <= half_d + width),
            slab & (u >= -half_l - width) & (u <= -half_l) &
            (numpy.abs(v) <= half_d + width),
        ]
        assert (numpy.sum(masks, axis=0) <= 1).all()
        codes = classify_points(hand, points)
        for code, mask in zip((CLOSING_REGION, LEFT_FINGER, RIGHT_FINGER,
                               BACK_PLATE), masks):
            assert numpy.array_equal(codes == code, mask)

    def test_rigid_invariance(self, hand_params, rng):
        hand = HandFactory(params=hand_params)
        points = rng.uniform(-0.06, 0.06, (5000, 3))
        rotation = Rotation.random(random_state=7).as_matrix()
        translation = numpy.array([0.3, -0.2, 0.5])
        moved = hand.transformed(rotation, translation)
        moved_points = points.dot(rotation.T) + translation
        assert numpy.array_equal(classify_points(hand, points),
                                 classify_points(moved, moved_points))

    def test_body_collides(self, hand_params):
        hand = HandFactory(params=hand_params, pose__rotation=TOP_DOWN,
                           pose__position=(0.0, 0.0, 0.1))
        assert not body_collides(hand, numpy.zeros((0, 3)))
        assert not body_collides(hand, [(0.0, 0.0, 0.1)])
        # inside the right finger, which sits at +y
        assert body_collides(hand, [(0.0, 0.04, 0.1)])
        # the back plate sits above r(h) for a top down hand
        assert body_collides(hand, [(0.0, 0.0, 0.135)])

    def test_closing_region_contains(self, hand_params):
        hand = HandFactory(params=hand_params)
        assert closing_region_contains(hand, (0.0, 0.0, 0.0))
        assert not closing_region_contains(hand, (0.0, 0.04, 0.0))

    def test_closing_plane(self, hand_params):
        hand = HandFactory(params=hand_params)
        points = [(0.0, 0.0, 0.0), (0.0, 0.0, 0.004), (0.01, 0.01, 0.0),
                  (0.0, 0.04, 0.0)]
        assert closing_plane_points(hand, points).tolist() == [0, 1, 2]
        assert closing_plane_points(hand, points, slab=0.002).tolist() == [
            0, 2]
        assert len(closing_plane_points(hand, numpy.zeros((0, 3)))) == 0

    def test_closing_plane_invalid_slab(self, hand_params):
        hand = HandFactory(params=hand_params)
        with pytest.raises(ConfigError):
            closing_plane_points(hand, [(0.0, 0.0, 0.0)], slab=0.0)


class TestHypothesisRecords(object):

    def test_dict(self, hand_params):
        hand = HandFactory(params=hand_params, pose__rotation=TOP_DOWN,
                           pose__position=(0.1, 0.2, 0.3),
                           grid_cell=(2, 5), pushed_offset=-0.01)
        data = hypothesis_to_dict(hand)
        assert data['grid_cell'] == [2, 5]
        assert len(data['rotation']) == 9
        loaded = hypothesis_from_dict(data)
        assert numpy.array_equal(loaded.rotation, hand.rotation)
        assert numpy.array_equal(loaded.position, hand.position)
        assert loaded.params == hand.params
        assert loaded.grid_cell == (2, 5)
        assert loaded.pushed_offset == -0.01
        assert loaded.source_point == hand.source_point
