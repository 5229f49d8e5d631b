"""
Ground truth for synthetic scenes: does a hand form an antipodal grasp?

The hand must be collision free. Both fingers then close along the
closing direction, sweeping their inner faces through the finger slab,
the prism of the finger length and thickness around the closing region.
The first contact of each finger is the extreme point of a primitive
cut by that slab, found exactly per primitive. The grasp is antipodal
when both first contacts lie on the same object at least the closed
aperture apart, and some pair of contact points has its connecting line
inside both friction cones and within the cone angle of the closing
direction.

A primitive meeting the slab between collision free fingers lies
entirely between them, as does the table for a hand above it, so the
table is never a contact.
"""
import math

import numpy

from pincer import constants
from pincer.exceptions import ConfigError
from pincer.hand import (
    HandHypothesis,
    HandPose,
)
from pincer.synth.collide import hand_collides

# contacts within this distance along the closing direction are
# simultaneous
CONTACT_TOLERANCE = 1e-9


def hand_from_pose(pose, params, source_point=-1):
    """Wrap a pose or a (rotation, position) pair into a hypothesis."""
    if not isinstance(pose, HandPose):
        pose = HandPose(*pose)
    return HandHypothesis(pose, params, source_point=source_point)


def finger_slab(hand):
    """
    The four half-spaces ``n . x <= o`` bounding the finger slab.

    :returns: (normals, offsets)
    """
    params = hand.params
    approach, axis = hand.pose.approach, hand.pose.axis
    normals = numpy.array([approach, -approach, axis, -axis])
    half = numpy.array([params.finger_length, params.finger_length,
                        params.finger_thickness,
                        params.finger_thickness]) / 2.0
    return normals, normals.dot(hand.position) + half


def slab_extent(primitive, hand):
    """
    The lowest and highest closing offsets of a primitive inside the
    finger slab, each with the points attaining it.

    :returns: ((low, points), (high, points)) or None when the primitive
              misses the slab
    """
    closing = hand.pose.closing
    normals, offsets = finger_slab(hand)
    result = []
    for sign in (1.0, -1.0):
        points = primitive.extreme_points(sign * closing, normals, offsets)
        if not len(points):
            return None
        values = (points - hand.position).dot(closing)
        best = values.min() if sign > 0 else values.max()
        keep = numpy.abs(values - best) <= CONTACT_TOLERANCE
        result.append((float(best), points[keep]))
    return tuple(result)


def finger_contacts(scene, hand):
    """
    First contacts of the left finger (closing towards +closing) and the
    right finger.

    :returns: two lists of (offset, primitive index, points), holding
              every primitive touched first, empty without contact
    """
    half = hand.params.open_aperture / 2.0
    reach = hand.params.region_radius
    left, right = [], []
    for index, primitive in enumerate(scene.primitives):
        distance = numpy.linalg.norm(primitive.position - hand.position)
        if distance > reach + primitive.bounding_radius:
            continue
        extent = slab_extent(primitive, hand)
        if extent is None:
            continue
        (low, low_points), (high, high_points) = extent
        if low < -half - CONTACT_TOLERANCE or high > half + CONTACT_TOLERANCE:
            # beyond a finger
            continue
        left.append((low, index, low_points))
        right.append((high, index, high_points))

    if left:
        first = min(offset for offset, _, _ in left)
        left = [c for c in left if c[0] <= first + CONTACT_TOLERANCE]
        first = max(offset for offset, _, _ in right)
        right = [c for c in right if c[0] >= first - CONTACT_TOLERANCE]
    return left, right


def _contact_patch(primitive, points):
    # the patch centroid decides the face of a box edge or vertex contact
    centroid = points.mean(axis=0)
    push = -primitive.normals(centroid)[0]
    return numpy.vstack([points, centroid]), push


def oracle_antipodal(scene, hand, mu=constants.FRICTION):
    """
    True iff closing the hand forms an antipodal contact pair.

    :raises: :exc:`~pincer.exceptions.ConfigError` if mu is not positive
    """
    if not mu > 0:
        raise ConfigError('Friction coefficient must be positive.')
    if hand_collides(scene, hand):
        return False

    left, right = finger_contacts(scene, hand)
    if not (left and right):
        return False
    owners = set(index for _, index, _ in left + right)
    if len(owners) != 1:
        return False
    gap = right[0][0] - left[0][0]
    if gap < hand.params.closed_aperture - CONTACT_TOLERANCE:
        return False

    primitive = scene.primitives[owners.pop()]
    left, push_left = _contact_patch(primitive, left[0][2])
    right, push_right = _contact_patch(primitive, right[0][2])

    lines = right[None, :, :] - left[:, None, :]
    lengths = numpy.linalg.norm(lines, axis=2)
    lines = lines / numpy.where(lengths > 0, lengths, 1.0)[:, :, None]

    # inward normals are the directions the fingers push into the surface
    cosine = math.cos(math.atan(mu)) - 1e-12
    aligned = lines.dot(hand.pose.closing) >= cosine
    in_left = lines.dot(push_left) >= cosine
    in_right = -lines.dot(push_right) >= cosine
    return bool(numpy.any(aligned & in_left & in_right & (lengths > 0)))
