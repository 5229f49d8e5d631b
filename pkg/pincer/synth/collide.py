"""
Exact collision tests between convex solids given by support mappings.

Intersection is decided with the GJK distance iteration on the
Minkowski difference; the table is a half-space and only needs the
support point of a solid towards it.
"""
import itertools

import numpy

from pincer.synth.scene import Box

MAX_ITERATIONS = 64
TOLERANCE = 1e-10


def hand_boxes(hand):
    """The left finger, right finger and back plate of a hand as boxes."""
    params = hand.params
    length = params.finger_length
    width = params.finger_width
    half_d = params.open_aperture / 2.0
    thickness = params.finger_thickness
    local = [
        ((0.0, -half_d - width / 2.0, 0.0), (length, width, thickness)),
        ((0.0, half_d + width / 2.0, 0.0), (length, width, thickness)),
        ((-length / 2.0 - width / 2.0, 0.0, 0.0),
         (width, params.open_aperture + 2.0 * width, thickness)),
    ]
    rotation = hand.rotation
    boxes = []
    for center, size in local:
        boxes.append(Box(size, rotation=rotation,
                         position=hand.position + rotation.dot(center)))
    return boxes


def _support(a, b, direction):
    return a.support(direction) - b.support(-direction)


def closest_on_simplex(simplex):
    """
    The point of the simplex hull closest to the origin and the smallest
    sub-simplex containing it.
    """
    best = None
    for size in range(1, len(simplex) + 1):
        for subset in itertools.combinations(range(len(simplex)), size):
            points = numpy.array([simplex[i] for i in subset])
            if size == 1:
                weights = numpy.ones(1)
            else:
                edges = (points[1:] - points[0]).T
                mu = numpy.linalg.lstsq(edges, -points[0], rcond=None)[0]
                weights = numpy.concatenate([[1.0 - mu.sum()], mu])
                if numpy.any(weights < -1e-12):
                    continue
            point = weights.dot(points)
            distance = point.dot(point)
            if best is None or distance < best[0] - 1e-18:
                best = (distance, point, [simplex[i] for i in subset])
    return best[1], best[2]


def intersects(a, b):
    """True iff the convex solids a and b share a point."""
    direction = b.position - a.position
    if not numpy.linalg.norm(direction) > 0:
        direction = numpy.array([1.0, 0.0, 0.0])
    closest = _support(a, b, direction)
    simplex = [closest]
    for _ in range(MAX_ITERATIONS):
        length2 = closest.dot(closest)
        if length2 <= TOLERANCE ** 2:
            return True
        point = _support(a, b, -closest)
        if closest.dot(point) > 0:
            # -closest separates the origin from the difference
            return False
        if length2 - closest.dot(point) <= 1e-12 * max(length2, 1e-12):
            return False
        simplex.append(point)
        closest, simplex = closest_on_simplex(simplex)
    return closest.dot(closest) <= TOLERANCE ** 2


def below_table(scene, solid):
    """True iff part of the solid lies strictly below the table plane."""
    if scene.table_height is None:
        return False
    lowest = solid.support(-scene.table_normal)
    return bool(scene.table_offset(lowest)[0] < -TOLERANCE)


def hand_collides(scene, hand):
    """True iff the hand body meets a primitive or dips into the table."""
    reach = hand.params.body_radius
    nearby = [primitive for primitive in scene.primitives
              if numpy.linalg.norm(primitive.position - hand.position) <=
              reach + primitive.bounding_radius]
    for box in hand_boxes(hand):
        if below_table(scene, box):
            return True
        for primitive in nearby:
            if intersects(box, primitive):
                return True
    return False
