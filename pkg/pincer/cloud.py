"""
Point cloud data model, file formats, voxel downsampling, workspace
cropping and exact radius neighborhood queries.

Per-point view provenance is stored as a bitmask of view ids (0 to 63),
so a voxel merging points of several cameras keeps all of them.
"""
import numpy
from scipy.spatial import cKDTree
import simplejson

from pincer.exceptions import (
    CloudError,
    PCDParseError,
    ViewConflictError,
)
from pincer.log import LOGGER
from pincer.util import atomic_write

MAX_VIEWS = 64
NORMAL_TOLERANCE = 1e-6

PCD_REQUIRED = ('FIELDS', 'WIDTH', 'POINTS', 'DATA')
PCD_KNOWN = ('VERSION', 'FIELDS', 'SIZE', 'TYPE', 'COUNT',
             'WIDTH', 'HEIGHT', 'VIEWPOINT', 'POINTS', 'DATA')


def view_bit(view_id):
    return numpy.uint64(1) << numpy.uint64(view_id)


def views_to_masks(view_sets):
    """Convert an iterable of view id collections into bitmasks."""
    masks = numpy.zeros(len(view_sets), dtype=numpy.uint64)
    for i, ids in enumerate(view_sets):
        for view_id in ids:
            masks[i] |= view_bit(int(view_id))
    return masks


def _freeze(array):
    array.flags.writeable = False
    return array


class PointCloud(object):
    """
    An immutable set of points with per-point view provenance, optional
    oriented normals and the camera origin of every view.

    Rows of ``normals`` set to nan mark points without a normal.
    """

    def __init__(self, points, views=None, view_origins=None, normals=None):
        points = numpy.array(points, dtype=numpy.float64).reshape(-1, 3)
        if not numpy.all(numpy.isfinite(points)):
            raise CloudError('Point coordinates must be finite.')

        if views is None:
            views = numpy.full(len(points), view_bit(0), dtype=numpy.uint64)
        else:
            views = numpy.array(views, dtype=numpy.uint64).reshape(-1)
        if len(views) != len(points):
            raise CloudError('Expected one view mask per point.')

        if view_origins is None:
            view_origins = {0: (0.0, 0.0, 0.0)}
        origins = {}
        for view_id, origin in view_origins.items():
            view_id = int(view_id)
            if not 0 <= view_id < MAX_VIEWS:
                raise CloudError('View id %s out of range.' % view_id)
            origin = numpy.array(origin, dtype=numpy.float64).reshape(3)
            if not numpy.all(numpy.isfinite(origin)):
                raise CloudError('View origins must be finite.')
            origins[view_id] = _freeze(origin)

        used = int(numpy.bitwise_or.reduce(views)) if len(views) else 0
        for view_id in range(MAX_VIEWS):
            if used & (1 << view_id) and view_id not in origins:
                raise CloudError('View %s has no origin.' % view_id)
        if len(views) and numpy.any(views == 0):
            raise CloudError('Every point needs at least one view.')

        if normals is not None:
            normals = numpy.array(normals, dtype=numpy.float64).reshape(-1, 3)
            if len(normals) != len(points):
                raise CloudError('Expected one normal per point.')
            valid = numpy.all(numpy.isfinite(normals), axis=1)
            lengths = numpy.linalg.norm(normals[valid], axis=1)
            if numpy.any(numpy.abs(lengths - 1.0) > NORMAL_TOLERANCE):
                raise CloudError('Normals must have unit length.')
            normals[~valid] = numpy.nan
            normals = _freeze(normals)

        self.points = _freeze(points)
        self.views = _freeze(views)
        self.view_origins = origins
        self.normals = normals

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return '{klass}<points:{points}, views:{views}>'.format(
            klass=self.__class__.__name__,
            points=len(self),
            views=sorted(self.used_views()))

    @property
    def has_normals(self):
        return self.normals is not None

    def normal_mask(self):
        """Boolean mask of points carrying a valid normal."""
        if self.normals is None:
            return numpy.zeros(len(self), dtype=bool)
        return numpy.all(numpy.isfinite(self.normals), axis=1)

    def used_views(self):
        if not len(self):
            return set()
        used = int(numpy.bitwise_or.reduce(self.views))
        return set(i for i in range(MAX_VIEWS) if used & (1 << i))

    def view_sets(self):
        return [sorted(i for i in range(MAX_VIEWS) if int(mask) & (1 << i))
                for mask in self.views]

    def first_view(self):
        """The lowest view id of every point."""
        first = numpy.full(len(self), -1, dtype=numpy.int64)
        for view_id in sorted(self.used_views()):
            seen = (self.views & view_bit(view_id)) != 0
            first[(first < 0) & seen] = view_id
        return first

    def origin_of(self, index):
        """Camera origin of the first view that saw point index."""
        mask = int(self.views[index])
        view_id = (mask & -mask).bit_length() - 1
        return self.view_origins[view_id]

    def subset(self, indices):
        indices = numpy.asarray(indices)
        normals = None
        if self.normals is not None:
            normals = self.normals[indices]
        return PointCloud(self.points[indices], self.views[indices],
                          self.view_origins, normals)

    def select_views(self, view_ids):
        """Points seen by any of the given views."""
        wanted = numpy.uint64(0)
        for view_id in view_ids:
            wanted |= view_bit(view_id)
        keep = numpy.flatnonzero((self.views & wanted) != 0)
        selected = self.subset(keep)
        origins = dict((i, o) for i, o in self.view_origins.items()
                       if i in set(view_ids))
        return PointCloud(selected.points, selected.views & wanted,
                          origins, selected.normals)

    def with_normals(self, normals):
        return PointCloud(self.points, self.views, self.view_origins, normals)


class NeighborIndex(object):
    """A KD-tree over an immutable cloud snapshot."""

    def __init__(self, cloud):
        self.cloud = cloud
        self.points = cloud.points
        self._tree = None
        if len(cloud):
            self._tree = cKDTree(self.points)

    def radius_neighbors(self, point, radius):
        """
        Indices of all points within the closed ball of radius around
        point, in ascending order.
        """
        if not radius > 0:
            raise CloudError('Radius must be positive.')
        if self._tree is None:
            return numpy.zeros(0, dtype=numpy.int64)
        point = numpy.asarray(point, dtype=numpy.float64)
        # The tree answers a slightly larger ball, the exact squared
        # distance test then decides the boundary.
        candidates = self._tree.query_ball_point(
            point, radius * (1.0 + 1e-9) + 1e-15)
        candidates = numpy.array(sorted(candidates), dtype=numpy.int64)
        if not len(candidates):
            return candidates
        dist2 = ((self.points[candidates] - point) ** 2).sum(axis=1)
        return candidates[dist2 <= radius * radius]


def radius_neighbors(index, point, radius):
    return index.radius_neighbors(point, radius)


def merge_registered(a, b):
    """
    Concatenate two clouds expressed in a common frame, keeping the
    per-point provenance and the origins of both.
    """
    if not len(b):
        return a
    if not len(a):
        return b
    shared = a.used_views() & b.used_views()
    if shared:
        raise ViewConflictError(
            'Clouds share view ids %s.' % sorted(shared))

    origins = dict(b.view_origins)
    origins.update(a.view_origins)
    normals = None
    if a.has_normals and b.has_normals:
        normals = numpy.vstack([a.normals, b.normals])
    return PointCloud(numpy.vstack([a.points, b.points]),
                      numpy.concatenate([a.views, b.views]),
                      origins, normals)


def voxelize(cloud, leaf, anchor=(0.0, 0.0, 0.0)):
    """
    Replace the points of every occupied voxel by their centroid.

    The grid is anchored at anchor, outputs are ordered by voxel key
    and normals are dropped.
    """
    if not leaf > 0:
        raise CloudError('Voxel leaf size must be positive.')
    if not len(cloud):
        return PointCloud(cloud.points, cloud.views, cloud.view_origins)

    anchor = numpy.asarray(anchor, dtype=numpy.float64)
    keys = numpy.floor((cloud.points - anchor) / leaf).astype(numpy.int64)
    cells, inverse = numpy.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)

    counts = numpy.bincount(inverse, minlength=len(cells)).astype(float)
    centroids = numpy.zeros((len(cells), 3))
    numpy.add.at(centroids, inverse, cloud.points)
    centroids /= counts[:, None]

    # Rounding must not move a centroid out of its own voxel.
    margin = leaf * 1e-9
    lower = anchor + cells * leaf + margin
    upper = anchor + (cells + 1) * leaf - margin
    centroids = numpy.minimum(numpy.maximum(centroids, lower), upper)

    views = numpy.zeros(len(cells), dtype=numpy.uint64)
    numpy.bitwise_or.at(views, inverse, cloud.views)
    return PointCloud(centroids, views, cloud.view_origins)


def crop_workspace(cloud, box_min, box_max):
    """Keep exactly the points inside the closed axis-aligned box."""
    box_min = numpy.asarray(box_min, dtype=numpy.float64)
    box_max = numpy.asarray(box_max, dtype=numpy.float64)
    if numpy.any(box_min > box_max):
        raise CloudError('Workspace minimum exceeds maximum.')
    inside = numpy.all(
        (cloud.points >= box_min) & (cloud.points <= box_max), axis=1)
    return cloud.subset(numpy.flatnonzero(inside))


def _parse_floats(values, lineno):
    try:
        return [float(value) for value in values]
    except ValueError:
        raise PCDParseError('invalid number in %r' % ' '.join(values),
                            lineno=lineno)


def load_pcd(filename, view=None, origin=None, default_origin=(0, 0, 0)):
    """
    Read an ASCII PCD file.

    Points carry the view id of a ``view`` field, otherwise the given
    view (default 0). Origins come from ``# VIEW_ORIGIN id x y z``
    comments, the VIEWPOINT translation or default_origin, in that
    order; an explicit origin overrides all of them.
    """
    header = {}
    origins = {}
    rows = []
    data_line = None
    with open(filename, 'r') as fd:
        for lineno, line in enumerate(fd, 1):
            text = line.strip()
            if data_line is None:
                if not text:
                    continue
                if text.startswith('#'):
                    parts = text[1:].split()
                    if parts and parts[0] == 'VIEW_ORIGIN':
                        if len(parts) != 5:
                            raise PCDParseError(
                                'VIEW_ORIGIN needs an id and 3 values',
                                lineno=lineno)
                        try:
                            view_id = int(parts[1])
                        except ValueError:
                            raise PCDParseError('invalid view id',
                                                lineno=lineno)
                        origins[view_id] = _parse_floats(parts[2:], lineno)
                    continue
                parts = text.split()
                key = parts[0].upper()
                if key not in PCD_KNOWN:
                    raise PCDParseError('unknown header field %s' % parts[0],
                                        lineno=lineno)
                header[key] = (parts[1:], lineno)
                if key == 'DATA':
                    data_line = lineno
                continue
            if not text or text.startswith('#'):
                continue
            rows.append((text.split(), lineno))

    for key in PCD_REQUIRED:
        if key not in header:
            raise PCDParseError('missing header field %s' % key)

    data, lineno = header['DATA']
    if data != ['ascii']:
        raise PCDParseError('only DATA ascii is supported', lineno=lineno)

    fields, lineno = header['FIELDS']
    fields = [field.lower() for field in fields]
    counts = [1] * len(fields)
    if 'COUNT' in header:
        values, lineno = header['COUNT']
        try:
            counts = [int(value) for value in values]
        except ValueError:
            raise PCDParseError('invalid COUNT', lineno=lineno)
    for key in ('SIZE', 'TYPE', 'COUNT'):
        if key in header and len(header[key][0]) != len(fields):
            raise PCDParseError('%s does not match FIELDS' % key,
                                lineno=header[key][1])
    for axis in ('x', 'y', 'z'):
        if axis not in fields:
            raise PCDParseError('FIELDS lacks %s' % axis,
                                lineno=header['FIELDS'][1])

    columns = {}
    offset = 0
    for field, count in zip(fields, counts):
        columns[field] = offset
        offset += count

    try:
        declared = int(header['POINTS'][0][0])
        width = int(header['WIDTH'][0][0])
        height = int(header.get('HEIGHT', (['1'], None))[0][0])
    except (IndexError, ValueError):
        raise PCDParseError('invalid POINTS, WIDTH or HEIGHT')
    if width * height != declared:
        raise PCDParseError('WIDTH * HEIGHT does not match POINTS',
                            lineno=header['POINTS'][1])
    if len(rows) != declared:
        raise PCDParseError(
            'header declares %s points, found %s' % (declared, len(rows)),
            lineno=rows[-1][1] if rows else data_line)

    points = numpy.zeros((len(rows), 3))
    view_ids = numpy.zeros(len(rows), dtype=numpy.int64)
    for i, (values, lineno) in enumerate(rows):
        if len(values) != offset:
            raise PCDParseError('expected %s values, found %s' % (
                offset, len(values)), lineno=lineno)
        numbers = _parse_floats(values, lineno)
        points[i] = [numbers[columns[axis]] for axis in ('x', 'y', 'z')]
        if 'view' in columns:
            value = numbers[columns['view']]
            if value != int(value) or not 0 <= value < MAX_VIEWS:
                raise PCDParseError('invalid view id', lineno=lineno)
            view_ids[i] = int(value)
        elif view is not None:
            view_ids[i] = view

    if not numpy.all(numpy.isfinite(points)):
        raise PCDParseError('non-finite coordinates')

    fallback = default_origin
    if 'VIEWPOINT' in header:
        values, lineno = header['VIEWPOINT']
        if len(values) != 7:
            raise PCDParseError('VIEWPOINT needs 7 values', lineno=lineno)
        fallback = _parse_floats(values, lineno)[:3]

    ids = set(int(i) for i in view_ids) or set([view or 0])
    view_origins = {}
    for view_id in ids:
        if origin is not None:
            view_origins[view_id] = origin
        else:
            view_origins[view_id] = origins.get(view_id, fallback)

    masks = numpy.array([view_bit(i) for i in view_ids], dtype=numpy.uint64)
    cloud = PointCloud(points, masks, view_origins)
    LOGGER.debug('Loaded %s points from %s', len(cloud), filename)
    return cloud


def _format(value):
    return '%.17g' % value


def write_pcd(cloud, filename):
    """
    Write an ASCII PCD file. Points seen by several views are written
    with their lowest view id; the view field is left out when every
    point belongs to view 0.
    """
    used = sorted(cloud.used_views()) or sorted(cloud.view_origins)[:1]
    multi = used != [0]
    fields = ['x', 'y', 'z'] + (['view'] if multi else [])
    viewpoint = cloud.view_origins.get(used[0], (0.0, 0.0, 0.0)) \
        if used else (0.0, 0.0, 0.0)

    lines = ['# .PCD v0.7 - Point Cloud Data file format']
    for view_id in sorted(cloud.view_origins):
        origin = cloud.view_origins[view_id]
        lines.append('# VIEW_ORIGIN %s %s' % (
            view_id, ' '.join(_format(v) for v in origin)))
    lines.extend([
        'VERSION 0.7',
        'FIELDS %s' % ' '.join(fields),
        'SIZE %s' % ' '.join(['8', '8', '8'] + (['4'] if multi else [])),
        'TYPE %s' % ' '.join(['F', 'F', 'F'] + (['U'] if multi else [])),
        'COUNT %s' % ' '.join(['1'] * len(fields)),
        'WIDTH %s' % len(cloud),
        'HEIGHT 1',
        'VIEWPOINT %s 1 0 0 0' % ' '.join(_format(v) for v in viewpoint),
        'POINTS %s' % len(cloud),
        'DATA ascii',
    ])
    first = cloud.first_view()
    for point, view_id in zip(cloud.points, first):
        values = [_format(v) for v in point]
        if multi:
            values.append(str(int(view_id)))
        lines.append(' '.join(values))

    with atomic_write(filename, 'w') as fd:
        fd.write('\n'.join(lines) + '\n')


def cloud_to_records(cloud):
    records = []
    valid = cloud.normal_mask()
    for i, (point, views) in enumerate(zip(cloud.points, cloud.view_sets())):
        record = {
            'x': float(point[0]),
            'y': float(point[1]),
            'z': float(point[2]),
            'views': views,
        }
        if valid[i]:
            record['nx'], record['ny'], record['nz'] = [
                float(v) for v in cloud.normals[i]]
        records.append(record)
    return records


def write_jsonl(cloud, filename):
    """Write the JSON Lines interchange form of a cloud."""
    header = {'view_origins': dict(
        (str(i), [float(v) for v in o])
        for i, o in sorted(cloud.view_origins.items()))}
    with atomic_write(filename, 'w') as fd:
        fd.write(simplejson.dumps(header, sort_keys=True) + '\n')
        for record in cloud_to_records(cloud):
            fd.write(simplejson.dumps(record, sort_keys=True) + '\n')


def load_jsonl(filename):
    origins = None
    points = []
    view_sets = []
    normals = []
    with open(filename, 'r') as fd:
        for lineno, line in enumerate(fd, 1):
            if not line.strip():
                continue
            try:
                record = simplejson.loads(line)
            except ValueError as exc:
                raise CloudError('line %s: %s' % (lineno, exc))
            if 'view_origins' in record:
                origins = dict((int(k), v)
                               for k, v in record['view_origins'].items())
                continue
            try:
                points.append([record['x'], record['y'], record['z']])
                view_sets.append(record.get('views', [0]))
                normals.append([record.get('nx', numpy.nan),
                                record.get('ny', numpy.nan),
                                record.get('nz', numpy.nan)])
            except KeyError as exc:
                raise CloudError('line %s: missing %s' % (lineno, exc))
    has_normals = any(numpy.isfinite(n[0]) for n in normals)
    return PointCloud(points, views_to_masks(view_sets), origins,
                      normals if has_normals else None)
