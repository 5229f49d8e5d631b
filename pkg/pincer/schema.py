"""
Colander schemas for every configuration section, plus the mixins tying
configuration classes to their schema.

Every field has a default, so an empty mapping validates into the
default configuration.
"""
import math

import colander

from pincer import constants
from pincer.exceptions import ConfigError


class BoundedFloat(colander.Float):
    """
    A type representing a float, which does not allow
    +/-nan and +/-inf but returns `colander.null` instead.
    """

    def deserialize(self, schema, cstruct):
        value = super(BoundedFloat, self).deserialize(schema, cstruct)
        if (value is colander.null or (
                isinstance(value, float) and
                (math.isnan(value) or math.isinf(value)))):
            return colander.null
        return value


class ValidatorNode(colander.SchemaNode):
    """
    A ValidatorNode is a schema node which defines validator as a callable
    method, so all subclasses can rely on calling it via super().
    """

    def validator(self, node, cstruct):
        pass


class PositiveNode(ValidatorNode):
    """A number strictly greater than zero."""

    def validator(self, node, cstruct):
        super(PositiveNode, self).validator(node, cstruct)
        if not cstruct > 0:
            raise colander.Invalid(node, '%r is not positive' % cstruct)


class CountNode(ValidatorNode):
    """An integer of at least one."""

    schema_type = colander.Integer

    def validator(self, node, cstruct):
        super(CountNode, self).validator(node, cstruct)
        if cstruct < 1:
            raise colander.Invalid(node, '%r is below one' % cstruct)


class VectorNode(colander.SchemaNode):
    """A 3-vector of finite floats."""

    def __init__(self, *args, **kw):
        super(VectorNode, self).__init__(colander.Tuple(), *args, **kw)
        for name in ('x', 'y', 'z'):
            self.add(colander.SchemaNode(BoundedFloat(), name=name))

    def deserialize(self, cstruct=colander.null):
        value = super(VectorNode, self).deserialize(cstruct)
        if value is colander.null or value is self.missing:
            return value
        return tuple(float(v) for v in value)


def _positive(default):
    return PositiveNode(BoundedFloat(), missing=default)


class HandParamsSchema(colander.MappingSchema):

    finger_length = _positive(constants.FINGER_LENGTH)
    finger_width = _positive(constants.FINGER_WIDTH)
    open_aperture = _positive(constants.OPEN_APERTURE)
    closed_aperture = _positive(constants.CLOSED_APERTURE)
    finger_thickness = _positive(constants.FINGER_THICKNESS)
    slab = _positive(None)

    def validator(self, node, cstruct):
        if not cstruct['closed_aperture'] < cstruct['open_aperture']:
            raise colander.Invalid(
                node, 'closed_aperture must be below open_aperture')


class SamplerSchema(colander.MappingSchema):

    n_samples = CountNode(missing=constants.SAMPLE_COUNT)
    n_orientations = CountNode(missing=constants.ORIENTATION_COUNT)
    n_positions = CountNode(missing=constants.POSITION_COUNT)
    ball_radius = _positive(constants.BALL_RADIUS)
    seed = colander.SchemaNode(colander.Integer(), missing=0)


class LabelerSchema(colander.MappingSchema):

    k = CountNode(missing=constants.LABEL_MIN_POINTS)
    angle = colander.SchemaNode(
        BoundedFloat(), missing=math.degrees(constants.LABEL_ANGLE),
        validator=colander.Range(min=0.0, max=90.0))
    negative_rule = colander.SchemaNode(
        colander.String(), missing='max',
        validator=colander.OneOf(['max', 'sum']))
    normal_radius = _positive(constants.BALL_RADIUS)
    balance = colander.SchemaNode(colander.Boolean(), missing=False)


class FeatureSchema(colander.MappingSchema):

    occupancy = colander.SchemaNode(colander.Boolean(), missing=False)


class SvmSchema(colander.MappingSchema):

    C = _positive(constants.SVM_C)
    gamma = _positive(None)
    coef0 = colander.SchemaNode(
        BoundedFloat(), missing=constants.SVM_COEF0,
        validator=colander.Range(min=0.0))
    tol = _positive(constants.SVM_TOLERANCE)
    class_weight = colander.SchemaNode(
        colander.String(), missing='none',
        validator=colander.OneOf(['none', 'balanced']))
    max_iterations = CountNode(missing=constants.SVM_MAX_ITERATIONS)


class SelectionSchema(colander.MappingSchema):

    distance = _positive(constants.CLUSTER_DISTANCE)
    angle = colander.SchemaNode(
        BoundedFloat(), missing=math.degrees(constants.CLUSTER_ANGLE),
        validator=colander.Range(min=0.0, max=180.0))
    min_size = CountNode(missing=constants.CLUSTER_MIN_SIZE)
    reference = VectorNode(missing=(0.0, 0.0, 0.0))
    up = VectorNode(missing=constants.UP)


class WorkspaceSchema(colander.MappingSchema):

    min = VectorNode(missing=constants.WORKSPACE[0])
    max = VectorNode(missing=constants.WORKSPACE[1])
    voxel = _positive(constants.VOXEL_SIZE)

    def validator(self, node, cstruct):
        if any(a > b for a, b in zip(cstruct['min'], cstruct['max'])):
            raise colander.Invalid(node, 'workspace min exceeds max')


class SynthSchema(colander.MappingSchema):

    rays_h = CountNode(missing=constants.CAMERA_RAYS[0])
    rays_v = CountNode(missing=constants.CAMERA_RAYS[1])
    noise = colander.SchemaNode(
        BoundedFloat(), missing=constants.CAMERA_NOISE,
        validator=colander.Range(min=0.0))
    friction = _positive(constants.FRICTION)


class PipelineSchema(colander.MappingSchema):

    hand = HandParamsSchema()
    sampler = SamplerSchema()
    labeler = LabelerSchema()
    features = FeatureSchema()
    svm = SvmSchema()
    selection = SelectionSchema()
    workspace = WorkspaceSchema()
    synth = SynthSchema()
    seed = colander.SchemaNode(colander.Integer(), missing=0)

    SECTIONS = ('hand', 'sampler', 'labeler', 'features', 'svm',
                'selection', 'workspace', 'synth')

    def deserialize(self, cstruct=colander.null):
        if cstruct is colander.null:
            cstruct = {}
        cstruct = dict(cstruct)
        for section in self.SECTIONS:
            if cstruct.get(section) is None:
                cstruct[section] = {}
        return super(PipelineSchema, self).deserialize(cstruct)


def invalid_message(exc):
    return '; '.join('%s: %s' % (key or 'config', value)
                     for key, value in sorted(exc.asdict().items()))


class ValidationMixin(object):
    """
    A mixin to tie a class and its valid colander schema together.
    """

    _valid_schema = None

    @classmethod
    def validate(cls, entry, _raise_invalid=False, **kw):
        """
        Returns a validated copy of the passed in entry dictionary,
        based on the classes _valid_schema, otherwise returns None.

        :raises: :exc:`~pincer.exceptions.ConfigError` if _raise_invalid
        """
        try:
            validated = cls._valid_schema.deserialize(entry, **kw)
        except colander.Invalid as exc:
            if _raise_invalid:
                raise ConfigError(invalid_message(exc))
            validated = None
        return validated


class CreationMixin(ValidationMixin):
    """
    A mixin with a custom create constructor that validates the
    keyword arguments before creating an instance of the class.
    """

    @classmethod
    def create(cls, _raise_invalid=False, **kw):
        """
        Returns an instance of this class, if the passed in keyword
        arguments passed schema validation, otherwise returns None.
        """
        validated = cls.validate(kw, _raise_invalid=_raise_invalid)
        if validated is None:
            return None
        return cls(**validated)
