#!/usr/bin/env python3
"""
Validation Schemas for the surfactant simulator
Defines Marshmallow schemas for the JSON run configuration
"""

from typing import Dict, Any

from marshmallow import (
    RAISE,
    Schema,
    ValidationError,
    fields,
    post_load,
    validate,
    validates,
    validates_schema,
)

from ..models.run_config import (
    OUTPUT_FORMATS,
    DiagnosticsConfig,
    OutputConfig,
    RunConfig,
    SteppingConfig,
)
from ..numerics.dynamics import SCHEMES, U0_MODES, InitialDataSpec
from ..numerics.spectral import DEALIAS_RULES, GridSpec
from ..numerics.tension import TENSION_KINDS, TensionModel

SCHEMA_VERSION = 1

POSITIVE = validate.Range(min=0.0, min_inclusive=False, error="Must be strictly positive")


class StrictSchema(Schema):
    """Unknown keys are a hard error"""

    class Meta:
        unknown = RAISE


class GridSchema(StrictSchema):
    """Periodic box and resolution"""

    L1 = fields.Float(required=True, validate=POSITIVE,
                      error_messages={'required': 'L1 is required'})
    L2 = fields.Float(required=True, validate=POSITIVE,
                      error_messages={'required': 'L2 is required'})
    b = fields.Float(required=True, validate=POSITIVE,
                     error_messages={'required': 'Depth b is required'})
    N1 = fields.Int(required=True, strict=True,
                    error_messages={'required': 'N1 is required', 'invalid': 'N1 must be an integer'})
    N2 = fields.Int(required=True, strict=True,
                    error_messages={'required': 'N2 is required', 'invalid': 'N2 must be an integer'})
    Nz = fields.Int(required=True, strict=True,
                    validate=validate.Range(min=8, error="Nz must be at least 8"),
                    error_messages={'required': 'Nz is required'})
    dealias_rule = fields.Str(load_default='two_thirds',
                              validate=validate.OneOf(DEALIAS_RULES))

    @validates('N1')
    def validate_n1(self, value, **kwargs):
        if value < 8 or value % 2:
            raise ValidationError('N1 must be an even integer >= 8')

    @validates('N2')
    def validate_n2(self, value, **kwargs):
        if value < 8 or value % 2:
            raise ValidationError('N2 must be an even integer >= 8')

    @post_load
    def make_grid(self, data, **kwargs):
        return GridSpec(**data)


class TensionSchema(StrictSchema):
    """Constitutive law sigma(c)"""

    kind = fields.Str(required=True, validate=validate.OneOf(TENSION_KINDS),
                      error_messages={'required': 'Tension kind is required'})
    sigma_s = fields.Float(validate=POSITIVE)
    beta = fields.Float(validate=POSITIVE)
    table_x = fields.List(fields.Float())
    table_sigma = fields.List(fields.Float(validate=POSITIVE))

    @validates_schema
    def validate_kind_params(self, data, **kwargs):
        if data['kind'] == 'tabulated':
            if 'table_x' not in data or 'table_sigma' not in data:
                raise ValidationError('Tabulated tension needs table_x and table_sigma')
            if {'sigma_s', 'beta'} & set(data):
                raise ValidationError('sigma_s and beta do not apply to tabulated tension')
        else:
            if 'sigma_s' not in data or 'beta' not in data:
                raise ValidationError(f"{data['kind']} tension needs sigma_s and beta")
            if {'table_x', 'table_sigma'} & set(data):
                raise ValidationError(f"tables do not apply to {data['kind']} tension")

    @post_load
    def make_model(self, data, **kwargs):
        try:
            return TensionModel(
                kind=data['kind'],
                sigma_s=data.get('sigma_s', 1.0),
                beta=data.get('beta', 0.25),
                table_x=tuple(data.get('table_x', ())),
                table_sigma=tuple(data.get('table_sigma', ())),
            )
        except ValueError as e:
            raise ValidationError(str(e)) from e


class PhysicsSchema(StrictSchema):
    gamma = fields.Float(required=True, validate=POSITIVE,
                         error_messages={'required': 'Surface diffusivity gamma is required'})
    tension = fields.Nested(TensionSchema, required=True)


class ModeSchema(StrictSchema):
    """amplitude * cos(2 pi (n1 x1 / L1 + n2 x2 / L2) + phase)"""

    amplitude = fields.Float(required=True)
    phase = fields.Float(load_default=0.0)
    n1 = fields.Int(required=True, strict=True)
    n2 = fields.Int(required=True, strict=True)

    @validates_schema
    def validate_not_mean(self, data, **kwargs):
        if data['n1'] == 0 and data['n2'] == 0:
            raise ValidationError('Mode (0, 0) is not allowed; the mean is fixed separately')

    @post_load
    def make_tuple(self, data, **kwargs):
        return (data['amplitude'], data['phase'], data['n1'], data['n2'])


class RandomSurfaceSchema(StrictSchema):
    seed = fields.Int(strict=True)
    slope = fields.Float(required=True,
                         validate=validate.Range(min=0.0, max=1.0, min_inclusive=False, max_inclusive=False))
    max_mode = fields.Int(required=True, strict=True, validate=validate.Range(min=1))


class SurfaceSchema(StrictSchema):
    modes = fields.List(fields.Nested(ModeSchema), load_default=list)
    random = fields.Nested(RandomSurfaceSchema, allow_none=True, load_default=None)


class ConcentrationSchema(StrictSchema):
    kind = fields.Str(load_default='uniform', validate=validate.OneOf(('uniform', 'modes')))
    value = fields.Float(required=True, validate=POSITIVE,
                         error_messages={'required': 'Concentration value is required'})
    modes = fields.List(fields.Nested(ModeSchema), load_default=list)

    @validates_schema
    def validate_modes(self, data, **kwargs):
        if data['kind'] == 'modes' and not data['modes']:
            raise ValidationError("kind 'modes' needs at least one mode")
        if data['kind'] == 'uniform' and data['modes']:
            raise ValidationError("modes do not apply to a uniform concentration")


class InitialSchema(StrictSchema):
    eta = fields.Nested(SurfaceSchema, load_default=lambda: {'modes': [], 'random': None})
    ctilde = fields.Nested(ConcentrationSchema, required=True)
    u0 = fields.Str(load_default='zero', validate=validate.OneOf(U0_MODES))
    u0_fallback = fields.Bool(load_default=True)


class SteppingSchema(StrictSchema):
    dt = fields.Float(required=True, validate=POSITIVE)
    t_end = fields.Float(required=True, validate=POSITIVE)
    scheme = fields.Str(load_default='imex1', validate=validate.OneOf(SCHEMES))
    stride = fields.Int(load_default=1, strict=True,
                        validate=validate.Range(min=1, error="Output stride must be at least 1"))
    corrector = fields.Bool(load_default=False)

    @post_load
    def make_stepping(self, data, **kwargs):
        return SteppingConfig(**data)


class DiagnosticsSchema(StrictSchema):
    sobolev = fields.Bool(load_default=True)
    partial_budgets = fields.Bool(load_default=True)
    transient = fields.Float(load_default=0.2, validate=validate.Range(min=0.0, max=0.9))

    @post_load
    def make_diagnostics(self, data, **kwargs):
        return DiagnosticsConfig(**data)


class OutputSchema(StrictSchema):
    directory = fields.Str(load_default=None, allow_none=True)
    formats = fields.List(fields.Str(validate=validate.OneOf(OUTPUT_FORMATS)),
                          load_default=lambda: ['csv', 'json'])
    checkpoint_every = fields.Int(load_default=0, strict=True, validate=validate.Range(min=0))


class RunConfigSchema(StrictSchema):
    """Schema for a complete run configuration"""

    schema_version = fields.Int(
        required=True,
        strict=True,
        error_messages={'required': 'schema_version is required'}
    )
    name = fields.Str(load_default='run', validate=validate.Length(min=1, max=100))
    seed = fields.Int(load_default=0, strict=True)
    grid = fields.Nested(GridSchema, required=True)
    physics = fields.Nested(PhysicsSchema, required=True)
    initial = fields.Nested(InitialSchema, required=True)
    stepping = fields.Nested(SteppingSchema, required=True)
    diagnostics = fields.Nested(DiagnosticsSchema, load_default=DiagnosticsConfig)
    output = fields.Nested(OutputSchema, load_default=dict)

    @validates('schema_version')
    def validate_version(self, value, **kwargs):
        if value != SCHEMA_VERSION:
            raise ValidationError(f'Unsupported schema_version {value}; expected {SCHEMA_VERSION}')

    @validates_schema
    def validate_modes_in_band(self, data, **kwargs):
        grid = data.get('grid')
        initial = data.get('initial')
        if not isinstance(grid, GridSpec) or not initial:
            return
        limit = 3.0 if grid.dealias_rule == 'two_thirds' else 2.0
        modes = list(initial['eta']['modes']) + list(initial['ctilde']['modes'])
        random = initial['eta'].get('random')
        if random:
            modes.append((1.0, 0.0, random['max_mode'], random['max_mode']))
        for _, _, n1, n2 in modes:
            if not (abs(n1) < grid.N1 / limit and abs(n2) < grid.N2 / limit):
                raise ValidationError(f'Mode ({n1}, {n2}) lies outside the retained band', 'initial')

    @validates_schema
    def validate_concentration_window(self, data, **kwargs):
        model = data.get('physics', {}).get('tension')
        initial = data.get('initial')
        if not isinstance(model, TensionModel) or not initial:
            return
        lo, hi = model.window
        value = initial['ctilde']['value']
        if not lo < value < hi:
            raise ValidationError(f'Concentration {value} outside the tension window [{lo}, {hi}]',
                                  'initial')

    @validates_schema
    def validate_stepping(self, data, **kwargs):
        stepping = data.get('stepping')
        if isinstance(stepping, SteppingConfig) and stepping.dt > stepping.t_end:
            raise ValidationError('dt must not exceed t_end', 'stepping')

    @post_load
    def make_run_config(self, data, **kwargs):
        initial = data['initial']
        eta, ctilde = initial['eta'], initial['ctilde']
        random = eta.get('random')
        eta_random = None
        if random:
            eta_random = (random.get('seed', data['seed']), random['slope'], random['max_mode'])
        spec = InitialDataSpec(
            eta_modes=tuple(eta['modes']),
            eta_random=eta_random,
            ctilde_kind=ctilde['kind'],
            ctilde_value=ctilde['value'],
            ctilde_modes=tuple(ctilde['modes']),
            u0=initial['u0'],
            u0_fallback=initial['u0_fallback'],
        )
        # an omitted output block arrives as the raw default {}
        out = data['output']
        output = OutputConfig(
            directory=out.get('directory'),
            formats=tuple(out.get('formats', ('csv', 'json'))),
            checkpoint_every=out.get('checkpoint_every', 0),
        )
        return RunConfig(
            name=data['name'],
            seed=data['seed'],
            grid=data['grid'],
            model=data['physics']['tension'],
            gamma=data['physics']['gamma'],
            initial=spec,
            stepping=data['stepping'],
            diagnostics=data['diagnostics'],
            output=output,
        )


def validate_schema(schema_class: Schema, data: Dict[str, Any]) -> Dict[str, Any]:
    """Utility function to validate data against a schema"""
    try:
        schema = schema_class()
        result = schema.load(data)
        return {'valid': True, 'data': result, 'errors': None}
    except ValidationError as e:
        return {'valid': False, 'data': None, 'errors': e.messages}
