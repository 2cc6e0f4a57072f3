from fractions import Fraction

from rest_framework import serializers

from .analysis import ConeSpec, exact
from .lattice import DomainKind

# serializers.py


class StrictSerializer(serializers.Serializer):
    """Rejects keys that are not declared fields"""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: "Unknown configuration key." for key in unknown})
        return super().to_internal_value(data)


class ExactNumberField(serializers.Field):
    """Number kept as a Fraction (floats via their shortest repr); 'inf' allowed when `allow_inf`"""

    def __init__(self, allow_inf=False, **kwargs):
        self.allow_inf = allow_inf
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        if isinstance(data, bool):
            raise serializers.ValidationError("Expected a number.")
        try:
            value = exact(data)
        except (ValueError, TypeError, ZeroDivisionError):
            raise serializers.ValidationError("Expected a number or a fraction such as '7/2'.")
        if not self.allow_inf and not isinstance(value, Fraction):
            raise serializers.ValidationError("Infinite values are not allowed here.")
        return value

    def to_representation(self, value):
        return str(value)


KIND_CHOICES = [kind.value for kind in DomainKind]


class PotentialSerializer(StrictSerializer):
    form = serializers.ChoiceField(choices=['power_law', 'compact'], default='power_law')
    alpha = serializers.FloatField(default=0.0)
    c = serializers.FloatField(default=1.0, min_value=0.0)
    radius = serializers.FloatField(required=False, min_value=0.0)
    level = serializers.FloatField(default=1.0)

    def validate(self, data):
        if data['form'] == 'compact' and 'radius' not in data:
            raise serializers.ValidationError({'radius': "Compact weights need a radius."})
        if data['form'] == 'power_law' and not data['c'] > 0:
            raise serializers.ValidationError({'c': "Power-law weights need c > 0."})
        return data


class ProblemSerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=KIND_CHOICES)
    d = serializers.IntegerField(min_value=2)
    p = serializers.FloatField()
    potential = PotentialSerializer(required=False)

    def validate(self, data):
        if data['kind'] == DomainKind.WHOLE.value and data['d'] < 3:
            raise serializers.ValidationError({'d': "The whole lattice needs d >= 3."})
        if not data['p'] > 1:
            raise serializers.ValidationError({'p': "p must exceed 1."})
        data.setdefault('potential', PotentialSerializer().to_internal_value({}))
        return data


class OutputMixin(serializers.Serializer):
    output_dir = serializers.CharField(required=False)


class GreenConfigSerializer(StrictSerializer, OutputMixin):
    kind = serializers.ChoiceField(choices=KIND_CHOICES)
    d = serializers.IntegerField(min_value=2)
    R = serializers.FloatField(min_value=1.0)
    pole = serializers.ListField(child=serializers.IntegerField(), required=False)
    tol = serializers.FloatField(required=False, min_value=0.0)
    cone = serializers.ChoiceField(choices=[cone.value for cone in ConeSpec], required=False)
    use_cache = serializers.BooleanField(default=True)

    def validate(self, data):
        if 'pole' in data and len(data['pole']) != data['d']:
            raise serializers.ValidationError({'pole': f"Expected {data['d']} coordinates."})
        if data['kind'] != DomainKind.WHOLE.value and 'pole' not in data:
            raise serializers.ValidationError({'pole': "Half-space and quadrant tables need an interior pole."})
        if data['kind'] == DomainKind.WHOLE.value and data['R'] < 10:
            raise serializers.ValidationError({'R': "Whole-space tables need R >= 10."})
        return data


class SourceSerializer(StrictSerializer):
    form = serializers.ChoiceField(choices=['delta', 'power', 'log'], default='delta')
    pole = serializers.ListField(child=serializers.IntegerField(), required=False)
    tau = serializers.FloatField(default=-0.5)
    sigma = serializers.FloatField(default=1.0)


class PoissonConfigSerializer(StrictSerializer, OutputMixin):
    kind = serializers.ChoiceField(choices=KIND_CHOICES)
    d = serializers.IntegerField(min_value=2)
    R = serializers.FloatField(min_value=1.0)
    tol = serializers.FloatField(required=False, min_value=0.0)
    source = SourceSerializer(required=False)

    def validate(self, data):
        data.setdefault('source', SourceSerializer().to_internal_value({}))
        pole = data['source'].get('pole')
        if pole is not None and len(pole) != data['d']:
            raise serializers.ValidationError({'source': f"Pole needs {data['d']} coordinates."})
        return data


class SolveConfigSerializer(StrictSerializer, OutputMixin):
    problem = ProblemSerializer()
    R = serializers.FloatField(min_value=2.0)
    tol = serializers.FloatField(required=False, min_value=0.0)
    max_iter = serializers.IntegerField(required=False, min_value=1)
    seed_point = serializers.ListField(child=serializers.IntegerField(), required=False)
    exploratory = serializers.BooleanField(default=False)
    scan_schedule = serializers.ListField(child=serializers.FloatField(min_value=2.0), required=False)
    scan_n_max = serializers.IntegerField(default=64, min_value=4)


class GridSerializer(StrictSerializer):
    start = ExactNumberField()
    stop = ExactNumberField()
    step = ExactNumberField()
    include_start = serializers.BooleanField(default=True)

    def validate(self, data):
        if not data['step'] > 0:
            raise serializers.ValidationError({'step': "Grid step must be positive."})
        if data['stop'] < data['start']:
            raise serializers.ValidationError({'stop': "Grid stop must not be below start."})
        return data


class SweepConfigSerializer(StrictSerializer, OutputMixin):
    kind = serializers.ChoiceField(choices=KIND_CHOICES)
    d = serializers.IntegerField(min_value=2)
    alpha = GridSerializer()
    p = GridSerializer()
    bounded = serializers.BooleanField(default=True)
    vanishing_weight = serializers.BooleanField(default=False)
    spots = serializers.ListField(child=serializers.ListField(child=ExactNumberField(), min_length=2,
                                                                  max_length=2), default=list)
    R = serializers.FloatField(default=12.0, min_value=2.0)
    tol = serializers.FloatField(required=False, min_value=0.0)
    workers = serializers.IntegerField(default=4, min_value=1)


class BootstrapConfigSerializer(StrictSerializer, OutputMixin):
    kind = serializers.ChoiceField(choices=KIND_CHOICES)
    d = serializers.IntegerField(min_value=2)
    alpha = ExactNumberField()
    q = ExactNumberField()
    max_steps = serializers.IntegerField(default=200, min_value=0)
    n_max = serializers.IntegerField(default=64, min_value=4)


class ClassifyConfigSerializer(StrictSerializer, OutputMixin):
    kind = serializers.ChoiceField(choices=KIND_CHOICES)
    d = serializers.IntegerField(min_value=2)
    alpha = ExactNumberField(allow_inf=True)
    p = ExactNumberField()
    bounded = serializers.BooleanField(default=True)
    vanishing_weight = serializers.BooleanField(default=False)
