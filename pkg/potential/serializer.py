from rest_framework import serializers

from core.serializer import StrictSerializer
from potential.models import GAMMA_LOWER, PotentialGridSpec, TailDiagnostics
from potential.services import GRID_METHODS


class PotentialGridSpecSerializer(StrictSerializer):
    x_min = serializers.FloatField(default=-1.5)
    x_max = serializers.FloatField(default=1.5)
    y_min = serializers.FloatField(default=-1.5)
    y_max = serializers.FloatField(default=1.5)
    step = serializers.FloatField(default=0.05)

    def validate_step(self, value):
        if value <= 0:
            raise serializers.ValidationError("step must be positive.")
        return value

    def validate(self, attrs):
        if attrs['x_min'] >= attrs['x_max']:
            raise serializers.ValidationError({'x_max': "x_max must exceed x_min."})
        if attrs['y_min'] >= attrs['y_max']:
            raise serializers.ValidationError({'y_max': "y_max must exceed y_min."})
        return attrs

    def create(self, validated_data):
        return PotentialGridSpec(**validated_data)


class TailDiagnosticsSerializer(StrictSerializer):
    B = serializers.FloatField(default=2.0)
    gamma = serializers.FloatField(default=0.7)
    delta = serializers.FloatField(default=0.05)
    K = serializers.FloatField(default=10.0)
    Q = serializers.FloatField(default=1.0)
    C = serializers.FloatField(default=1.0)

    def validate_B(self, value):
        if value <= 0:
            raise serializers.ValidationError("B must be positive.")
        return value

    def validate_gamma(self, value):
        if not GAMMA_LOWER < value < 1.0:
            raise serializers.ValidationError("gamma must lie in (8/15, 1).")
        return value

    def validate_delta(self, value):
        if value <= 0:
            raise serializers.ValidationError("delta must be positive.")
        return value

    def validate_K(self, value):
        if value <= 0:
            raise serializers.ValidationError("K must be positive.")
        return value

    def validate_C(self, value):
        if value <= 0:
            raise serializers.ValidationError("C must be positive.")
        return value

    def create(self, validated_data):
        return TailDiagnostics(**validated_data)


class PotentialMethodField(serializers.ChoiceField):

    def __init__(self, **kwargs):
        kwargs.setdefault('default', 'eigen')
        super().__init__(choices=GRID_METHODS, **kwargs)
