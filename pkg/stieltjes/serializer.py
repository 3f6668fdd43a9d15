import numpy as np
from rest_framework import serializers

from core.serializer import ComplexField, StrictSerializer
from stieltjes.models import StieltjesQuery, SystemForm
from stieltjes.services import DEFAULT_MAX_ITER, DEFAULT_TOL


class StieltjesQuerySerializer(StrictSerializer):
    alpha = ComplexField()
    z = ComplexField()
    m = serializers.IntegerField(min_value=2, default=2)
    form = serializers.ChoiceField(choices=SystemForm.CHOICES, default=SystemForm.STATEMENT)

    def validate_alpha(self, value):
        if value.imag <= 0:
            raise serializers.ValidationError("alpha must have a positive imaginary part.")
        return value

    def create(self, validated_data):
        return StieltjesQuery(**validated_data)


class DensitySweepSerializer(StrictSerializer):
    """A density recovery run: x_min..x_max with `points` grid points at height eps."""

    z = ComplexField()
    m = serializers.IntegerField(min_value=2, default=2)
    form = serializers.ChoiceField(choices=SystemForm.CHOICES, default=SystemForm.STATEMENT)
    x_min = serializers.FloatField(default=-3.0)
    x_max = serializers.FloatField(default=3.0)
    points = serializers.IntegerField(min_value=2, default=601)
    eps = serializers.FloatField(default=0.01)
    tol = serializers.FloatField(default=DEFAULT_TOL)
    max_iter = serializers.IntegerField(min_value=1, default=DEFAULT_MAX_ITER)

    def validate_eps(self, value):
        if value <= 0:
            raise serializers.ValidationError("eps must be positive.")
        return value

    def validate_tol(self, value):
        if value <= 0:
            raise serializers.ValidationError("tol must be positive.")
        return value

    def validate(self, attrs):
        if attrs['x_min'] >= attrs['x_max']:
            raise serializers.ValidationError({'x_max': "x_max must exceed x_min."})
        return attrs

    def grid(self):
        data = self.validated_data
        return np.linspace(data['x_min'], data['x_max'], data['points'])
