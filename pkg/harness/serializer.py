import math

from rest_framework import serializers

from core.serializer import ComplexField, StrictSerializer
from ensemble.serializer import EnsembleSpecSerializer, EntryDistField
from harness.models import DEFAULT_ALPHA_GRID, DEFAULT_PHI_LIST, CheckName, ExperimentConfig
from potential.models import PotentialGridSpec, TailDiagnostics
from potential.serializer import PotentialGridSpecSerializer, TailDiagnosticsSerializer


def _ladder_field(default):
    return serializers.ListField(
        child=serializers.IntegerField(min_value=2), min_length=1, default=lambda: list(default),
    )


class ExperimentConfigSerializer(StrictSerializer):
    """
    Serializer for ExperimentConfig.

    The nested ensemble is validated in the limit regime (|rho| < 1) since
    every experiment compares against a limit law.
    """

    ensemble = EnsembleSpecSerializer()
    trials = serializers.IntegerField(min_value=1, default=20)
    z_list = serializers.ListField(child=ComplexField(), min_length=1, default=lambda: [0.5 + 0.2j])
    alpha_grid = serializers.ListField(child=ComplexField(), min_length=1, default=lambda: list(DEFAULT_ALPHA_GRID))
    phi_list = serializers.ListField(child=serializers.FloatField(), min_length=1, default=lambda: list(DEFAULT_PHI_LIST))
    n_ladder = _ladder_field((64, 128, 256))
    checks = serializers.ListField(
        child=serializers.ChoiceField(choices=CheckName.CHOICES), default=lambda: list(CheckName.CHOICES),
    )
    eps = serializers.FloatField(default=0.01)
    x_points = serializers.IntegerField(min_value=2, default=801)
    x_range = serializers.FloatField(default=4.0)
    discrimination_n = serializers.IntegerField(min_value=2, default=512)
    potential_grid = PotentialGridSpecSerializer(required=False)
    potential_trials = serializers.IntegerField(min_value=1, default=40)
    diagnostics = TailDiagnosticsSerializer(required=False)
    tail_trials = serializers.IntegerField(min_value=1, default=500)
    appendix_ladder = _ladder_field((32, 64, 128, 256))
    appendix_trials = serializers.IntegerField(min_value=2, default=200)
    appendix_v = serializers.FloatField(default=2.0)
    partial_range = serializers.ListField(
        child=serializers.IntegerField(min_value=1), min_length=2, max_length=2, default=lambda: [1, 2],
    )
    truncation_dist = EntryDistField(required=False, allow_null=True, default=None)

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._context = {'limit_regime': True, **self._context}

    def validate_alpha_grid(self, value):
        if any(alpha.imag <= 0 for alpha in value):
            raise serializers.ValidationError("Every alpha must have a positive imaginary part.")
        return value

    def validate_phi_list(self, value):
        if any(not 0.0 <= phi <= math.pi / 2 for phi in value):
            raise serializers.ValidationError("phi values must lie in [0, pi/2].")
        return value

    def validate_eps(self, value):
        if value <= 0:
            raise serializers.ValidationError("eps must be positive.")
        return value

    def validate_x_range(self, value):
        if value <= 0:
            raise serializers.ValidationError("x_range must be positive.")
        return value

    def validate_appendix_v(self, value):
        if value <= 0:
            raise serializers.ValidationError("appendix_v must be positive.")
        return value

    def validate(self, attrs):
        a, b = attrs['partial_range']
        m = attrs['ensemble']['m']
        if not a <= b <= m:
            raise serializers.ValidationError({'partial_range': f"partial_range must satisfy 1 <= a <= b <= m = {m}."})
        return attrs

    def create(self, validated_data):
        data = dict(validated_data)
        data['ensemble'] = EnsembleSpecSerializer(context=self.context).create(data['ensemble'])
        grid = data.get('potential_grid')
        data['potential_grid'] = PotentialGridSpec(**grid) if grid else PotentialGridSpec()
        diagnostics = data.get('diagnostics')
        data['diagnostics'] = TailDiagnostics(**diagnostics) if diagnostics else TailDiagnostics()
        for key in ('z_list', 'alpha_grid', 'phi_list', 'n_ladder', 'checks', 'appendix_ladder', 'partial_range'):
            data[key] = tuple(data[key])
        return ExperimentConfig(**data)
