from rest_framework import serializers

from core.serializer import ComplexField, StrictSerializer
from ensemble.serializer import EnsembleSpecSerializer
from limitlaw.services import GRID_QUANTITIES
from potential.models import PotentialGridSpec
from potential.serializer import PotentialGridSpecSerializer, PotentialMethodField


def _grid(validated_data):
    grid = validated_data.get('grid')
    return PotentialGridSpec(**grid) if grid else PotentialGridSpec()


class SampleConfigSerializer(StrictSerializer):
    ensemble = EnsembleSpecSerializer()
    trials = serializers.IntegerField(min_value=1, default=1)


class SpectrumConfigSerializer(StrictSerializer):
    """Eigenvalues of W and the symmetrized spectrum of V(z) for each trial."""

    ensemble = EnsembleSpecSerializer()
    z = ComplexField(default=0j)
    trials = serializers.IntegerField(min_value=1, default=1)


class LimitGridSerializer(StrictSerializer):
    m = serializers.IntegerField(min_value=1, default=2)
    quantities = serializers.ListField(
        child=serializers.ChoiceField(choices=GRID_QUANTITIES), min_length=1, default=lambda: list(GRID_QUANTITIES),
    )
    grid = PotentialGridSpecSerializer(required=False)

    def grid_spec(self):
        return _grid(self.validated_data)


class PotentialRunSerializer(StrictSerializer):
    """Mean empirical potential over `trials` and its Laplacian density."""

    ensemble = EnsembleSpecSerializer()
    trials = serializers.IntegerField(min_value=1, default=40)
    grid = PotentialGridSpecSerializer(required=False)
    method = PotentialMethodField()

    def grid_spec(self):
        return _grid(self.validated_data)
