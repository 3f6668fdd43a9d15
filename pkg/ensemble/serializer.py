from rest_framework import serializers

from core.exception import DomainError
from core.serializer import StrictSerializer
from ensemble.models import EnsembleSpec, EntryDist, EntryDistKind, Truncation


class EntryDistField(serializers.Field):
    """Entry law written as "gaussian" or {"kind": "heavy_tail", "exponent": 2.5}."""

    default_error_messages = {
        'invalid': 'Expected a distribution name or an object with "kind" and optional "exponent".',
    }

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = {'kind': data}
        if not isinstance(data, dict) or set(data) - {'kind', 'exponent'}:
            self.fail('invalid')
        try:
            exponent = data.get('exponent')
            return EntryDist(
                kind=data.get('kind', EntryDistKind.GAUSSIAN),
                exponent=float(exponent) if exponent is not None else None,
            )
        except DomainError as exc:
            raise serializers.ValidationError(str(exc.detail))
        except (TypeError, ValueError):
            self.fail('invalid')

    def to_representation(self, value):
        return value.as_dict()


class TruncationSerializer(StrictSerializer):
    c = serializers.FloatField(default=1.0)
    tau_exponent = serializers.FloatField(default=0.125)

    def validate_c(self, value):
        if value <= 0:
            raise serializers.ValidationError("c must be positive.")
        return value

    def validate_tau_exponent(self, value):
        if not 0 < value < 0.5:
            raise serializers.ValidationError("tau_exponent must lie in (0, 1/2).")
        return value


class EnsembleSpecSerializer(StrictSerializer):
    """
    Serializer for EnsembleSpec.

    Pass `context={'limit_regime': True}` when the ensemble feeds a limit-law
    comparison; |rho| = 1 is then rejected.
    """

    n = serializers.IntegerField(min_value=2)
    m = serializers.IntegerField(min_value=2, default=2)
    rho = serializers.FloatField(default=0.0)
    entry_dist = EntryDistField(default=EntryDist)
    truncation = TruncationSerializer(required=False, allow_null=True, default=None)
    master_seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1, default=0)

    def validate_rho(self, value):
        if abs(value) > 1:
            raise serializers.ValidationError("rho must satisfy |rho| <= 1.")
        if self.context.get('limit_regime') and abs(value) >= 1:
            raise serializers.ValidationError("limit-law comparisons need |rho| < 1.")
        return value

    def create(self, validated_data):
        truncation = validated_data.get('truncation')
        return EnsembleSpec(
            n=validated_data['n'],
            m=validated_data['m'],
            rho=validated_data['rho'],
            entry_dist=validated_data['entry_dist'],
            truncation=Truncation(**truncation) if truncation else None,
            master_seed=validated_data['master_seed'],
        )
