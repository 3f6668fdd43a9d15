from rest_framework import serializers

from core.utils import parse_complex


class StrictSerializer(serializers.Serializer):
    """Serializer that rejects keys it does not declare."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError(
                    {key: ["Unknown key."] for key in unknown}
                )
        return super().to_internal_value(data)


class ComplexField(serializers.Field):
    """Complex number written as `[re, im]` in JSON."""

    default_error_messages = {
        'invalid': 'Expected a complex number written as [re, im].',
    }

    def to_internal_value(self, data):
        try:
            return parse_complex(data)
        except (TypeError, ValueError):
            self.fail('invalid')

    def to_representation(self, value):
        value = complex(value)
        return [value.real, value.imag]
