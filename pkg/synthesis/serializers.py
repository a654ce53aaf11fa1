# synthesis/serializers.py

from fractions import Fraction

from rest_framework import serializers

from .lifting import NondeterminismRelation
from .partition import PARTITION_ENGINES, PartitionConfig, Splitter
from .utils import format_fraction


class FractionField(serializers.Field):
    default_error_messages = {
        'invalid': 'A rational number is required, e.g. 2/5 or 0.4.',
    }

    def to_internal_value(self, data):
        if isinstance(data, float):
            data = repr(data)
        try:
            return Fraction(str(data).strip())
        except (ValueError, ZeroDivisionError):
            self.fail('invalid')

    def to_representation(self, value):
        return format_fraction(value)


class PartitionConfigSerializer(serializers.Serializer):
    coverage = FractionField(required=False)
    engine = serializers.ChoiceField(choices=[(e.value, e.label) for e in PARTITION_ENGINES], required=False)
    splitter = serializers.ChoiceField(choices=Splitter.choices, required=False)
    grid = serializers.IntegerField(min_value=2, required=False)
    workers = serializers.IntegerField(min_value=1, required=False)
    budget_seconds = serializers.FloatField(min_value=0, required=False)
    max_iterations = serializers.IntegerField(min_value=1, required=False)
    relation = serializers.ChoiceField(choices=NondeterminismRelation.choices, required=False)
    smt_command = serializers.CharField(required=False, allow_null=True, allow_blank=False)

    def validate_coverage(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError("Coverage must lie in (0, 1].")
        return value

    def create(self, validated_data):
        return PartitionConfig.from_settings(**validated_data)


class RunReportSerializer(serializers.Serializer):
    command = serializers.CharField()
    arguments = serializers.DictField(child=serializers.CharField(allow_blank=True))
    result = serializers.DictField()
    diagnostics = serializers.DictField()
    exit_code = serializers.IntegerField()
    wall_time_ms = serializers.IntegerField()
