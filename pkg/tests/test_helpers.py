# ============================================================
# tests.test_helpers: unit tests for helper functions
# ============================================================

import zlib

import numpy as np
import pytest

from soliton_lab import infer_value, make_rng
from soliton_lab.helpers import DEFAULT_SEED, parse_float_list, parse_override, stream_counter


# ============================================================
# Value type inference tests
# ============================================================

class TestInferValue:
    """Test automatic type inference from parameter text."""

    @pytest.mark.parametrize("raw,expected", [
        ("42", 42),
        ("-7", -7),
        ("3.5", 3.5),
        ("1e-3", 1e-3),
        (".25", 0.25),
        ("TRUE", True),
        ("false", False),
        ("cylinder", "cylinder"),
    ])
    def test_scalars(self, raw, expected):
        """Bools, ints, floats and strings are recognized."""
        value = infer_value(raw)
        assert value == expected
        assert type(value) is type(expected)

    def test_comma_list_becomes_floats(self):
        """Comma separated numbers become a float list."""
        assert infer_value("1,10,100") == [1.0, 10.0, 100.0]
        assert infer_value(" 0.01, 0.02 ") == [0.01, 0.02]

    def test_mixed_list_stays_string(self):
        """Lists with non-numbers are kept as text."""
        assert infer_value("a,b") == "a,b"

    def test_none_passthrough(self):
        assert infer_value(None) is None

    def test_type_hints(self):
        """Explicit hints override inference."""
        assert infer_value("7", "float") == 7.0
        assert infer_value("yes", "bool") is True
        assert infer_value("42", "string") == "42"
        assert infer_value("2", "floats") == [2.0]

    @pytest.mark.parametrize("raw,hint,message", [
        ("abc", "int", "Expected an integer"),
        ("abc", "float", "Expected a number"),
        ("maybe", "bool", "Expected a boolean"),
    ])
    def test_hint_mismatch(self, raw, hint, message):
        with pytest.raises(ValueError, match=message):
            infer_value(raw, hint)


class TestParseFloatList:
    """Comma separated number lists."""

    def test_valid(self):
        assert parse_float_list("1, 2.5,1e2") == [1.0, 2.5, 100.0]

    def test_invalid_item(self):
        with pytest.raises(ValueError, match="Invalid number 'x'"):
            parse_float_list("1,x,3")

    def test_empty(self):
        with pytest.raises(ValueError, match="comma separated list"):
            parse_float_list(" , ")


# ============================================================
# Override parsing tests
# ============================================================

class TestParseOverride:
    """Test key=value override splitting."""

    @pytest.mark.parametrize("text,expected", [
        ("r_max=100", ("r_max", "100")),
        ("L = 1,10", ("L", "1,10")),
        ("r-max=1", ("r_max", "1")),
        ("eps=1e-3", ("eps", "1e-3")),
    ])
    def test_valid(self, text, expected):
        assert parse_override(text) == expected

    def test_missing_equals(self):
        with pytest.raises(ValueError, match="key=value"):
            parse_override("r_max")

    def test_invalid_name(self):
        with pytest.raises(ValueError, match="Invalid parameter name"):
            parse_override("1x=2")


# ============================================================
# Random stream tests
# ============================================================

class TestMakeRng:
    """Named Philox streams from one seed."""

    def test_deterministic(self):
        a = make_rng(DEFAULT_SEED, "diameters").standard_normal(5)
        b = make_rng(DEFAULT_SEED, "diameters").standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ_by_name(self):
        a = make_rng(DEFAULT_SEED, "diameters").standard_normal(5)
        b = make_rng(DEFAULT_SEED, "rigidity").standard_normal(5)
        assert not np.allclose(a, b)

    def test_streams_differ_by_seed(self):
        a = make_rng(1, "diameters").standard_normal(5)
        b = make_rng(2, "diameters").standard_normal(5)
        assert not np.allclose(a, b)

    def test_counter_is_crc32(self):
        assert stream_counter("kernel-mass") == zlib.crc32(b"kernel-mass")

    @pytest.mark.parametrize("seed", [-1, 2**64])
    def test_seed_range(self, seed):
        with pytest.raises(ValueError, match="64-bit"):
            make_rng(seed, "x")
