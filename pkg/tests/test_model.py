import itertools
import math

import numpy as np
import pytest

from disorder import (
    ConfigError,
    change_time_pmf,
    conditional_hazard,
    conditional_survival,
    config_digest,
    load_spec,
    save_spec,
    spec_from_dict,
    spec_to_dict,
    validate,
)

from conftest import make_m1, make_m3, make_m4, random_spec


def tiny_spec(pi=0.3, p=0.5):
    """Single-pair uniform-kernel instance used by the pmf examples."""
    return spec_from_dict(
        {
            "alphabet_size": 2,
            "pre_kernels": [[[0.5, 0.5], [0.5, 0.5]]],
            "post_kernels": [[[0.5, 0.5], [0.5, 0.5]]],
            "b": [[1.0]],
            "pi": [[pi]],
            "p": [[p]],
            "d": 0,
            "x0": 0,
        }
    )


class TestValidate:
    def test_valid_uniform_spec(self):
        assert validate(tiny_spec(pi=0.0, p=0.8)) == []

    def test_non_stochastic_row(self):
        spec = spec_from_dict(
            {
                "alphabet_size": 2,
                "pre_kernels": [[[0.5, 0.4], [0.5, 0.5]]],
                "post_kernels": [[[0.5, 0.5], [0.5, 0.5]]],
                "b": [[1.0]],
                "pi": [[0.0]],
                "p": [[0.8]],
                "d": 0,
                "x0": 0,
            }
        )
        assert any("not stochastic" in item for item in validate(spec))

    def test_p_boundary_rejected(self):
        spec = spec_from_dict(
            {
                "alphabet_size": 2,
                "pre_kernels": [[[0.5, 0.5], [0.5, 0.5]]],
                "post_kernels": [[[0.5, 0.5], [0.5, 0.5]]],
                "b": [[1.0]],
                "pi": [[0.0]],
                "p": [[1.0]],
                "d": 0,
                "x0": 0,
            }
        )
        assert any("open interval" in item for item in validate(spec))

    def test_support_mismatch_detected(self):
        spec = spec_from_dict(
            {
                "alphabet_size": 2,
                "pre_kernels": [[[1.0, 0.0], [0.5, 0.5]]],
                "post_kernels": [[[0.5, 0.5], [0.5, 0.5]]],
                "b": [[1.0]],
                "pi": [[0.0]],
                "p": [[0.8]],
                "d": 0,
                "x0": 0,
            }
        )
        assert any("support" in item for item in validate(spec))

    def test_pure_function(self, m3):
        assert validate(m3) == validate(m3) == []

    def test_reference_specs_valid(self):
        for make in (make_m1, make_m3, make_m4):
            assert validate(make(d=1)) == []


class TestChangeTimePmf:
    def test_first_step_mass(self):
        assert change_time_pmf(tiny_spec(), 1) == pytest.approx(0.3, abs=1e-15)

    def test_second_step_mass(self):
        # (1 - 0.3) * 0.5**0 * 0.5
        assert change_time_pmf(tiny_spec(), 2) == pytest.approx(0.35, abs=1e-15)

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            change_time_pmf(tiny_spec(), 0)

    @pytest.mark.parametrize("make", [make_m1, make_m3, make_m4])
    def test_partial_sums_and_tail_bound(self, make):
        spec = make()
        partial = 0.0
        for up_to in range(2, 40):
            partial = math.fsum(change_time_pmf(spec, k) for k in range(1, up_to + 1))
            assert partial <= 1.0 + 1e-12
            tail = float(np.sum(spec.b * (1.0 - spec.pi) * spec.p ** (up_to - 1)))
            assert abs(partial + tail - 1.0) <= 1e-12

    def test_matches_joint_enumeration(self):
        rng = np.random.default_rng(5)
        spec = random_spec(rng)
        # brute force: P(theta = k) = sum_ij b_ij P(theta = k | ij)
        for k in range(1, 9):
            total = 0.0
            for i, j in spec.pairs():
                pi, p = float(spec.pi[i, j]), float(spec.p[i, j])
                cond = pi if k == 1 else (1 - pi) * p ** (k - 2) * (1 - p)
                total += float(spec.b[i, j]) * cond
            assert change_time_pmf(spec, k) == pytest.approx(total, abs=1e-15)


class TestConditionalLaws:
    def test_hazard_interior(self):
        spec = tiny_spec(p=0.8)
        assert conditional_hazard(spec, 0, 0, 1, 2) == pytest.approx(0.16, abs=1e-15)

    def test_hazard_at_origin(self):
        spec = tiny_spec(pi=0.3)
        assert conditional_hazard(spec, 0, 0, 0, 1) == pytest.approx(0.3, abs=1e-15)

    def test_survival_interior(self):
        assert conditional_survival(tiny_spec(p=0.8), 0, 0, 2, 1) == pytest.approx(0.8)

    def test_survival_at_origin(self):
        assert conditional_survival(tiny_spec(pi=0.3, p=0.5), 0, 0, 0, 1) == pytest.approx(0.7)

    @pytest.mark.parametrize("n", [0, 1, 3])
    def test_hazards_partition(self, n):
        rng = np.random.default_rng(11)
        spec = random_spec(rng)
        for i, j in spec.pairs():
            for k in range(1, 7):
                mass = math.fsum(
                    conditional_hazard(spec, i, j, n, m) for m in range(1, k + 1)
                )
                assert mass + conditional_survival(spec, i, j, n, k) == pytest.approx(
                    1.0, abs=1e-12
                )

    def test_agrees_with_joint_conditioning(self):
        # brute-force conditional from the prior joint of (theta, pair)
        rng = np.random.default_rng(23)
        spec = random_spec(rng)
        for i, j in spec.pairs():
            pi, p = float(spec.pi[i, j]), float(spec.p[i, j])

            def prior(t):
                return pi if t == 1 else (1 - pi) * p ** (t - 2) * (1 - p)

            for n in range(0, 7):
                surv_n = 1.0 - math.fsum(prior(t) for t in range(1, n + 1))
                for k in range(1, 7):
                    expected = prior(n + k) / surv_n
                    got = conditional_hazard(spec, i, j, n, k)
                    assert got == pytest.approx(expected, abs=1e-12)


class TestConfigIO:
    def test_round_trip(self, tmp_path, m3):
        path = tmp_path / "m3.json"
        save_spec(m3, path)
        loaded = load_spec(path)
        assert spec_to_dict(loaded) == spec_to_dict(m3)
        assert config_digest(loaded) == config_digest(m3)

    def test_unknown_keys_rejected(self, m1):
        payload = spec_to_dict(m1)
        payload["extra"] = 1
        with pytest.raises(ConfigError, match="unknown config keys: extra"):
            spec_from_dict(payload)

    def test_missing_keys_rejected(self, m1):
        payload = spec_to_dict(m1)
        del payload["pi"]
        with pytest.raises(ConfigError, match="missing config keys: pi"):
            spec_from_dict(payload)

    def test_non_json_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("not json")
        with pytest.raises(ConfigError):
            load_spec(path)

    def test_digest_differs_across_specs(self, m1, m2):
        assert config_digest(m1) != config_digest(m2)

    def test_spec_arrays_immutable(self, m1):
        with pytest.raises(ValueError):
            m1.b[0, 0] = 0.5
