"""MRT precoding, capacity metrics and CSI-mode comparison."""

import math

import numpy as np
import pytest

from chandyn import evalsuite as ev
from chandyn.errors import DegenerateChannelError, ShapeError


class TestMaeReport:
    def test_zero_for_equal(self):
        x = np.random.default_rng(0).standard_normal((3, 4, 5))
        assert ev.mae_report(x, x) == 0.0

    def test_matches_direct_summation(self):
        rng = np.random.default_rng(1)
        pred = rng.standard_normal((2, 3, 4))
        true = rng.standard_normal((2, 3, 4))
        acc = 0.0
        count = 0
        for i in range(2):
            for j in range(3):
                for k in range(4):
                    acc += abs(pred[i, j, k] - true[i, j, k])
                    count += 1
        assert ev.mae_report(pred, true) == pytest.approx(acc / count, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ev.mae_report(np.zeros((2, 2)), np.zeros((2, 3)))


class TestAssembleCsi:
    def test_known_constants(self):
        real = np.full((3, 2, 2), 0.5)
        imag = np.full((3, 2, 2), -0.25)
        c = ev.assemble_csi_vector(real, imag, [2.0, 4.0, 8.0], [4.0, 8.0, 16.0], 0, 1)
        assert np.allclose(c, [1.0 - 1.0j, 2.0 - 2.0j, 4.0 - 4.0j])

    def test_denormalization_round_trip(self):
        from chandyn.dataset import normalize

        rng = np.random.default_rng(2)
        raw = rng.standard_normal((4, 3, 5)) + 1j * rng.standard_normal((4, 3, 5))
        samples_re = [normalize(raw[p].real[None]) for p in range(4)]
        samples_im = [normalize(raw[p].imag[None]) for p in range(4)]
        c = ev.assemble_csi_vector(
            np.stack([s.states[0] for s in samples_re]),
            np.stack([s.states[0] for s in samples_im]),
            [s.scale for s in samples_re], [s.scale for s in samples_im], 1, 2)
        expect = raw[:, 1, 2]
        f32 = np.abs(expect).astype(np.float32)
        assert np.allclose(c.real, expect.real, atol=2 * np.spacing(f32.max()))
        assert np.allclose(c.imag, expect.imag, atol=2 * np.spacing(f32.max()))

    def test_missing_component(self):
        with pytest.raises(Exception):
            ev.assemble_csi_vector(np.zeros((2, 2, 2)), np.zeros((3, 2, 2)),
                                   [1, 1], [1, 1, 1], 0, 0)


class TestMrtPrecoder:
    def test_basis_vector(self):
        c = np.array([1.0, 0, 0, 0], dtype=complex)
        w = ev.mrt_precoder(c)
        assert np.allclose(w, [1, 0, 0, 0])
        assert abs(np.dot(c, w)) ** 2 == pytest.approx(1.0)

    def test_mrt_identity(self):
        rng = np.random.default_rng(3)
        c = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        w = ev.mrt_precoder(c)
        assert np.linalg.norm(w) == pytest.approx(1.0, abs=1e-12)
        assert abs(np.dot(c, w)) ** 2 == pytest.approx(np.linalg.norm(c) ** 2,
                                                       rel=1e-12)

    def test_optimality_against_random_precoders(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            c = rng.standard_normal(8) + 1j * rng.standard_normal(8)
            best = abs(np.dot(c, ev.mrt_precoder(c))) ** 2
            alt = rng.standard_normal((1200, 8)) + 1j * rng.standard_normal((1200, 8))
            alt /= np.linalg.norm(alt, axis=1, keepdims=True)
            gains = np.abs(alt @ c) ** 2
            assert np.all(gains <= best + 1e-9)

    def test_scale_invariance_of_direction(self):
        rng = np.random.default_rng(5)
        c = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        alpha = 2.5 * np.exp(1j * 0.7)
        w1 = ev.mrt_precoder(c)
        w2 = ev.mrt_precoder(alpha * c)
        assert np.allclose(w2, np.exp(-1j * np.angle(alpha)) * w1, atol=1e-12)

    def test_zero_vector(self):
        with pytest.raises(DegenerateChannelError):
            ev.mrt_precoder(np.zeros(4, dtype=complex))


class TestInstantaneousCapacity:
    def test_perfect_csi_identity(self):
        rng = np.random.default_rng(6)
        c = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        cap = ev.instantaneous_capacity(c, ev.mrt_precoder(c), rho=2.0)
        assert cap == pytest.approx(math.log2(1 + 2.0 * np.linalg.norm(c) ** 2))

    def test_orthogonal_precoder_zero(self):
        c = np.array([1.0, 0.0], dtype=complex)
        w = np.array([0.0, 1.0], dtype=complex)
        assert ev.instantaneous_capacity(c, w, 5.0) == 0.0

    def test_unit_case(self):
        c = np.array([1.0, 0.0], dtype=complex)
        w = np.array([1.0, 0.0], dtype=complex)
        assert ev.instantaneous_capacity(c, w, 1.0) == pytest.approx(1.0)

    def test_non_unit_precoder_rejected(self):
        c = np.array([1.0, 0.0], dtype=complex)
        with pytest.raises(ValueError):
            ev.instantaneous_capacity(c, 2 * c, 1.0)


class TestOutageCapacity:
    def test_lower_quantile_definition(self):
        assert ev.outage_capacity(np.arange(1, 11), 0.1) == 1.0

    def test_constant_samples(self):
        assert ev.outage_capacity(np.full(50, 3.3), 0.42) == pytest.approx(3.3)

    def test_uniform_monte_carlo(self):
        rng = np.random.default_rng(7)
        samples = rng.uniform(0, 1, 100_000)
        assert ev.outage_capacity(samples, 0.1) == pytest.approx(0.1, abs=0.01)

    def test_monotone_in_epsilon(self):
        rng = np.random.default_rng(8)
        samples = rng.exponential(1.0, 5000)
        caps = [ev.outage_capacity(samples, e) for e in (0.05, 0.1, 0.2, 0.5, 0.9)]
        assert all(a <= b + 1e-12 for a, b in zip(caps, caps[1:]))

    def test_validation(self):
        with pytest.raises(ValueError):
            ev.outage_capacity([], 0.1)
        with pytest.raises(ValueError):
            ev.outage_capacity([1.0], 0.0)


def random_population(rng, n=400, ports=4):
    c_true = rng.standard_normal((n, ports)) + 1j * rng.standard_normal((n, ports))
    return c_true


class TestCompareCsiModes:
    def test_predicted_equals_perfect(self):
        rng = np.random.default_rng(9)
        c = random_population(rng)
        report = ev.compare_csi_modes(
            c, {"aged": c + 0.5 * rng.standard_normal(c.shape), "predicted_dl": c},
            rho=10.0, epsilon=0.1)
        assert report.loss_vs_perfect("predicted_dl") == pytest.approx(0.0, abs=1e-12)
        assert report.reduction_vs_aged("predicted_dl") == pytest.approx(1.0, abs=1e-9)

    def test_predicted_equals_aged(self):
        rng = np.random.default_rng(10)
        c = random_population(rng)
        aged = c + 0.5 * (rng.standard_normal(c.shape) + 1j * rng.standard_normal(c.shape))
        report = ev.compare_csi_modes(c, {"aged": aged, "predicted_kf": aged},
                                      rho=10.0, epsilon=0.1)
        assert report.reduction_vs_aged("predicted_kf") == pytest.approx(0.0, abs=1e-12)

    def test_perfect_upper_bounds_pointwise(self):
        rng = np.random.default_rng(11)
        c = random_population(rng)
        est = c + 0.3 * (rng.standard_normal(c.shape) + 1j * rng.standard_normal(c.shape))
        perfect = ev.capacity_samples(c, c, rho=10.0)
        other = ev.capacity_samples(c, est, rho=10.0)
        assert np.all(other <= perfect + 1e-12)

    def test_population_mismatch(self):
        rng = np.random.default_rng(12)
        c = random_population(rng)
        with pytest.raises(ValueError):
            ev.compare_csi_modes(c, {"aged": c[:-1]}, rho=10.0, epsilon=0.1)

    def test_sample_count_quantile_guard(self):
        rng = np.random.default_rng(13)
        c = random_population(rng, n=5)
        with pytest.raises(ValueError):
            ev.compare_csi_modes(c, {"aged": c}, rho=10.0, epsilon=0.1)

    def test_percentages_recompute_from_capacities(self):
        report = ev.CapacityReport(
            capacities={"perfect": 5.0, "aged": 4.0, "predicted_dl": 4.8},
            rho=10.0, epsilon=0.1, num_samples=1000)
        rows = {r["mode"]: r for r in report.rows()}
        assert rows["predicted_dl"]["loss_pct"] == pytest.approx(100 * 0.2 / 5.0)
        assert rows["predicted_dl"]["reduction_pct"] == pytest.approx(80.0)
        assert rows["aged"]["reduction_pct"] == pytest.approx(0.0)

    def test_report_files(self, tmp_path):
        report = ev.CapacityReport(
            capacities={"perfect": 5.0, "aged": 4.0}, rho=10.0, epsilon=0.1,
            num_samples=100)
        report.to_csv(tmp_path / "r.csv")
        report.to_json(tmp_path / "r.json")
        header = (tmp_path / "r.csv").read_text().splitlines()[0]
        assert header == "mode,epsilon,rho_db,c_eps_bits,loss_pct,reduction_pct,n_samples"
        import json

        data = json.loads((tmp_path / "r.json").read_text())
        assert {r["mode"] for r in data["rows"]} == {"perfect", "aged"}

    def test_cdf_dump(self, tmp_path):
        ev.dump_capacity_cdf([3.0, 1.0, 2.0], tmp_path / "cdf.csv")
        lines = (tmp_path / "cdf.csv").read_text().strip().splitlines()
        assert lines[0] == "value,cdf"
        values = [float(l.split(",")[0]) for l in lines[1:]]
        assert values == sorted(values)
