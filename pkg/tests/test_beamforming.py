import math

import numpy as np
import pytest

from uavsense import (
    AoA,
    aoa_mesh,
    beam_pattern,
    capon_beamformer,
    hpbw,
    ls_beamformer,
    steering_matrix,
    steering_vector,
)
from uavsense.beamforming import _steering_matrix_from_angles


def random_aoa(rng, theta_max=math.pi / 2 * 0.999):
    return AoA(theta=rng.uniform(0.0, theta_max), phi=rng.uniform(0.0, 2 * math.pi))


class TestSteeringVector:
    def test_boresight_is_all_ones(self):
        g = steering_vector(AoA(0.0, 1.234), 8)
        assert np.allclose(g, 1.0)

    def test_hand_evaluated_ramps(self):
        # theta=pi/2, phi=pi/2: sin(theta)=1, sin(phi)=1, cos(phi)=0, so the
        # i-ramp alternates sign and the j-ramp stays at 1.
        g = steering_vector(AoA(math.pi / 2, math.pi / 2), 2).reshape(2, 2)
        assert g[0, 0] == pytest.approx(1.0)
        assert g[0, 1] == pytest.approx(1.0)
        assert g[1, 0] == pytest.approx(-1.0)
        assert g[1, 1] == pytest.approx(-1.0)

    def test_conjugate_under_azimuth_flip(self, rng):
        for _ in range(20):
            d = random_aoa(rng)
            flipped = AoA(d.theta, (d.phi + math.pi) % (2 * math.pi))
            assert np.allclose(steering_vector(flipped, 6), steering_vector(d, 6).conj())

    def test_unit_modulus_and_norm(self, rng):
        for n in (2, 5, 8):
            g = steering_vector(random_aoa(rng), n)
            assert np.allclose(np.abs(g), 1.0)
            assert np.linalg.norm(g) == pytest.approx(n)
            assert g[0] == pytest.approx(1.0)

    def test_matrix_stacks_columns(self, rng):
        dirs = [random_aoa(rng) for _ in range(5)]
        G = steering_matrix(dirs, 4)
        assert G.shape == (16, 5)
        for h, d in enumerate(dirs):
            assert np.allclose(G[:, h], steering_vector(d, 4))

    def test_vectorized_matrix_matches_loop(self, rng):
        dirs = [random_aoa(rng) for _ in range(7)]
        theta = np.array([d.theta for d in dirs])
        phi = np.array([d.phi for d in dirs])
        assert np.allclose(_steering_matrix_from_angles(theta, phi, 5), steering_matrix(dirs, 5))


class TestBeamPattern:
    def test_distortionless_weights_give_unit_gain(self):
        d = AoA(0.4, 2.0)
        g = steering_vector(d, 8)
        w = g / 64.0
        pattern = beam_pattern(g.reshape(-1, 1), w)
        assert pattern[0] == pytest.approx(1.0)

    def test_duplicated_columns_duplicate_gains(self, rng):
        d = random_aoa(rng)
        G = steering_matrix([d, d], 4)
        pattern = beam_pattern(G, rng.standard_normal(16) + 1j * rng.standard_normal(16))
        assert pattern[0] == pytest.approx(pattern[1])

    def test_direct_inner_product(self):
        w = np.full(4, 0.5)
        g = np.ones((4, 1))
        assert beam_pattern(g, w)[0] == pytest.approx(2.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            beam_pattern(np.ones((16, 3)), np.ones(4))


class TestAoAMesh:
    def test_elevation_wrap_duplicates(self):
        mesh = aoa_mesh(AoA(0.3, 1.0), 3)
        assert np.allclose(mesh.elevations, [0.3, 0.3 + math.pi / 4, 0.3])

    def test_azimuth_wrap_duplicates(self):
        mesh = aoa_mesh(AoA(0.5, 0.0), 2)
        expected = [(j * 2 * math.pi / 7) % (2 * math.pi) for j in range(8)]
        assert np.allclose(mesh.azimuths, expected)
        assert mesh.azimuths[7] == pytest.approx(0.0)

    def test_cardinality(self):
        for n in (2, 3, 8):
            mesh = aoa_mesh(AoA(0.2, 0.4), n)
            assert len(mesh.theta) == 4 * n * n
            assert len(mesh.desired) == 4 * n * n

    def test_first_point_is_intended_with_unit_response(self):
        mesh = aoa_mesh(AoA(0.7, 2.2), 4)
        assert mesh.theta[0] == pytest.approx(0.7)
        assert mesh.phi[0] == pytest.approx(2.2)
        assert mesh.desired[0] == 1.0
        assert np.count_nonzero(mesh.desired) == 1


class TestLsBeamformer:
    def test_boresight_collinear_with_ones(self):
        # All 16 mesh rows coincide at theta=0 for n=2; the loaded normal
        # equations pick the all-ones direction (loading limits accuracy).
        w = ls_beamformer(aoa_mesh(AoA(0.0, 0.0), 2), 2).weights
        assert np.allclose(w, 0.5, atol=1e-4)

    def test_unit_norm(self, rng):
        for _ in range(20):
            w = ls_beamformer(aoa_mesh(random_aoa(rng), 8), 8).weights
            assert abs(np.linalg.norm(w) - 1.0) < 1e-9

    def test_residual_beats_feasible_baseline(self, rng):
        for _ in range(20):
            d = random_aoa(rng)
            mesh = aoa_mesh(d, 8)
            bf = ls_beamformer(mesh, 8)
            A = _steering_matrix_from_angles(mesh.theta, mesh.phi, 8).conj().T
            baseline = steering_vector(d, 8) / 8.0
            res_ls = np.sum(np.abs(A @ bf.weights - mesh.desired) ** 2)
            res_base = np.sum(np.abs(A @ baseline - mesh.desired) ** 2)
            assert res_ls <= res_base

    def test_fit_residual_matches_dense_oracle(self, rng):
        for _ in range(10):
            mesh = aoa_mesh(random_aoa(rng), 6)
            bf = ls_beamformer(mesh, 6)
            A = _steering_matrix_from_angles(mesh.theta, mesh.phi, 6).conj().T
            oracle, *_ = np.linalg.lstsq(A, mesh.desired.astype(complex), rcond=None)
            res_oracle = np.sum(np.abs(A @ oracle - mesh.desired) ** 2)
            assert bf.fit_residual == pytest.approx(res_oracle, rel=1e-8)

    def test_refinement_never_worse_than_plain_solve(self, rng):
        d = random_aoa(rng)
        mesh = aoa_mesh(d, 8)
        plain = ls_beamformer(mesh, 8, iterations=0)
        refined = ls_beamformer(mesh, 8, iterations=10)
        assert refined.fit_residual <= plain.fit_residual + 1e-12


class TestCaponBeamformer:
    def test_boresight_uniform_weights(self):
        w = capon_beamformer(AoA(0.0, 0.0), 8).weights
        assert np.allclose(w, 1.0 / 64.0)

    def test_distortionless_constraint(self, rng):
        for _ in range(100):
            d = random_aoa(rng)
            bf = capon_beamformer(d, 8)
            gain = bf.weights.conj() @ steering_vector(d, 8)
            assert abs(gain - 1.0) < 1e-12

    def test_loading_insensitivity(self, rng):
        d = random_aoa(rng)
        w_small = capon_beamformer(d, 8, loading=1e-4).weights
        w_large = capon_beamformer(d, 8, loading=1e-2).weights
        assert np.allclose(w_small, w_large, atol=1e-9)

    def test_rejects_non_positive_loading(self):
        with pytest.raises(ValueError):
            capon_beamformer(AoA(0.1, 0.1), 4, loading=0.0)

    def test_main_lobe_dominance(self, rng):
        # Gain magnitude at the intended AoA is globally maximal; check it
        # against mesh AoAs more than one HPBW away for moderate elevations.
        width = hpbw(8)
        for _ in range(10):
            d = random_aoa(rng, theta_max=math.pi / 3)
            bf = capon_beamformer(d, 8)
            mesh = aoa_mesh(d, 8)
            G = _steering_matrix_from_angles(mesh.theta, mesh.phi, 8)
            gains = np.abs(beam_pattern(G, bf))
            far = np.hypot(mesh.theta - d.theta, mesh.phi - d.phi) > width
            assert gains[0] >= np.max(gains[far]) - 1e-12


def test_global_phase_immunity(rng):
    # Shifting the steering convention by a constant phase leaves |pattern|
    # untouched.
    d = random_aoa(rng)
    others = [random_aoa(rng) for _ in range(6)]
    G = steering_matrix(others, 8)
    w = capon_beamformer(d, 8).weights
    shift = np.exp(1j * 0.7)
    assert np.allclose(np.abs(beam_pattern(G * shift, w * shift)), np.abs(beam_pattern(G, w)))
