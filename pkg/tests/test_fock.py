"""Fock engine tests, checked against independent brute-force oracles."""

import math
from itertools import combinations_with_replacement, permutations

import numpy as np
import pytest

from photoncloud.fock import (
    ContractError,
    FockState,
    Interferometer,
    PostSelectionRule,
    SampleBatch,
    SimulationLimitError,
    SourceNoise,
    apply_postselection,
    decode_dual_rail,
    dual_rail_validity_rule,
    encode_dual_rail,
    output_distribution,
    output_probability,
    permanent,
    sample,
)


def permanent_bruteforce(a: np.ndarray) -> complex:
    """Factorial-time permutation-sum definition; the independent oracle."""
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    total = 0.0 + 0j
    for p in permutations(range(n)):
        prod = 1.0 + 0j
        for i in range(n):
            prod *= a[i, p[i]]
        total += prod
    return total


def amplitude_bruteforce(u, in_occ, out_occ) -> complex:
    """Transition amplitude by explicit photon-assignment sum."""
    in_modes = [m for m, o in enumerate(in_occ) for _ in range(o)]
    out_modes = [m for m, o in enumerate(out_occ) for _ in range(o)]
    n = len(in_modes)
    total = 0.0 + 0j
    for p in permutations(range(n)):
        prod = 1.0 + 0j
        for k in range(n):
            prod *= u[out_modes[p[k]], in_modes[k]]
        total += prod
    norm = 1.0
    for o in list(in_occ) + list(out_occ):
        norm *= math.factorial(o)
    return total / math.sqrt(norm)


def haar_unitary(m: int, rng) -> np.ndarray:
    z = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r))).conj()


BALANCED = Interferometer(np.array([[1, 1], [1, -1]]) / np.sqrt(2))


class TestPermanent:
    def test_identity(self):
        assert permanent(np.eye(3)) == pytest.approx(1.0)

    def test_all_ones_2x2(self):
        assert permanent(np.ones((2, 2))) == pytest.approx(2.0)

    def test_matches_bruteforce_random_4x4(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        assert permanent(a) == pytest.approx(permanent_bruteforce(a), rel=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_matches_bruteforce_all_sizes(self, n):
        rng = np.random.default_rng(100 + n)
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        ref = permanent_bruteforce(a)
        assert abs(permanent(a) - ref) <= 1e-12 * max(1.0, abs(ref))

    def test_empty_matrix(self):
        assert permanent(np.zeros((0, 0))) == pytest.approx(1.0)

    def test_size_limit(self):
        with pytest.raises(SimulationLimitError):
            permanent(np.eye(21))


class TestOutputProbability:
    def test_identity_single_photon(self):
        u = Interferometer(np.eye(3))
        p = output_probability(u, FockState((1, 0, 0)), FockState((1, 0, 0)))
        assert p == pytest.approx(1.0)

    def test_hom_suppression(self):
        p = output_probability(BALANCED, FockState((1, 1)), FockState((1, 1)))
        assert p == pytest.approx(0.0, abs=1e-14)

    def test_hom_bunching(self):
        p20 = output_probability(BALANCED, FockState((1, 1)), FockState((2, 0)))
        p02 = output_probability(BALANCED, FockState((1, 1)), FockState((0, 2)))
        assert p20 == pytest.approx(0.5)
        assert p02 == pytest.approx(0.5)

    def test_photon_number_mismatch(self):
        u = Interferometer(np.eye(2))
        with pytest.raises(ContractError):
            output_probability(u, FockState((1, 0)), FockState((1, 1)))

    def test_three_photon_distribution_vs_bruteforce(self):
        rng = np.random.default_rng(42)
        u = haar_unitary(6, rng)
        intf = Interferometer(u)
        inp = FockState((1, 1, 1, 0, 0, 0))
        states, probs = output_distribution(intf, inp)
        tvd = 0.0
        for s, p in zip(states, probs):
            ref = abs(amplitude_bruteforce(u, inp.occupations, s.occupations)) ** 2
            tvd += abs(p - ref)
        assert tvd / 2 < 1e-10
        assert probs.sum() == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("n_photons", [1, 2, 3, 4])
    def test_distribution_normalized(self, n_photons):
        rng = np.random.default_rng(n_photons)
        u = Interferometer(haar_unitary(5, rng))
        occ = [0] * 5
        for k in range(n_photons):
            occ[k % 5] += 1
        _, probs = output_distribution(u, FockState(tuple(occ)))
        assert probs.sum() == pytest.approx(1.0, abs=1e-9)


class TestDualRail:
    def test_encode_zero_zero(self):
        assert encode_dual_rail("00", 2) == FockState((1, 0, 1, 0))

    def test_decode_one_one(self):
        assert decode_dual_rail(FockState((0, 1, 0, 1))) == "11"

    def test_decode_bunching_invalid(self):
        assert decode_dual_rail(FockState((2, 0, 0, 0))) is None

    @pytest.mark.parametrize("n_qubits", [1, 2, 3, 6])
    def test_roundtrip_all_basis_states(self, n_qubits):
        for idx in range(2**n_qubits):
            bits = format(idx, f"0{n_qubits}b")
            assert decode_dual_rail(encode_dual_rail(bits, n_qubits)) == bits


class TestPostselection:
    def test_zero_threshold_unchanged(self):
        batch = SampleBatch({FockState((1, 0)): 3, FockState((0, 0)): 2}, 5, 5)
        out = apply_postselection(batch, PostSelectionRule())
        assert out.counts == batch.counts
        assert out.requested == 5

    def test_dual_rail_validity(self):
        rule = dual_rail_validity_rule(2)
        assert rule.accepts(FockState((1, 0, 1, 0)))
        assert not rule.accepts(FockState((1, 1, 0, 0)))

    def test_threshold_matches_bruteforce_recount(self):
        rng = np.random.default_rng(11)
        states = [
            FockState(tuple(int(v) for v in rng.integers(0, 3, size=4)))
            for _ in range(30)
        ]
        counts = {}
        for s in states:
            counts[s] = counts.get(s, 0) + int(rng.integers(1, 10))
        total = sum(counts.values())
        batch = SampleBatch(counts, total, total)
        k = 3
        out = apply_postselection(batch, PostSelectionRule(min_photons=k))
        expected = sum(c for s, c in counts.items() if sum(s.occupations) >= k)
        assert out.completed == expected
        assert out.requested == total


class TestSampling:
    def test_ideal_hom_no_coincidence(self):
        noise = SourceNoise.ideal(2)
        batch = sample(BALANCED, FockState((1, 1)), noise, 10_000, seed=1)
        assert batch.fraction(FockState((1, 1))) == 0.0
        assert batch.completed == 10_000

    def test_distinguishable_hom_half_coincidence(self):
        noise = SourceNoise(0.0, 0.0, (1.0, 1.0))
        n = 100_000
        batch = sample(BALANCED, FockState((1, 1)), noise, n, seed=2)
        frac = batch.fraction(FockState((1, 1)))
        sigma = math.sqrt(0.25 / n)
        assert abs(frac - 0.5) < 3 * sigma

    def test_total_loss_vacuum(self):
        noise = SourceNoise(1.0, 0.0, (0.0, 0.0))
        batch = sample(BALANCED, FockState((1, 1)), noise, 500, seed=3)
        assert batch.counts == {FockState((0, 0)): 500}

    def test_seed_reproducible(self):
        rng = np.random.default_rng(5)
        u = Interferometer(haar_unitary(4, rng))
        noise = SourceNoise(0.9, 0.02, (0.8, 0.9, 0.85, 0.95))
        a = sample(u, FockState((1, 0, 1, 0)), noise, 2000, seed=77)
        b = sample(u, FockState((1, 0, 1, 0)), noise, 2000, seed=77)
        assert a.counts == b.counts

    def test_converges_to_exact_distribution(self):
        rng = np.random.default_rng(8)
        u = Interferometer(haar_unitary(4, rng))
        inp = FockState((1, 1, 0, 0))
        noise = SourceNoise.ideal(4)
        n = 100_000
        batch = sample(u, inp, noise, n, seed=4)
        states, probs = output_distribution(u, inp)
        tvd = 0.0
        for s, p in zip(states, probs):
            tvd += abs(batch.fraction(s) - p)
        assert tvd / 2 < 5 / math.sqrt(n)

    def test_threshold_counting_clamps(self):
        noise = SourceNoise.ideal(2)
        batch = sample(BALANCED, FockState((1, 1)), noise, 2000, seed=6, counting="threshold")
        # bunched pairs appear as single clicks under threshold detection
        for s in batch.counts:
            assert max(s.occupations) <= 1

    def test_g2_injects_extra_photons(self):
        noise = SourceNoise(1.0, 0.3, (1.0, 1.0))
        batch = sample(BALANCED, FockState((1, 0)), noise, 20_000, seed=9)
        three = sum(c for s, c in batch.counts.items() if s.photon_count == 2)
        assert three / batch.completed == pytest.approx(0.3, abs=0.02)
