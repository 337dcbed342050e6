import numpy as np
import pytest
from scipy import stats

from afd.exceptions import DomainError
from afd.model import (BinarySequenceModel, TwoBlockBinomialModel,
                       counts_from_binary, two_block_covariates)


def finite_diff_scalar(f, t, h=1e-6):
    return (f(t + h) - f(t - h)) / (2 * h)


class TestEnumeration:
    def test_two_block_1_1(self):
        model = TwoBlockBinomialModel(1, 1)
        assert model.outcomes() == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_two_block_2_2_size(self):
        assert TwoBlockBinomialModel(2, 2).n_outcomes() == 9

    def test_binary_sequence_size(self):
        assert BinarySequenceModel(3).n_outcomes() == 8

    def test_ordering_stable(self):
        model = TwoBlockBinomialModel(2, 3)
        first = list(model.outcomes())
        assert list(model.outcomes()) == first
        for k, y in enumerate(first):
            assert model.outcome_index(y) == k

    def test_binary_index_roundtrip(self):
        model = BinarySequenceModel(4)
        for k, y in enumerate(model.outcomes()):
            assert model.outcome_index(y) == k


class TestLogProb:
    def test_symmetric_point(self):
        model = TwoBlockBinomialModel(1, 1, error="probit")
        assert model.log_prob((0, 0), None, 0.0, 0.0) == pytest.approx(np.log(0.25), abs=1e-12)

    def test_printed_product_form(self):
        model = TwoBlockBinomialModel(2, 2, error="probit")
        phi0, phi1 = stats.norm.cdf(0.0), stats.norm.cdf(1.0)
        expected = np.log(2 * phi0 * (1 - phi0) * 2 * phi1 * (1 - phi1))
        assert model.log_prob((1, 1), None, 0.0, 1.0) == pytest.approx(expected, abs=1e-12)

    def test_no_underflow_at_t_512(self):
        model = TwoBlockBinomialModel(256, 256, error="probit")
        val = model.log_prob((128, 128), None, 0.0, 1.0)
        assert np.isfinite(val)
        # high-precision evaluation of the same product of binomial pmfs
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 40
        phi = mpmath.ncdf
        def binom_term(T, y, p):
            return (mpmath.binomial(T, y) * p ** y * (1 - p) ** (T - y))
        exact = mpmath.log(binom_term(256, 128, phi(0.0))
                           * binom_term(256, 128, phi(1.0)))
        assert val == pytest.approx(float(exact), rel=1e-12)

    def test_invalid_outcome_rejected(self):
        model = TwoBlockBinomialModel(2, 2)
        with pytest.raises(DomainError):
            model.log_prob((3, 0), None, 0.0, 1.0)
        with pytest.raises(DomainError):
            BinarySequenceModel(3).log_prob((0, 1), None, 0.0, 1.0)

    def test_probabilities_sum_to_one(self, rng):
        models = [TwoBlockBinomialModel(2, 3, error=k)
                  for k in ("probit", "logit", "logit_std", "laplace")]
        models.append(BinarySequenceModel(4, error="probit"))
        for model in models:
            x = rng.normal(size=4) if isinstance(model, BinarySequenceModel) else None
            for _ in range(5):
                alpha = rng.normal()
                theta = rng.normal()
                table = model.log_prob_table(x, np.array([alpha]), theta)
                assert np.exp(table).sum() == pytest.approx(1.0, abs=1e-10)


class TestScore:
    def test_logit_closed_form(self):
        model = TwoBlockBinomialModel(1, 1, error="logit")
        # y1 - T1 F(theta + alpha) with y = (0, 1), alpha = theta = 0
        assert model.score((0, 1), None, 0.0, 0.0)[0] == pytest.approx(0.5, abs=1e-12)

    def test_probit_hand_derivative(self):
        model = TwoBlockBinomialModel(2, 2, error="probit")
        expected = 2 * stats.norm.pdf(1.0) / stats.norm.cdf(1.0)
        assert model.score((2, 2), None, 0.0, 1.0)[0] == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("error", ["probit", "logit", "logit_std", "laplace"])
    def test_matches_finite_difference_two_block(self, error, rng):
        model = TwoBlockBinomialModel(2, 3, error=error)
        for _ in range(25):
            y = (int(rng.integers(0, 3)), int(rng.integers(0, 4)))
            alpha = float(rng.normal())
            theta = float(rng.normal())
            fd = finite_diff_scalar(lambda t: model.log_prob(y, None, alpha, t), theta)
            an = model.score(y, None, alpha, theta)[0]
            assert an == pytest.approx(fd, rel=2e-6, abs=2e-6)

    def test_matches_finite_difference_binary_sequence(self, rng):
        model = BinarySequenceModel(4, error="probit")
        x = rng.normal(0.5, 0.5, size=4)
        for _ in range(25):
            y = tuple(int(v) for v in rng.integers(0, 2, size=4))
            alpha = float(rng.normal())
            theta = float(rng.normal())
            fd = finite_diff_scalar(lambda t: model.log_prob(y, x, alpha, t), theta)
            an = model.score(y, x, alpha, theta)[0]
            assert an == pytest.approx(fd, rel=2e-6, abs=2e-6)

    def test_score_table_consistency(self, rng):
        model = TwoBlockBinomialModel(2, 2, error="probit")
        alphas = np.linspace(-2, 2, 7)
        table = model.score_table(None, alphas, 0.7)
        for k, y in enumerate(model.outcomes()):
            for j, a in enumerate(alphas):
                assert table[0, k, j] == pytest.approx(model.score(y, None, a, 0.7)[0])


class TestSimulate:
    def test_extreme_alpha_corners(self, rng):
        model = TwoBlockBinomialModel(2, 2, error="probit")
        assert model.simulate(None, 30.0, 0.0, rng) == (2, 2)
        assert model.simulate(None, -30.0, 0.0, rng) == (0, 0)

    def test_frequencies_match_likelihood(self):
        model = TwoBlockBinomialModel(1, 1, error="probit")
        rng = np.random.default_rng(7)
        n = 10 ** 6
        counts = np.zeros(4)
        p0 = model.error.cdf(0.3)
        p1 = model.error.cdf(1.3)
        y0 = rng.binomial(1, p0, size=n)
        y1 = rng.binomial(1, p1, size=n)
        for k, (a, b) in enumerate(model.outcomes()):
            counts[k] = np.sum((y0 == a) & (y1 == b))
        probs = np.exp(model.log_prob_table(None, np.array([0.3]), 1.0))[:, 0]
        for k in range(4):
            se = np.sqrt(probs[k] * (1 - probs[k]) / n)
            assert abs(counts[k] / n - probs[k]) < 4 * se

    def test_binary_sequence_simulation_marginals(self):
        model = BinarySequenceModel(3, error="logit")
        rng = np.random.default_rng(13)
        x = np.array([0.0, 0.5, 1.0])
        draws = [model.simulate(x, 0.2, 1.0, rng) for _ in range(20000)]
        freq = np.mean(np.asarray(draws), axis=0)
        expected = model.error.cdf(x * 1.0 + 0.2)
        assert np.allclose(freq, expected, atol=4 * np.sqrt(0.25 / 20000))


class TestCountsFromBinary:
    def test_examples(self):
        assert counts_from_binary((1, 0, 0, 1), 2) == (1, 1)
        assert counts_from_binary((0, 0, 0, 0), 3) == (0, 0)
        assert counts_from_binary((1, 1, 1), 1) == (1, 2)

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            counts_from_binary((1, 0), 3)


@pytest.mark.parametrize("T0,T1", [(1, 1), (2, 2), (1, 3), (3, 5)])
def test_pushforward_consistency(T0, T1):
    """Summing sequence probabilities within count classes reproduces the
    two-block likelihood, exhaustively for T <= 8."""
    seq = BinarySequenceModel(T0 + T1, error="probit")
    blk = TwoBlockBinomialModel(T0, T1, error="probit")
    x = two_block_covariates(T0, T1)
    theta, alpha = 0.8, -0.4
    seq_probs = np.exp(seq.log_prob_table(x, np.array([alpha]), theta))[:, 0]
    collapsed = np.zeros(blk.n_outcomes())
    for k, ystar in enumerate(seq.outcomes()):
        collapsed[blk.outcome_index(counts_from_binary(ystar, T0))] += seq_probs[k]
    blk_probs = np.exp(blk.log_prob_table(None, np.array([alpha]), theta))[:, 0]
    assert np.allclose(collapsed, blk_probs, atol=1e-12)
