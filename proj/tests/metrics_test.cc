/*
 * Copyright 2026 The shelora Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "shelora/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracle.h"
#include "shelora/errors.h"

namespace shelora::metrics {
namespace {

using shelora::testing::gaussian;

// Direct transcription of the Gaussian-KDE plug-in estimate, in nats.
double naive_mi(const std::vector<double>& x, const std::vector<double>& y, double h) {
  const double n = static_cast<double>(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double px = 0.0;
    double py = 0.0;
    double pxy = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double kx = std::exp(-0.5 * std::pow((x[i] - x[j]) / h, 2)) /
                        (std::sqrt(2.0 * M_PI) * h);
      const double ky = std::exp(-0.5 * std::pow((y[i] - y[j]) / h, 2)) /
                        (std::sqrt(2.0 * M_PI) * h);
      px += kx / n;
      py += ky / n;
      pxy += kx * ky / n;
    }
    total += std::log(pxy / (px * py));
  }
  return total / n;
}

std::vector<double> normals(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

TEST(KdeMutualInfo, MatchesNaiveEstimate) {
  std::mt19937_64 rng(1);
  const auto x = normals(60, rng);
  auto y = normals(60, rng);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.7 * x[i] + 0.3 * y[i];
  MiOptions nats;
  nats.unit = MiUnit::kNats;
  EXPECT_NEAR(kde_mutual_info(x, y, nats).value, naive_mi(x, y, 0.2), 1e-10);
  EXPECT_NEAR(kde_mutual_info(x, y).value, naive_mi(x, y, 0.2) / std::log(2.0), 1e-10);
}

TEST(KdeMutualInfo, IndependentSamplesNearZero) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed);
    const auto x = normals(10000, rng);
    const auto y = normals(10000, rng);
    const auto mi = kde_mutual_info(x, y);
    EXPECT_LT(std::abs(mi.value), 0.05) << "seed " << seed;
    EXPECT_EQ(mi.sample_count, 10000u);
  }
}

TEST(KdeMutualInfo, IdenticalSamplesStronglyDependent) {
  std::mt19937_64 rng(2);
  const auto x = normals(2000, rng);
  EXPECT_GT(kde_mutual_info(x, x).value, 1.0);
}

TEST(KdeMutualInfo, ConstantPartnerNearZero) {
  std::mt19937_64 rng(3);
  const auto x = normals(2000, rng);
  const std::vector<double> y(2000, 0.5);
  EXPECT_NEAR(kde_mutual_info(x, y).value, 0.0, 1e-9);
}

TEST(KdeMutualInfo, SymmetricUnderSameSelection) {
  std::mt19937_64 rng(4);
  const auto x = normals(3000, rng);
  auto y = normals(3000, rng);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
  MiOptions o;
  o.cap = 1000;
  o.seed = 17;
  EXPECT_NEAR(kde_mutual_info(x, y, o).value, kde_mutual_info(y, x, o).value, 1e-9);
  EXPECT_EQ(kde_mutual_info(x, y, o).sample_count, 1000u);
}

TEST(KdeMutualInfo, InputValidation) {
  const std::vector<double> one{1.0};
  const std::vector<double> two{1.0, 2.0};
  const std::vector<double> three{1.0, 2.0, 3.0};
  EXPECT_THROW(kde_mutual_info(one, one), ValidationError);
  EXPECT_THROW(kde_mutual_info(two, three), ShapeError);
  const std::vector<double> bad{1.0, std::nan("")};
  EXPECT_THROW(kde_mutual_info(bad, two), DomainError);
}

sensitivity::ChannelScores column_scores(const Matrix& w) {
  return sensitivity::channel_importance(w, Matrix::identity(w.cols()));
}

TEST(LeakageCurve, EndpointsAndMonotoneMax) {
  const Matrix w = planted_heavy_matrix(16, 64, 5, 4.0, 9);
  const std::vector<double> gammas{0.0, 0.1, 0.25, 0.5, 1.0};
  const auto curve = leakage_curve(w, column_scores(w), Strategy::kMax, gammas);
  ASSERT_EQ(curve.size(), gammas.size());
  EXPECT_EQ(curve.front().masked, 0u);
  EXPECT_EQ(curve.back().masked, 64u);
  for (const auto& p : curve) EXPECT_LE(p.mi, curve.front().mi + 1e-12);
  EXPECT_NEAR(curve.back().mi, 0.0, 1e-9);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_LE(curve[i].mi, curve[i - 1].mi + 0.02);
  }
}

TEST(LeakageCurve, PlantedOrderingHoldsMostSeeds) {
  int ok = 0;
  const double gamma = 5.0 / 64.0;
  const std::vector<double> gammas{gamma};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix w = planted_heavy_matrix(16, 64, 5, 4.0, seed);
    const auto s = column_scores(w);
    const double mx = leakage_curve(w, s, Strategy::kMax, gammas)[0].mi;
    const double rnd = leakage_curve(w, s, Strategy::kRandom, gammas, {}, seed + 100)[0].mi;
    const double mn = leakage_curve(w, s, Strategy::kMin, gammas)[0].mi;
    if (mx < rnd && rnd < mn) ++ok;
  }
  EXPECT_GE(ok, 18);
}

TEST(LeakageCurve, RejectsDescendingGammas) {
  const Matrix w = planted_heavy_matrix(4, 8, 1, 4.0, 1);
  const std::vector<double> gammas{0.5, 0.1};
  EXPECT_THROW(leakage_curve(w, column_scores(w), Strategy::kMax, gammas), ValidationError);
}

TEST(MaskingOrder, Strategies) {
  const sensitivity::ChannelScores s{{0.3, 0.9, 0.1, 0.5}};
  EXPECT_EQ(masking_order(s, Strategy::kMax, 0), (std::vector<std::size_t>{1, 3, 0, 2}));
  EXPECT_EQ(masking_order(s, Strategy::kMin, 0), (std::vector<std::size_t>{2, 0, 3, 1}));
  auto r = masking_order(s, Strategy::kRandom, 5);
  EXPECT_EQ(r, masking_order(s, Strategy::kRandom, 5));
  std::sort(r.begin(), r.end());
  EXPECT_EQ(r, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(parse_strategy("random"), Strategy::kRandom);
  EXPECT_THROW(parse_strategy("median"), ValidationError);
}

TEST(Crlb, HandExample) {
  EXPECT_NEAR(crlb_bound({2, 10, 0.5, 1, 1, 0}), 0.8, 1e-12);
}

TEST(Crlb, FullyEncryptedUsesPriorOnly) {
  EXPECT_DOUBLE_EQ(crlb_bound({3, 10, 1.0, 1, 5, 2}), 9.0 / 2.0);
}

TEST(Crlb, NoInformationIsInfinite) {
  EXPECT_EQ(crlb_bound({2, 10, 0.5, 1, 0, 0}), std::numeric_limits<double>::infinity());
}

TEST(Crlb, MonotonicityGrid) {
  for (double gamma = 0.0; gamma < 1.0; gamma += 0.1) {
    for (double s2 = 0.1; s2 < 3.0; s2 += 0.3) {
      for (double grad = 0.1; grad < 3.0; grad += 0.3) {
        const BoundInputs base{4, 32, gamma, s2, grad, 0.5};
        BoundInputs g = base;
        g.gamma = std::min(1.0, gamma + 0.05);
        BoundInputs s = base;
        s.s2 = s2 + 0.1;
        BoundInputs d = base;
        d.grad_max_sq = grad + 0.1;
        EXPECT_GE(crlb_bound(g), crlb_bound(base));
        EXPECT_GE(crlb_bound(s), crlb_bound(base));
        EXPECT_LE(crlb_bound(d), crlb_bound(base));
      }
    }
  }
}

TEST(Crlb, InvalidInputsRejected) {
  EXPECT_THROW(crlb_bound({2, 10, 1.5, 1, 1, 0}), ValidationError);
  EXPECT_THROW(crlb_bound({2, -1, 0.5, 1, 1, 0}), ValidationError);
}

TEST(PermutationNoise, ConstantRowsGiveZero) {
  Matrix g(3, 8);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 8; ++c) g(r, c) = static_cast<double>(r + 1);
  }
  std::mt19937_64 rng(1);
  const auto rep = permutation_noise_check(g, gaussian(3, 8, rng), 200, 3);
  EXPECT_EQ(rep.analytic_var, 0.0);
  EXPECT_NEAR(rep.empirical_var, 0.0, 1e-20);
  EXPECT_NEAR(rep.mean, 0.0, 1e-12);
}

TEST(PermutationNoise, SmallMatrixAgainstExactVariance) {
  std::mt19937_64 rng(2);
  const Matrix g = gaussian(4, 64, rng);
  const auto rep = permutation_noise_check(g, g, 10000, 5);
  EXPECT_NEAR(rep.empirical_var / rep.exact_var, 1.0, 0.05);
  // The per-row formula drops cross-row terms, which are small here.
  EXPECT_NEAR(rep.analytic_var / rep.exact_var, 1.0, 0.1);
}

TEST(PermutationNoise, ExactVarianceMatchesEnumeration) {
  // All 4! permutations of a 2 × 4 instance.
  const Matrix g{{1, 4, 2, 7}, {0, 3, -1, 2}};
  const Matrix q{{2, -1, 0, 5}, {1, 1, 3, -2}};
  std::vector<std::size_t> p{0, 1, 2, 3};
  double base = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) base += g.data()[i] * q.data()[i];
  std::vector<double> vals;
  do {
    double s = 0.0;
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t k = 0; k < 4; ++k) s += q(r, k) * g(r, p[k]);
    }
    vals.push_back(s - base);
  } while (std::next_permutation(p.begin(), p.end()));
  double mean = 0.0;
  for (double v : vals) mean += v / 24.0;
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean) / 24.0;
  EXPECT_NEAR(permutation_exact_var(g, q), var, 1e-10);
}

TEST(PermutationNoise, AnalyticVarianceInvariantToRowShifts) {
  std::mt19937_64 rng(3);
  const Matrix g = gaussian(3, 10, rng);
  const Matrix q = gaussian(3, 10, rng);
  Matrix gs = g;
  Matrix qs = q;
  for (std::size_t c = 0; c < 10; ++c) {
    gs(0, c) += 5.0;
    qs(2, c) -= 3.0;
  }
  EXPECT_NEAR(permutation_analytic_var(gs, qs), permutation_analytic_var(g, q), 1e-9);
}

TEST(PermutationNoise, RejectsNarrowOrMismatched) {
  EXPECT_THROW(permutation_noise_check(Matrix(2, 2), Matrix(2, 2), 10), ValidationError);
  EXPECT_THROW(permutation_noise_check(Matrix(2, 4), Matrix(3, 4), 10), ShapeError);
}

TEST(MaskedUtility, MaskingNothingChangesNothing) {
  std::mt19937_64 rng(4);
  const Matrix w0 = gaussian(3, 6, rng);
  const client::AdapterPair ad{gaussian(3, 2, rng), gaussian(2, 6, rng), 2};
  const client::LocalDataset data{gaussian(10, 6, rng), gaussian(10, 3, rng)};
  const auto u = masked_utility(w0, ad, {}, data);
  EXPECT_EQ(u.true_loss, u.masked_loss);
  const std::vector<std::size_t> cols{1, 4};
  const auto v = masked_utility(w0, ad, cols, data);
  EXPECT_NE(v.true_loss, v.masked_loss);
}

}  // namespace
}  // namespace shelora::metrics
