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

#include "shelora/client.h"

#include <random>

#include <gtest/gtest.h>

#include "oracle.h"
#include "protocol_harness.h"
#include "shelora/errors.h"

namespace shelora::client {
namespace {

using shelora::testing::gaussian;
using shelora::testing::random_rank;
using shelora::testing::rel_err;

LocalDataset teacher_data(const Matrix& w_star, std::size_t samples,
                          std::mt19937_64& rng) {
  LocalDataset d{gaussian(samples, w_star.cols(), rng), Matrix()};
  d.y = linalg::matmul(d.x, w_star.transpose());
  return d;
}

TEST(InitAdapter, ShapesAndZeroB) {
  const auto ad = init_adapter(4, 10, 3, 1);
  EXPECT_EQ(ad.b, Matrix::zeros(4, 3));
  EXPECT_EQ(ad.a.rows(), 3u);
  EXPECT_EQ(ad.a.cols(), 10u);
  EXPECT_EQ(ad.product(), Matrix::zeros(4, 10));
}

TEST(LocalTrain, ZeroStepsOrZeroLrUnchanged) {
  std::mt19937_64 rng(1);
  const Matrix w0 = gaussian(3, 6, rng);
  const auto data = teacher_data(w0 + gaussian(3, 6, rng), 20, rng);
  const auto ad = init_adapter(3, 6, 2, 2);
  const auto a = local_train(ad, w0, data, 0, 0.05);
  EXPECT_EQ(a.a, ad.a);
  EXPECT_EQ(a.b, ad.b);
  const auto b = local_train(ad, w0, data, 10, 0.0);
  EXPECT_EQ(b.a, ad.a);
  EXPECT_EQ(b.b, ad.b);
}

TEST(LocalTrain, TeacherStudentLossDecreases) {
  std::mt19937_64 rng(2);
  const Matrix w0 = gaussian(4, 8, rng, 0.3);
  const Matrix w_star = w0 + random_rank(4, 8, 2, rng);
  const auto data = teacher_data(w_star, 64, rng);
  const auto ad = init_adapter(4, 8, 2, 3);
  const double before = mse_loss(w0, ad, data);
  const auto trained = local_train(ad, w0, data, 200, 0.05);
  EXPECT_LT(mse_loss(w0, trained, data), before);
}

TEST(LocalTrain, DivergenceRaisesTrainingError) {
  std::mt19937_64 rng(3);
  const Matrix w0 = gaussian(4, 8, rng);
  const auto data = teacher_data(w0 + gaussian(4, 8, rng, 5.0), 32, rng);
  EXPECT_THROW(local_train(init_adapter(4, 8, 2, 1), w0, data, 200, 50.0),
               TrainingError);
}

TEST(LocalTrain, ShapeMismatchRejected) {
  const auto ad = init_adapter(3, 5, 2, 1);
  EXPECT_THROW(local_train(ad, Matrix(3, 6), LocalDataset{Matrix(2, 6), Matrix(2, 3)}, 1, 0.1),
               ShapeError);
}

TEST(BuildBid, ZeroBudget) {
  const auto bid = build_bid(0, {{1, 2, 3}}, DeviceProfile{1, 4, 0.0, 0.0}, {7});
  EXPECT_EQ(bid.k, 0u);
  EXPECT_TRUE(bid.columns.empty());
}

TEST(BuildBid, TopTwoWithOrderConsistentCodes) {
  const auto bid = build_bid(3, {{1, 10, 5}}, DeviceProfile{1, 4, 2.0 / 3.0, 0.0}, {7});
  EXPECT_EQ(bid.client_id, 3u);
  EXPECT_EQ(bid.rank, 4u);
  EXPECT_EQ(bid.k, 2u);
  EXPECT_EQ(bid.columns, (std::vector<std::size_t>{1, 2}));
  ASSERT_EQ(bid.codes.size(), 2u);
  EXPECT_GT(bid.codes[0], bid.codes[1]);
}

TEST(BuildBid, DeterministicAcrossClients) {
  const sensitivity::ChannelScores s{{0.3, 0.9, 0.1, 0.5}};
  const DeviceProfile p{1, 4, 0.5, 0.0};
  EXPECT_EQ(build_bid(0, s, p, {5}).codes, build_bid(1, s, p, {5}).codes);
}

TEST(SwapPlan, EmptyResIsIdentity) {
  const auto plan = make_swap_plan(5, {});
  EXPECT_EQ(plan.perm, linalg::identity_permutation(5));
  EXPECT_EQ(plan.n_plain, 5u);
}

TEST(SwapPlan, HandExample) {
  const std::vector<std::size_t> res{3, 1};
  const auto plan = make_swap_plan(4, res);
  EXPECT_EQ(plan.perm, (Permutation{0, 2, 1, 3}));
  EXPECT_EQ(plan.n_plain, 2u);
  EXPECT_EQ(plan.encrypted_columns, (std::vector<std::size_t>{1, 3}));
  const AdapterPair ad{Matrix{{1}}, Matrix{{10, 11, 12, 13}}, 1};
  EXPECT_EQ(apply_swap(ad, plan).a, (Matrix{{10, 12, 11, 13}}));
}

TEST(SwapPlan, RoundTripExact) {
  std::mt19937_64 rng(4);
  const std::vector<std::size_t> res{7, 2, 5};
  const auto plan = make_swap_plan(9, res);
  const AdapterPair ad{gaussian(3, 2, rng), gaussian(2, 9, rng), 2};
  const auto back = undo_swap(apply_swap(ad, plan), plan);
  EXPECT_EQ(back.a, ad.a);
  EXPECT_EQ(back.b, ad.b);
}

TEST(SwapPlan, InvalidResRejected) {
  const std::vector<std::size_t> out_of_range{9};
  const std::vector<std::size_t> dup{1, 1};
  EXPECT_THROW(make_swap_plan(4, out_of_range), ValidationError);
  EXPECT_THROW(make_swap_plan(4, dup), ValidationError);
}

class ClientHeTest : public ::testing::Test {
 protected:
  crypto::SimulatedBackend be;
  crypto::KeyPair keys = be.keygen(crypto::HeParams{}, 11);
  std::mt19937_64 rng{21};
};

TEST_F(ClientHeTest, EncryptUpdateBlockCount) {
  const AdapterPair ad{gaussian(4, 3, rng), gaussian(3, 10, rng), 3};
  const auto upd = encrypt_update(ad, 5, be, keys.public_key, 2);
  EXPECT_EQ(upd.cipher.blocks.size(), 3u);
  EXPECT_EQ(upd.a_plain, linalg::col_range(ad.a, 0, 5));
  EXPECT_EQ(upd.b_plain, ad.b);
  EXPECT_EQ(crypto::decrypt_columns(be, keys.secret_key, upd.cipher),
            linalg::col_range(ad.a, 5, 5));
}

TEST_F(ClientHeTest, EncryptUpdateZeroK) {
  const AdapterPair ad{gaussian(4, 3, rng), gaussian(3, 10, rng), 3};
  const auto upd = encrypt_update(ad, 0, be, keys.public_key, 2);
  EXPECT_TRUE(upd.cipher.blocks.empty());
  EXPECT_EQ(upd.a_plain, ad.a);
}

TEST_F(ClientHeTest, UpdateSerializationRoundTrip) {
  const AdapterPair ad{gaussian(4, 3, rng), gaussian(3, 10, rng), 3};
  auto upd = encrypt_update(ad, 4, be, keys.public_key, 3);
  upd.client_id = 17;
  upd.round = 5;
  const auto bytes = serialize_update(upd, be);
  const auto back = deserialize_update(bytes, be, keys.public_key.params);
  EXPECT_EQ(back.client_id, 17u);
  EXPECT_EQ(back.round, 5u);
  EXPECT_EQ(back.k, 4u);
  EXPECT_EQ(back.b_plain, upd.b_plain);
  EXPECT_EQ(back.a_plain, upd.a_plain);
  EXPECT_EQ(crypto::decrypt_columns(be, keys.secret_key, back.cipher),
            linalg::col_range(ad.a, 6, 4));
  auto corrupt = bytes;
  corrupt[0] ^= 0xff;
  EXPECT_THROW(deserialize_update(corrupt, be, keys.public_key.params), FormatError);
}

TEST_F(ClientHeTest, ReparameterizePlainOnly) {
  const Matrix delta = random_rank(5, 8, 2, rng);
  const auto plan = make_swap_plan(8, {});
  server::AggregatedPlain agg{delta, std::vector<std::size_t>(8, 1)};
  const std::vector<std::size_t> ranks{3};
  const auto slice = server::svd_and_slice(agg, ranks)[0];
  const auto out = reparameterize(slice, crypto::CipherBlockList{5, 8, 0, 2, {}}, be,
                                  keys.secret_key, plan, 0, 3);
  EXPECT_LE(rel_err(out.adapter.product(), delta), 1e-6);
  EXPECT_EQ(out.adapter.rank, 3u);
}

TEST_F(ClientHeTest, ReparameterizeCipherOnlyRankOne) {
  const std::vector<std::size_t> res{1, 4, 6};
  const auto plan = make_swap_plan(8, res);
  const Matrix slab = random_rank(5, 3, 1, rng);
  Matrix permuted(5, 8);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 3; ++c) permuted(r, 5 + c) = slab(r, c);
  }
  const auto list = crypto::encrypt_columns(be, keys.public_key, permuted, 3, 2);
  server::PlainSlice zero{Matrix(5, 1), {0.0}, Matrix(1, 5), false};
  const auto out = reparameterize(zero, list, be, keys.secret_key, plan, 3, 2);
  const Matrix expected = linalg::permute_cols(permuted, plan.inverse);
  EXPECT_LE(rel_err(out.adapter.product(), expected), 1e-6);
  for (std::size_t c : {0, 2, 3, 5, 7}) {
    for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(out.adapter.product()(r, c), 0.0);
  }
}

TEST_F(ClientHeTest, ReparameterizeAllZero) {
  const std::vector<std::size_t> res{2};
  const auto plan = make_swap_plan(4, res);
  const auto list = crypto::encrypt_columns(be, keys.public_key, Matrix(3, 4), 1, 2);
  server::PlainSlice zero{Matrix(3, 1), {0.0}, Matrix(1, 3), false};
  const auto out = reparameterize(zero, list, be, keys.secret_key, plan, 1, 2);
  EXPECT_EQ(out.adapter.b, Matrix::zeros(3, 2));
  EXPECT_EQ(out.adapter.a, Matrix::zeros(2, 4));
}

TEST_F(ClientHeTest, LosslessWhenRankFits) {
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = shelora::testing::random_instance(rng);
    const auto out = shelora::testing::run_round(in, be, keys);
    for (std::size_t i = 0; i < in.adapters.size(); ++i) {
      EXPECT_LE(rel_err(out.reparam[i].adapter.product(), out.expected[i]), 1e-6)
          << "trial " << trial << " client " << i;
    }
  }
}

TEST_F(ClientHeTest, EckartYoungWhenRankExceeded) {
  const std::size_t m = 6;
  const std::size_t n = 10;
  const std::vector<std::size_t> res{0, 3, 8};
  const auto plan = make_swap_plan(n, res);
  const Matrix merged = gaussian(m, n, rng);
  const auto out = refactor_update(merged, plan, 2);
  const auto sv = shelora::testing::singular_values(merged);
  double tail = 0.0;
  for (std::size_t i = 2; i < sv.size(); ++i) tail += sv[i] * sv[i];
  EXPECT_NEAR(out.discarded_energy, tail, 1e-8);
  const Matrix orig = linalg::permute_cols(merged, plan.inverse);
  EXPECT_NEAR(std::pow(linalg::frobenius_norm(out.adapter.product() - orig), 2), tail, 1e-8);
}

TEST_F(ClientHeTest, ColumnPartitionProperty) {
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = shelora::testing::random_instance(rng);
    const auto plan = make_swap_plan(in.n, in.res);
    for (std::size_t i = 0; i < in.adapters.size(); ++i) {
      const auto upd = encrypt_update(apply_swap(in.adapters[i], plan), in.k[i], be,
                                      keys.public_key, in.chunk);
      EXPECT_EQ(upd.a_plain.cols() + upd.cipher.covered, in.n);
    }
  }
}

}  // namespace
}  // namespace shelora::client
