/*
 * Copyright 2026 The DRE Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dre/acm/acm.hpp"
#include "dre/numerics/gradcheck.hpp"
#include "dre/numerics/rng.hpp"
#include "dre/objectives/losses.hpp"

using namespace dre;
using namespace dre::objectives;
using V = Var<double>;

namespace {

V mat(std::size_t rows, std::size_t cols, std::vector<double> v)
{
  return V::leaf(Tensor<double>({rows, cols}, std::move(v)));
}

V scalar(double v)
{
  return V::constant(Tensor<double>::scalar(v));
}

Tensor<double> randn(Rng& rng, Shape shape, double scale = 1.0)
{
  Tensor<double> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

double euclid(const Tensor<double>& f, std::size_t i, std::size_t j)
{
  double acc = 0.0;
  for (std::size_t d = 0; d < f.cols(); ++d) acc += (f.at(i, d) - f.at(j, d)) * (f.at(i, d) - f.at(j, d));
  return std::sqrt(acc);
}

TripletBatch<double> one_triplet(double d_ap, double d_an)
{
  return {mat(1, 1, {0.0}), mat(1, 1, {d_ap}), mat(1, 1, {-d_an})};
}

// Row cosine matrix by direct enumeration.
std::vector<double> cosine_matrix(const Tensor<double>& f)
{
  const std::size_t n = f.rows();
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0, ni = 0.0, nj = 0.0;
      for (std::size_t d = 0; d < f.cols(); ++d) {
        dot += f.at(i, d) * f.at(j, d);
        ni += f.at(i, d) * f.at(i, d);
        nj += f.at(j, d) * f.at(j, d);
      }
      out[i * n + j] = dot / std::sqrt(ni * nj);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("identification loss reference values")
{
  CHECK(id_loss(mat(1, 2, {10, -10}), {0}).value().item() < 1e-4);
  CHECK(id_loss(mat(2, 5, std::vector<double>(10, 0.3)), {1, 4}).value().item() ==
        doctest::Approx(std::log(5.0)).epsilon(1e-14));
  const double oracle = -std::log(std::exp(1.0) / (std::exp(1.0) + std::exp(3.0)));
  CHECK(id_loss(mat(1, 2, {1, 3}), {0}).value().item() == doctest::Approx(oracle).epsilon(1e-14));
  CHECK(oracle == doctest::Approx(2.1269).epsilon(1e-4));
  CHECK_THROWS_AS(id_loss(mat(1, 2, {1, 3}), {2}), std::out_of_range);
  CHECK_THROWS_AS(id_loss(mat(1, 2, {1, 3}), {-1}), std::out_of_range);
}

TEST_CASE("triplet loss reference values")
{
  CHECK(triplet_loss(one_triplet(1, 3), 0.0).value().item() == 0.0);
  CHECK(triplet_loss(one_triplet(3, 1), 0.0).value().item() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(triplet_loss(one_triplet(2, 2), 0.3).value().item() == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("batch-hard mining matches a brute-force scan")
{
  Rng rng(1);
  const Labels labels{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3};
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = randn(rng, {16, 5});
    const auto idx = mine_triplets(f, labels);
    for (std::size_t a = 0; a < 16; ++a) {
      double hardest_pos = -1.0, hardest_neg = 1e300;
      for (std::size_t j = 0; j < 16; ++j) {
        if (j == a) continue;
        if (labels[j] == labels[a]) hardest_pos = std::max(hardest_pos, euclid(f, a, j));
        else hardest_neg = std::min(hardest_neg, euclid(f, a, j));
      }
      CHECK(idx.anchor[a] == a);
      CHECK(labels[idx.positive[a]] == labels[a]);
      CHECK(labels[idx.negative[a]] != labels[a]);
      CHECK(euclid(f, a, idx.positive[a]) == doctest::Approx(hardest_pos).epsilon(1e-12));
      CHECK(euclid(f, a, idx.negative[a]) == doctest::Approx(hardest_neg).epsilon(1e-12));
    }
  }
}

TEST_CASE("mining on separable and degenerate batches")
{
  const Tensor<double> sep({4, 2}, {0, 0, 0.1, 0, 10, 10, 10.1, 10});
  const Labels labels{0, 0, 1, 1};
  const auto idx = mine_triplets(sep, labels);
  for (std::size_t a = 0; a < 4; ++a) CHECK(euclid(sep, a, idx.positive[a]) < euclid(sep, a, idx.negative[a]));
  const auto batch = gather_triplets(V::constant(sep), idx);
  CHECK(triplet_loss(batch, 0.0).value().item() == 0.0);

  const Tensor<double> same({4, 2}, 1.5);
  const auto deg = mine_triplets(same, labels);
  for (std::size_t a = 0; a < 4; ++a) {
    CHECK(euclid(same, a, deg.positive[a]) == 0.0);
    CHECK(euclid(same, a, deg.negative[a]) == 0.0);
  }
}

TEST_CASE("mining rejects identities with a single instance")
{
  CHECK_THROWS_AS(mine_triplets(Tensor<double>({3, 2}, 0.0), {0, 0, 1}), SamplerContractError);
  CHECK_THROWS_AS(mine_triplets(Tensor<double>({2, 2}, 0.0), {0, 0}), SamplerContractError);
}

TEST_CASE("zero-margin triplet vanishes iff every mined triplet is satisfied")
{
  Rng rng(2);
  const Labels labels{0, 0, 1, 1, 2, 2};
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = randn(rng, {6, 3}, trial % 2 == 0 ? 1.0 : 0.2);
    auto shifted = f;
    // Pull clusters apart on odd trials so both outcomes occur.
    if (trial % 2 == 1) {
      for (std::size_t i = 0; i < 6; ++i) shifted.at(i, 0) += 5.0 * static_cast<double>(labels[i]);
    }
    const auto idx = mine_triplets(shifted, labels);
    bool satisfied = true;
    for (std::size_t a = 0; a < 6; ++a) {
      satisfied = satisfied && euclid(shifted, a, idx.positive[a]) <= euclid(shifted, a, idx.negative[a]);
    }
    const double loss = triplet_loss(gather_triplets(V::constant(shifted), idx), 0.0).value().item();
    CHECK(loss >= 0.0);
    CHECK((loss == 0.0) == satisfied);
  }
}

TEST_CASE("representation triplet concatenates integrated and auxiliaries")
{
  Rng rng(3);
  Representations<double> reps;
  reps.primary = V::constant(randn(rng, {4, 3}));
  reps.auxiliary = {V::constant(randn(rng, {4, 3})), V::constant(randn(rng, {4, 3}))};
  reps.integrated = acm::integrate(reps.primary, reps.auxiliary).integrated;
  reps.batch = 4;
  const auto cat = concat_features(reps).value();
  CHECK(cat.shape() == Shape{4, 9});
  for (std::size_t b = 0; b < 4; ++b) {
    CHECK(cat.at(b, 0) == reps.integrated.value().at(b, 0));
    CHECK(cat.at(b, 4) == reps.auxiliary[0].value().at(b, 1));
    CHECK(cat.at(b, 8) == reps.auxiliary[1].value().at(b, 2));
  }
  const auto stack = stack_representations(reps).value();
  CHECK(stack.shape() == Shape{12, 3});
  CHECK(stack.at(5, 1) == reps.auxiliary[0].value().at(1, 1));

  const Labels labels{0, 0, 1, 1};
  const auto idx = mine_triplets(cat, labels);
  const auto direct = triplet_loss(gather_triplets(V::constant(cat), idx), 0.0).value().item();
  CHECK(representation_triplet(reps, labels, 0.0).value().item() == doctest::Approx(direct).epsilon(1e-14));

  double avg = 0.0;
  for (const auto& f : {reps.integrated, reps.auxiliary[0], reps.auxiliary[1]}) {
    avg += triplet_loss(gather_triplets(f, mine_triplets(f.value(), labels)), 0.0).value().item();
  }
  CHECK(representation_triplet(reps, labels, 0.0, TripletMode::kAverage).value().item() ==
        doctest::Approx(avg / 3.0).epsilon(1e-14));
}

TEST_CASE("logit distillation reference values")
{
  CHECK(lld_loss(mat(1, 2, {0, 0}), mat(1, 2, {std::log(3.0), 0}), 1.0).value().item() ==
        doctest::Approx(0.5 * std::log(2.0 / 3.0) + 0.5 * std::log(2.0)).epsilon(1e-14));
  CHECK(lld_loss(mat(1, 2, {0, 0}), mat(1, 2, {std::log(3.0), 0}), 1.0).value().item() ==
        doctest::Approx(0.1438).epsilon(1e-3));
  CHECK(lld_loss(mat(2, 3, {1, 2, 3, -1, 0, 4}), mat(2, 3, {1, 2, 3, -1, 0, 4}), 2.0).value().item() ==
        doctest::Approx(0.0).epsilon(1e-15));
  const double hot = lld_loss(mat(1, 2, {4, -4}), mat(1, 2, {-4, 4}), 1.0).value().item();
  const double warm = lld_loss(mat(1, 2, {4, -4}), mat(1, 2, {-4, 4}), 100.0).value().item();
  CHECK(warm < hot);
  CHECK(warm < 1e-2);
  CHECK_THROWS_AS(lld_loss(mat(1, 2, {0, 0}), mat(1, 3, {0, 0, 0}), 1.0), ShapeError);
  CHECK_THROWS(lld_loss(mat(1, 2, {0, 0}), mat(1, 2, {0, 0}), 0.0));
}

TEST_CASE("distillation targets receive no gradient")
{
  const auto adj = mat(2, 3, {1, 0, 2, 3, 1, 0});
  const auto learner = mat(2, 3, {0, 1, 0, 1, 2, 0});
  const auto g = gradient_of(lld_loss(adj, learner, 2.0), {adj, learner});
  CHECK(g[0].max_abs() == 0.0);
  CHECK(g[1].max_abs() > 0.0);
  const auto g2 = gradient_of(lls_loss(adj, learner), {adj, learner});
  CHECK(g2[0].max_abs() == 0.0);
  const auto sa = mat(4, 2, {1, 0, 0, 1, 1, 1, 2, 1});
  const auto sl = mat(4, 2, {1, 1, 0, 1, 1, 2, 2, 0});
  const auto g3 = gradient_of(consistent_loss(sa, sl), {sa, sl});
  CHECK(g3[0].max_abs() == 0.0);
  CHECK(g3[1].max_abs() > 0.0);
}

TEST_CASE("consistent loss reference values")
{
  const auto fa = mat(2, 2, {1, 0, 0, 1});
  const auto fl = mat(2, 2, {1, 0, 1, 0});
  CHECK(consistent_loss(fa, fl).value().item() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(consistent_loss(fa, fa).value().item() == 0.0);
  CHECK_THROWS_AS(consistent_loss(fa, mat(1, 2, {1, 0})), ShapeError);
}

TEST_CASE("consistent loss matches a direct cosine-matrix evaluation")
{
  Rng rng(4);
  const auto a = randn(rng, {6, 4});
  const auto l = randn(rng, {6, 4});
  const auto ca = cosine_matrix(a);
  const auto cl = cosine_matrix(l);
  double acc = 0.0;
  for (std::size_t i = 0; i < ca.size(); ++i) acc += std::abs(ca[i] - cl[i]);
  CHECK(consistent_loss(V::constant(a), V::constant(l)).value().item() ==
        doctest::Approx(acc / static_cast<double>(ca.size())).epsilon(1e-12));
}

TEST_CASE("consistent loss is invariant to shared rotation and row rescaling")
{
  Rng rng(5);
  const auto a = randn(rng, {6, 3});
  // Rotation about the z axis followed by one about the x axis.
  const double t1 = 0.7, t2 = -1.1;
  const double r[3][3] = {
    {std::cos(t1), -std::sin(t1), 0.0},
    {std::sin(t1) * std::cos(t2), std::cos(t1) * std::cos(t2), -std::sin(t2)},
    {std::sin(t1) * std::sin(t2), std::cos(t1) * std::sin(t2), std::cos(t2)},
  };
  Tensor<double> rotated({6, 3});
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 3; ++k) acc += a.at(i, k) * r[j][k];
      rotated.at(i, j) = acc * (0.5 + static_cast<double>(i));
    }
  }
  CHECK(consistent_loss(V::constant(a), V::constant(rotated)).value().item() < 1e-12);
}

TEST_CASE("logit-level supervision reference values")
{
  CHECK(lls_loss(mat(1, 2, {100, -100}), mat(1, 2, {std::log(3.0), 0})).value().item() ==
        doctest::Approx(-std::log(0.75)).epsilon(1e-12));
  CHECK(-std::log(0.75) == doctest::Approx(0.2877).epsilon(1e-4));
  // Self cross-entropy equals the entropy of the target.
  const std::vector<double> z{0.2, -1.0, 2.0};
  double norm = 0.0;
  for (double v : z) norm += std::exp(v);
  double entropy = 0.0;
  for (double v : z) entropy -= std::exp(v) / norm * std::log(std::exp(v) / norm);
  CHECK(lls_loss(mat(1, 3, z), mat(1, 3, z)).value().item() == doctest::Approx(entropy).epsilon(1e-14));
  // Uniform target.
  double uniform = 0.0;
  for (double v : z) uniform -= std::log(std::exp(v) / norm) / 3.0;
  CHECK(lls_loss(mat(1, 3, {5, 5, 5}), mat(1, 3, z)).value().item() == doctest::Approx(uniform).epsilon(1e-14));
  CHECK_THROWS_AS(lls_loss(mat(1, 2, {0, 0}), mat(1, 3, {0, 0, 0})), ShapeError);
}

TEST_CASE("composite losses are unit-weight sums")
{
  CHECK(base_loss(scalar(0.5), scalar(0.2), scalar(0.1)).value().item() == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(base_loss(scalar(0), scalar(0), scalar(0)).value().item() == 0.0);
  CHECK(rla_loss(scalar(0.4), scalar(0.3)).value().item() == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(rla_loss(zero_loss<double>(), zero_loss<double>()).value().item() == 0.0);
  CHECK(total_loss(scalar(1), scalar(1), scalar(1), scalar(1)).value().item() == 4.0);
  CHECK(total_loss(scalar(0.9), scalar(0.1), zero_loss<double>(), zero_loss<double>()).value().item() ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("every loss is non-negative on random inputs")
{
  Rng rng(6);
  const Labels labels{0, 0, 1, 1, 2, 2};
  for (int trial = 0; trial < 25; ++trial) {
    const auto f = V::constant(randn(rng, {6, 4}));
    const auto z1 = V::constant(randn(rng, {6, 5}, 3.0));
    const auto z2 = V::constant(randn(rng, {6, 5}, 3.0));
    CHECK(id_loss(z1, labels).value().item() >= 0.0);
    CHECK(triplet_loss(gather_triplets(f, mine_triplets(f.value(), labels)), 0.0).value().item() >= 0.0);
    CHECK(lld_loss(z1, z2, 2.0).value().item() >= -1e-15);
    CHECK(lls_loss(z1, z2).value().item() >= 0.0);
    CHECK(consistent_loss(f, V::constant(randn(rng, {6, 4}))).value().item() >= 0.0);
  }
}

TEST_CASE("lld is zero only when the tempered distributions coincide")
{
  // Logits differing by a per-row constant give identical softmaxes.
  const auto adj = mat(2, 3, {1, 2, 3, 0, -1, 5});
  const auto shifted = mat(2, 3, {11, 12, 13, -2, -3, 3});
  CHECK(lld_loss(adj, shifted, 2.0).value().item() < 1e-14);
  CHECK(lld_loss(adj, mat(2, 3, {1, 2, 3.5, 0, -1, 5}), 2.0).value().item() > 1e-6);
}
