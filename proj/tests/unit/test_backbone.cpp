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

#include <algorithm>
#include <cmath>

#include "dre/backbone/backbone.hpp"
#include "dre/numerics/gradcheck.hpp"

using namespace dre;
using V = Var<double>;

namespace {

BackboneConfig tiny_config()
{
  BackboneConfig c;
  c.image_height = 8;
  c.image_width = 8;
  c.channels = 2;
  c.patch = 4;
  c.dim = 8;
  c.depth = 2;
  c.heads = 2;
  c.aux_tokens = 2;
  c.mlp_ratio = 2.0;
  return c;
}

Tensor<double> random_images(Rng& rng, std::size_t batch, const BackboneConfig& c)
{
  Tensor<double> t({batch, c.channels, c.image_height, c.image_width});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform();
  return t;
}

// Weighted sum of all class-token outputs.
V readout(const Representations<double>& reps, Rng& rng)
{
  auto acc = ops::sum(ops::mul(reps.primary, V::constant(Tensor<double>(reps.primary.shape(), rng.normal()))));
  for (const auto& a : reps.auxiliary) {
    Tensor<double> w(a.shape());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.normal();
    acc = ops::add(acc, ops::sum(ops::mul(a, V::constant(w))));
  }
  return acc;
}

}  // namespace

TEST_CASE("backbone parameter gradients match finite differences")
{
  const auto config = tiny_config();
  Rng init(1);
  Backbone<double> model(config, init);
  // Larger weights than the 0.02 init so every path carries signal.
  Rng big(2);
  for (auto& p : model.params()) {
    auto v = p.var;
    for (std::size_t i = 0; i < v.value().size(); ++i) v.mutable_value()[i] += 0.3 * big.normal();
  }
  Rng data(3);
  const auto images = random_images(data, 2, config);
  auto loss = [&] {
    Rng w(4);
    return readout(model.forward(images), w);
  };
  const auto params = model.params();
  const auto analytic = gradient_of(loss(), param_vars(params));
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto v = params[i].var;
    for (std::size_t k = 0; k < v.value().size(); ++k) {
      const double orig = v.value()[k];
      v.mutable_value()[k] = orig + h;
      const double up = loss().value().item();
      v.mutable_value()[k] = orig - h;
      const double down = loss().value().item();
      v.mutable_value()[k] = orig;
      const double num = (up - down) / (2 * h);
      const double a = analytic[i][k];
      worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-4}));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("patch count and row-major patch order")
{
  BackboneConfig c;
  CHECK(c.num_patches() == 16);
  CHECK(c.sequence_length() == 19);
  BackboneConfig full;
  full.image_height = 256;
  full.image_width = 128;
  full.patch = 16;
  CHECK(full.num_patches() == 128);

  auto t = tiny_config();
  Tensor<double> images({1, t.channels, t.image_height, t.image_width});
  for (std::size_t i = 0; i < images.size(); ++i) images[i] = static_cast<double>(i);
  const auto patches = extract_patches(images, t);
  CHECK(patches.shape() == Shape{4, t.patch_dim()});
  // Patch 1 is the top-right block: channel 0, row 0, column 4.
  CHECK(patches.at(1, 0) == 4.0);
  // Patch 2 starts at row 4, column 0.
  CHECK(patches.at(2, 0) == 4.0 * 8.0);
  // Second channel follows the first within a patch.
  CHECK(patches.at(0, 16) == 64.0);
}

TEST_CASE("zero image embeds to the projection bias")
{
  const auto c = tiny_config();
  Rng rng(1);
  Backbone<double> model(c, rng);
  const auto z0 = model.patchify(Tensor<double>({2, c.channels, c.image_height, c.image_width}, 0.0)).value();
  const auto params = model.params();
  const auto& bias = std::find_if(params.begin(), params.end(), [](const auto& p) {
                       return p.name == "patch_embed.bias";
                     })->var.value();
  for (std::size_t r = 0; r < z0.rows(); ++r) {
    for (std::size_t d = 0; d < c.dim; ++d) CHECK(z0.at(r, d) == bias[d]);
  }
}

TEST_CASE("maximum embedding doubles the per-channel argmax")
{
  const auto z = V::constant(Tensor<double>({2, 2}, {1, 5, 3, 2}));
  const auto me = maximum_embedding(z, 1, MaxEmbeddingMode::kEmphasis).value();
  CHECK(me == Tensor<double>({2, 2}, {1, 10, 6, 2}));
  const auto masked = maximum_embedding(z, 1, MaxEmbeddingMode::kMask).value();
  CHECK(masked == Tensor<double>({2, 2}, {0, 5, 3, 0}));
  CHECK(maximum_embedding(z, 1, MaxEmbeddingMode::kOff).value() == z.value());

  const auto single = V::constant(Tensor<double>({1, 3}, {-1, 0.5, 2}));
  CHECK(maximum_embedding(single, 1, MaxEmbeddingMode::kEmphasis).value() == Tensor<double>({1, 3}, {-2, 1, 4}));

  const Tensor<double> flat({3, 2}, 0.7);
  for (auto idx : max_patch_indices(flat, 1)) CHECK(idx == 0);
}

TEST_CASE("maximum embedding argmax is stable under its own output")
{
  Rng rng(4);
  Tensor<double> z({2 * 5, 6});
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.normal();
  const auto theta = max_patch_indices(z, 2);
  const auto me = maximum_embedding(V::constant(z), 2, MaxEmbeddingMode::kEmphasis).value();
  // Doubling a positive maximum keeps it maximal; a channel whose max is
  // negative can lose it, so compare only positive maxima.
  const auto again = max_patch_indices(me, 2);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t d = 0; d < 6; ++d) {
      if (z.at(b * 5 + theta[b * 6 + d], d) > 0) CHECK(again[b * 6 + d] == theta[b * 6 + d]);
    }
  }
}

TEST_CASE("assembled sequence is tokens then patches plus position")
{
  const std::size_t n = 3, s1 = 2, d = 2;
  const auto me = V::constant(Tensor<double>({2 * n, d}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}));
  const auto tokens = V::constant(Tensor<double>({s1, d}, {-1, -2, -3, -4}));
  const auto zero_pos = V::constant(Tensor<double>({n + s1, d}, 0.0));
  const auto z = assemble_sequence(me, tokens, zero_pos, 2).value();
  REQUIRE(z.shape() == Shape{2 * (n + s1), d});
  const std::vector<double> item0{-1, -2, -3, -4, 1, 2, 3, 4, 5, 6};
  const std::vector<double> item1{-1, -2, -3, -4, 7, 8, 9, 10, 11, 12};
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(z[i] == item0[i]);
    CHECK(z[10 + i] == item1[i]);
  }
  Tensor<double> pos({n + s1, d});
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = 0.5 * static_cast<double>(i);
  const auto zp = assemble_sequence(me, tokens, V::constant(pos), 2).value();
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(zp[i] == item0[i] + pos[i]);
    CHECK(zp[10 + i] == item1[i] + pos[i]);
  }
}

TEST_CASE("sequence length is N+S+1 at every layer")
{
  for (std::size_t s : {0, 1, 2, 3}) {
    auto c = tiny_config();
    c.aux_tokens = s;
    Rng rng(5);
    Backbone<double> model(c, rng);
    Rng data(6);
    ForwardTrace trace;
    const auto reps = model.forward(random_images(data, 3, c), &trace);
    REQUIRE(trace.layer_lengths.size() == c.depth + 1);
    for (auto len : trace.layer_lengths) CHECK(len == c.num_patches() + s + 1);
    CHECK(reps.primary.shape() == Shape{3, c.dim});
    CHECK(reps.auxiliary.size() == s);
    for (const auto& a : reps.auxiliary) CHECK(a.shape() == Shape{3, c.dim});
    CHECK(!reps.integrated.defined());
  }
}

TEST_CASE("depth zero yields normalized class token plus position")
{
  auto c = tiny_config();
  c.depth = 0;
  Rng rng(7);
  Backbone<double> model(c, rng);
  Rng data(8);
  const auto reps = model.forward(random_images(data, 2, c));
  const auto& tok = model.class_tokens().value();
  const auto& pos = model.position_embedding().value();
  auto expected = [&](std::size_t token) {
    std::vector<double> v(c.dim);
    double mean = 0.0;
    for (std::size_t d = 0; d < c.dim; ++d) mean += (v[d] = tok.at(token, d) + pos.at(token, d));
    mean /= static_cast<double>(c.dim);
    double var = 0.0;
    for (auto x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(c.dim);
    for (auto& x : v) x = (x - mean) / std::sqrt(var + 1e-6);
    return v;
  };
  const auto p = expected(0);
  const auto a1 = expected(2);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t d = 0; d < c.dim; ++d) {
      CHECK(reps.primary.value().at(b, d) == doctest::Approx(p[d]).epsilon(1e-12));
      CHECK(reps.auxiliary[1].value().at(b, d) == doctest::Approx(a1[d]).epsilon(1e-12));
    }
  }
}

TEST_CASE("permuting the batch permutes the representations")
{
  const auto c = tiny_config();
  Rng rng(9);
  Backbone<double> model(c, rng);
  Rng data(10);
  const auto images = random_images(data, 3, c);
  const std::vector<std::size_t> perm{2, 0, 1};
  const std::size_t per = images.size() / 3;
  Tensor<double> shuffled(images.shape());
  for (std::size_t i = 0; i < 3; ++i) {
    std::copy_n(images.data() + perm[i] * per, per, shuffled.data() + i * per);
  }
  const auto a = model.forward(images);
  const auto b = model.forward(shuffled);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t d = 0; d < c.dim; ++d) {
      CHECK(b.primary.value().at(i, d) == doctest::Approx(a.primary.value().at(perm[i], d)).epsilon(1e-12));
      CHECK(b.auxiliary[0].value().at(i, d) == doctest::Approx(a.auxiliary[0].value().at(perm[i], d)).epsilon(1e-12));
    }
  }
}

TEST_CASE("every class token receives gradient")
{
  const auto c = tiny_config();
  Rng rng(11);
  Backbone<double> model(c, rng);
  Rng data(12);
  Rng w(13);
  const auto loss = readout(model.forward(random_images(data, 4, c)), w);
  const auto g = gradient_of(loss, {model.class_tokens()})[0];
  for (std::size_t t = 0; t < c.class_tokens(); ++t) {
    double norm = 0.0;
    for (std::size_t d = 0; d < c.dim; ++d) norm += g.at(t, d) * g.at(t, d);
    CHECK(norm > 0.0);
  }
}

TEST_CASE("single-token identity-embedding backbone is a plain ViT")
{
  auto c = tiny_config();
  c.aux_tokens = 0;
  c.max_embedding = MaxEmbeddingMode::kOff;
  Rng rng(14);
  Backbone<double> model(c, rng);
  Rng data(15);
  const auto images = random_images(data, 2, c);
  const auto z0 = model.patchify(images);
  const auto seq = assemble_sequence(z0, model.class_tokens(), model.position_embedding(), 2);
  const auto direct = model.encode(seq, 2);
  const auto reps = model.forward(images);
  CHECK(reps.auxiliary.empty());
  CHECK(reps.primary.value() == direct.primary.value());
  CHECK(model.class_tokens().shape() == Shape{1, c.dim});
}

TEST_CASE("config validation names the field")
{
  auto check_field = [](BackboneConfig c, const std::string& field) {
    try {
      c.validate();
      FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  auto c = tiny_config();
  c.image_height = 10;
  check_field(c, "image_height");
  c = tiny_config();
  c.heads = 3;
  check_field(c, "heads");
  c = tiny_config();
  c.patch = 0;
  check_field(c, "patch");
  c = tiny_config();
  Rng rng(1);
  Backbone<double> model(c, rng);
  CHECK_THROWS_AS(model.forward(Tensor<double>({1, c.channels, 4, 4})), ShapeError);
}

TEST_CASE("copy_param_values makes an identical model")
{
  const auto c = tiny_config();
  Rng r1(1), r2(2);
  Backbone<double> a(c, r1), b(c, r2);
  copy_param_values(b.params(), a.params());
  Rng data(3);
  const auto images = random_images(data, 2, c);
  CHECK(a.forward(images).primary.value() == b.forward(images).primary.value());
  auto wrong = c;
  wrong.depth = 1;
  Rng r3(3);
  Backbone<double> other(wrong, r3);
  CHECK_THROWS(copy_param_values(other.params(), a.params()));
}
