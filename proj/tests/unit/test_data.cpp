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
#include <filesystem>
#include <fstream>
#include <set>

#include "dre/data/folder.hpp"
#include "dre/data/sampler.hpp"
#include "dre/data/synthetic.hpp"
#include "dre/data/tasks.hpp"
#include "dre/evalkit/evalkit.hpp"

using namespace dre;
using namespace dre::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
  const auto dir = fs::temp_directory_path() / "dre_test_data" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

evalkit::LabeledFeatures pixels(const Dataset& d)
{
  evalkit::LabeledFeatures out;
  const std::size_t dim = d.samples.front().image.size();
  out.features = Tensor<double>({d.size(), dim});
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) out.features.at(i, j) = d.samples[i].image[j];
    out.person_ids.push_back(d.samples[i].person_id);
    out.camera_ids.push_back(d.samples[i].camera_id);
  }
  return out;
}

}  // namespace

TEST_CASE("synthetic dataset size and ordering")
{
  SyntheticSpec spec;
  spec.identities = 4;
  spec.cameras = 2;
  spec.images_per_camera = 3;
  const auto d = generate_synthetic(spec);
  CHECK(d.size() == 24);
  CHECK(d.identity_count() == 4);
  CHECK(d.samples[0].person_id == 0);
  CHECK(d.samples[0].camera_id == 1);
  CHECK(d.samples[3].camera_id == 2);
  CHECK(d.samples[23].person_id == 3);
  CHECK(d.samples[0].image.shape() == Shape{3, 32, 32});
  for (const auto& s : d.samples) {
    for (std::size_t i = 0; i < s.image.size(); ++i) {
      const float v = s.image[i];
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
      CHECK(std::abs(v * 255.0f - std::round(v * 255.0f)) < 1e-3f);
    }
  }
}

TEST_CASE("synthetic generation is deterministic and seed-sensitive")
{
  SyntheticSpec spec;
  spec.seed = 11;
  spec.camera_seed = 3;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.samples[i].image == b.samples[i].image);
  spec.seed = 12;
  const auto c = generate_synthetic(spec);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs = differs || !(a.samples[i].image == c.samples[i].image);
  CHECK(differs);
}

TEST_CASE("images of one identity differ and signatures differ across identities")
{
  SyntheticSpec spec;
  spec.identities = 6;
  const auto d = generate_synthetic(spec);
  CHECK(!(d.samples[0].image == d.samples[1].image));
  const auto f = signature_block_features(generate_synthetic([&] {
    auto s = spec;
    s.noise = 0.0;
    s.brightness = 0.0;
    s.translation = 0;
    return s;
  }()), spec.domain);
  const std::size_t per = spec.cameras * spec.images_per_camera;
  for (std::size_t a = 0; a < spec.identities; ++a) {
    for (std::size_t b = a + 1; b < spec.identities; ++b) CHECK(f[a * per] != f[b * per]);
  }
}

TEST_CASE("impossible synthetic specs are rejected")
{
  SyntheticSpec spec;
  spec.identities = 1;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec = {};
  spec.images_per_camera = 0;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec = {};
  spec.height = 30;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec = {};
  spec.noise = -1.0;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
}

TEST_CASE("signature layouts differ between domains")
{
  std::set<std::array<std::size_t, kSignatureCells>> layouts;
  for (std::size_t d = 0; d < 4; ++d) layouts.insert(signature_cells(d));
  CHECK(layouts.size() == 4);
  CHECK(signature_cells(0) == signature_cells(4));
}

TEST_CASE("raw-pixel nearest neighbour retrieves every identity without noise or shift")
{
  SyntheticStreamOptions options;
  options.base.noise = 0.0;
  options.base.translation = 0;
  options.test_identities = 12;
  options.seed = 5;
  for (std::size_t domain = 0; domain < 3; ++domain) {
    const auto task = make_synthetic_task(options, domain, 1, 0);
    const auto r = evalkit::evaluate(pixels(task.query), pixels(task.gallery));
    CHECK(r.rank1 == 1.0);
  }
}

TEST_CASE("nearest class mean on signature blocks separates identities on noise-free data")
{
  SyntheticSpec spec;
  spec.identities = 24;
  spec.cameras = 3;
  spec.noise = 0.0;
  for (std::size_t domain = 0; domain < 4; ++domain) {
    spec.domain = domain;
    const auto d = generate_synthetic(spec);
    const auto f = signature_block_features(d, domain);
    const std::size_t dim = f.front().size();
    std::map<std::int64_t, std::vector<double>> means;
    std::map<std::int64_t, double> counts;
    for (std::size_t i = 0; i < d.size(); ++i) {
      auto& m = means[d.samples[i].person_id];
      m.resize(dim, 0.0);
      for (std::size_t j = 0; j < dim; ++j) m[j] += f[i][j];
      counts[d.samples[i].person_id] += 1.0;
    }
    for (auto& [id, m] : means) {
      for (auto& v : m) v /= counts[id];
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      std::int64_t best = -1;
      double best_d = 1e300;
      for (const auto& [id, m] : means) {
        double acc = 0.0;
        for (std::size_t j = 0; j < dim; ++j) acc += (f[i][j] - m[j]) * (f[i][j] - m[j]);
        if (acc < best_d) {
          best_d = acc;
          best = id;
        }
      }
      correct += best == d.samples[i].person_id;
    }
    CHECK(correct == d.size());
  }
}

TEST_CASE("market filename parsing")
{
  const auto a = parse_market_filename("0002_c1s1_000451_03.jpg");
  REQUIRE(a);
  CHECK(a->person_id == 2);
  CHECK(a->camera_id == 1);
  const auto b = parse_market_filename("0000_c6s4_000001_00.jpg");
  REQUIRE(b);
  CHECK(b->person_id == 0);
  CHECK(b->camera_id == 6);
  const auto junk = parse_market_filename("-1_c3s1_000000_00.jpg");
  REQUIRE(junk);
  CHECK(junk->person_id == -1);
  CHECK(!parse_market_filename("Thumbs.db"));
  CHECK(!parse_market_filename("12_x1.jpg"));
}

TEST_CASE("folder round trip preserves pixels, ids and cameras")
{
  SyntheticSpec spec;
  spec.identities = 3;
  const auto d = generate_synthetic(spec);
  const auto dir = scratch("roundtrip");
  write_folder(dir, d);
  const auto back = load_folder(dir, 3, 32, 32);
  REQUIRE(back.size() == d.size());
  std::multiset<std::pair<std::int64_t, int>> want, got;
  for (const auto& s : d.samples) want.insert({s.person_id, s.camera_id});
  for (const auto& s : back.samples) got.insert({s.person_id, s.camera_id});
  CHECK(want == got);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(back.samples[i].image == d.samples[i].image);
}

TEST_CASE("folder loading skips junk and unparseable names and rejects empty results")
{
  const auto dir = scratch("junk");
  const Tensor<float> img({3, 8, 8}, 0.5f);
  write_image(dir / "-1_c3s1_000000_00.ppm", img);
  write_image(dir / "notes.ppm", img);
  CHECK_THROWS(load_folder(dir, 3, 8, 8));
  write_image(dir / "0007_c2s1_000001_00.ppm", img);
  const auto d = load_folder(dir, 3, 16, 16);
  REQUIRE(d.size() == 1);
  CHECK(d.samples[0].person_id == 7);
  CHECK(d.samples[0].camera_id == 2);
  CHECK(d.samples[0].image.shape() == Shape{3, 16, 16});
  CHECK(std::abs(d.samples[0].image[0] - 128.0f / 255.0f) < 1e-6f);
  CHECK_THROWS(load_folder(dir / "absent", 3, 8, 8));
}

TEST_CASE("grey images expand to the configured channel count")
{
  const auto dir = scratch("grey");
  Tensor<float> grey({1, 4, 4});
  for (std::size_t i = 0; i < grey.size(); ++i) grey[i] = static_cast<float>(i) / 255.0f;
  write_image(dir / "0001_c1s1_000001_00.pgm", grey);
  const auto d = load_folder(dir, 3, 4, 4);
  REQUIRE(d.size() == 1);
  for (std::size_t c = 0; c < 3; ++c) CHECK(d.samples[0].image[c * 16 + 5] == grey[5]);
}

TEST_CASE("pk batches hold P distinct identities with K instances each")
{
  SyntheticSpec spec;
  spec.identities = 12;
  spec.images_per_camera = 3;
  const auto d = generate_synthetic(spec);
  const auto batch = pk_sample(d, 8, 4, 3, 0);
  CHECK(batch.size() == 32);
  std::map<std::int64_t, int> counts;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(d.samples[batch.indices[i]].person_id == batch.labels[i]);
    CHECK(d.samples[batch.indices[i]].camera_id == batch.cameras[i]);
    ++counts[batch.labels[i]];
  }
  CHECK(counts.size() == 8);
  for (const auto& [id, n] : counts) CHECK(n == 4);
}

TEST_CASE("pk sampling is deterministic per seed and step")
{
  SyntheticSpec spec;
  spec.identities = 12;
  const auto d = generate_synthetic(spec);
  CHECK(pk_sample(d, 4, 2, 9, 3).indices == pk_sample(d, 4, 2, 9, 3).indices);
  CHECK(pk_sample(d, 4, 2, 9, 3).indices != pk_sample(d, 4, 2, 9, 4).indices);
}

TEST_CASE("pk sampling draws with replacement for small identities and rejects too few ids")
{
  SyntheticSpec spec;
  spec.identities = 3;
  spec.cameras = 1;
  spec.images_per_camera = 2;
  const auto d = generate_synthetic(spec);
  const auto batch = pk_sample(d, 3, 5, 1, 0);
  CHECK(batch.size() == 15);
  CHECK_THROWS_AS(pk_sample(d, 4, 2, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(pk_sample(d, 0, 2, 1, 0), std::invalid_argument);
}

TEST_CASE("every pk batch admits a positive and a negative per anchor")
{
  SyntheticSpec spec;
  spec.identities = 10;
  const auto d = generate_synthetic(spec);
  for (std::uint64_t step = 0; step < 20; ++step) {
    const auto b = pk_sample(d, 2 + step % 5, 2 + step % 3, 4, step);
    for (std::size_t a = 0; a < b.size(); ++a) {
      bool pos = false, neg = false;
      for (std::size_t j = 0; j < b.size(); ++j) {
        if (j == a) continue;
        pos = pos || b.labels[j] == b.labels[a];
        neg = neg || b.labels[j] != b.labels[a];
      }
      CHECK(pos);
      CHECK(neg);
    }
  }
}

TEST_CASE("label map is a bijection")
{
  LabelMap map;
  CHECK(map.add_task(1, 5) == 0);
  CHECK(map.add_task(2, 3) == 5);
  CHECK(map.add_task(3, 4) == 8);
  CHECK(map.total() == 12);
  std::set<std::int64_t> seen;
  for (int t = 1; t <= 3; ++t) {
    const std::int64_t n = t == 1 ? 5 : (t == 2 ? 3 : 4);
    for (std::int64_t local = 0; local < n; ++local) {
      const auto g = map.encode(t, local);
      CHECK(seen.insert(g).second);
      CHECK(map.decode(g) == std::make_pair(t, local));
    }
  }
  CHECK_THROWS(map.add_task(2, 1));
  CHECK_THROWS(map.encode(2, 3));
  CHECK_THROWS(map.decode(12));
}

TEST_CASE("query gallery split takes the first image per identity and camera")
{
  SyntheticSpec spec;
  spec.identities = 3;
  spec.cameras = 2;
  spec.images_per_camera = 3;
  Dataset query, gallery;
  split_query_gallery(generate_synthetic(spec), query, gallery);
  CHECK(query.size() == 6);
  CHECK(gallery.size() == 12);
  std::set<std::pair<std::int64_t, int>> pairs;
  for (const auto& s : query.samples) CHECK(pairs.insert({s.person_id, s.camera_id}).second);
}

TEST_CASE("synthetic task stream keeps identities disjoint")
{
  SyntheticStreamOptions options;
  options.seed = 7;
  const auto t1 = make_synthetic_task(options, 0, 1, 0);
  const auto t2 = make_synthetic_task(options, 1, 2, 24);
  std::set<std::int64_t> ids;
  for (const auto* d : {&t1.train, &t1.query, &t2.train, &t2.query}) {
    std::set<std::int64_t> local;
    for (const auto& s : d->samples) local.insert(s.person_id);
    for (auto id : local) CHECK(ids.insert(id).second);
  }
  CHECK(t1.train.identity_count() == 24);
  CHECK(t1.train.index_by_identity().begin()->first == 0);
  CHECK(t2.train.index_by_identity().begin()->first == 24);
  CHECK(t2.train.index_by_identity().rbegin()->first == 47);
  for (const auto& s : t2.train.samples) CHECK(s.task_id == 2);
  CHECK(t1.query.identity_count() == 12);
  CHECK(t1.name == "synth:0");
}

TEST_CASE("unseen tasks use camera transforms never seen in training")
{
  SyntheticStreamOptions options;
  options.seed = 7;
  const auto u = make_unseen_task(options, 0, 0);
  CHECK(u.train.empty());
  CHECK(!u.query.empty());
  CHECK(!u.gallery.empty());
  CHECK(u.task_id < 0);
  const auto seen = make_synthetic_task(options, 0, 1, 0);
  for (const auto& s : u.query.samples) CHECK(s.person_id < 0);
  CHECK(!(u.query.samples[0].image == seen.query.samples[0].image));
}

TEST_CASE("market task loads the three split folders")
{
  SyntheticStreamOptions options;
  options.train_identities = 4;
  options.test_identities = 3;
  const auto task = make_synthetic_task(options, 0, 1, 0);
  const auto root = scratch("market");
  write_folder(root / "bounding_box_train", task.train);
  write_folder(root / "query", task.query);
  write_folder(root / "bounding_box_test", task.gallery);
  const auto loaded = load_market_task(root, 2, 10, 3, 32, 32);
  CHECK(loaded.train.size() == task.train.size());
  CHECK(loaded.train.identity_count() == 4);
  CHECK(loaded.train.index_by_identity().begin()->first == 10);
  CHECK(loaded.query.size() == task.query.size());
  CHECK(loaded.gallery.size() == task.gallery.size());
  CHECK_THROWS(load_market_task(root / "missing", 1, 0, 3, 32, 32));
}
