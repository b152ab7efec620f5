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

#include "dre/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "dre/numerics/rng.hpp"

namespace dre::data {

namespace {

constexpr std::array<std::array<double, 3>, kPaletteSize> kPalette{{
  {0.90, 0.15, 0.15},
  {0.15, 0.80, 0.20},
  {0.20, 0.30, 0.90},
  {0.90, 0.85, 0.20},
  {0.85, 0.20, 0.80},
  {0.20, 0.85, 0.85},
}};

constexpr std::uint64_t kLayoutSeed = 0x5EED0F1A7;

struct CellCode {
  std::size_t colour;
  std::size_t pattern;
};

double pattern_gain(std::size_t pattern, std::size_t y, std::size_t x)
{
  switch (pattern) {
  case 1: return (y / 2) % 2 == 0 ? 1.0 : 0.35;        // horizontal stripes
  case 2: return (x / 2) % 2 == 0 ? 1.0 : 0.35;        // vertical stripes
  case 3: return ((y / 2) + (x / 2)) % 2 == 0 ? 1.0 : 0.35;  // checker
  default: return 1.0;
  }
}

std::uint8_t quantize(double v)
{
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void SyntheticSpec::validate() const
{
  auto fail = [](const std::string& why) { throw std::invalid_argument("synthetic spec: " + why); };
  if (identities < 2) fail("needs at least 2 identities");
  if (cameras == 0) fail("needs at least 1 camera");
  if (images_per_camera == 0) fail("needs at least 1 image per camera");
  if (channels == 0) fail("needs at least 1 channel");
  if (height < 4 || width < 4 || height % 4 != 0 || width % 4 != 0) {
    fail("image size must be a positive multiple of 4");
  }
  if (brightness < 0.0 || noise < 0.0 || translation < 0) fail("nuisance ranges must be non-negative");
}

std::array<std::size_t, kSignatureCells> signature_cells(std::size_t domain)
{
  std::vector<std::size_t> perm(kGridCells);
  for (std::size_t i = 0; i < kGridCells; ++i) perm[i] = i;
  Rng rng(kLayoutSeed);
  rng.shuffle(perm);
  const std::size_t slots = kGridCells / kSignatureCells;
  const std::size_t base = (domain % slots) * kSignatureCells;
  std::array<std::size_t, kSignatureCells> out{};
  for (std::size_t i = 0; i < kSignatureCells; ++i) out[i] = perm[base + i];
  std::sort(out.begin(), out.end());
  return out;
}

CameraTransform camera_transform(const SyntheticSpec& spec, int camera)
{
  Rng rng(derive_seed(spec.camera_seed, streams::kSynthetic, static_cast<std::uint64_t>(camera)));
  CameraTransform t;
  t.brightness = rng.uniform(-spec.brightness, spec.brightness);
  const auto span = static_cast<std::size_t>(2 * spec.translation + 1);
  t.dx = static_cast<int>(rng.below(span)) - spec.translation;
  t.dy = static_cast<int>(rng.below(span)) - spec.translation;
  return t;
}

Dataset generate_synthetic(const SyntheticSpec& spec)
{
  spec.validate();
  const auto cells = signature_cells(spec.domain);
  const std::size_t c = spec.channels;
  const std::size_t h = spec.height;
  const std::size_t w = spec.width;
  const std::size_t ch = h / 4;
  const std::size_t cw = w / 4;

  // Distinct identity codes.
  Rng code_rng(derive_seed(spec.seed, streams::kSynthetic, 0xC0DE));
  std::vector<std::array<CellCode, kSignatureCells>> codes;
  std::set<std::vector<std::size_t>> seen;
  while (codes.size() < spec.identities) {
    std::array<CellCode, kSignatureCells> code{};
    std::vector<std::size_t> key;
    for (auto& cell : code) {
      cell.colour = code_rng.below(kPaletteSize);
      cell.pattern = code_rng.below(kPatternCount);
      key.push_back(cell.colour * kPatternCount + cell.pattern);
    }
    if (seen.insert(key).second) codes.push_back(code);
  }

  std::vector<CameraTransform> cams;
  for (std::size_t k = 0; k < spec.cameras; ++k) cams.push_back(camera_transform(spec, static_cast<int>(k)));

  const double background = 0.25 + 0.05 * static_cast<double>(spec.domain % 4);

  Dataset out;
  out.samples.reserve(spec.identities * spec.cameras * spec.images_per_camera);
  std::vector<double> canvas(c * h * w);
  for (std::size_t id = 0; id < spec.identities; ++id) {
    for (std::size_t cam = 0; cam < spec.cameras; ++cam) {
      for (std::size_t img = 0; img < spec.images_per_camera; ++img) {
        Rng rng(derive_seed(spec.seed, id + 1, cam * 100003 + img));
        std::array<CellCode, kGridCells> layout{};
        std::array<bool, kGridCells> filled{};
        for (std::size_t i = 0; i < kSignatureCells; ++i) {
          layout[cells[i]] = codes[id][i];
          filled[cells[i]] = true;
        }
        if (spec.clutter) {
          for (std::size_t cell = 0; cell < kGridCells; ++cell) {
            if (filled[cell]) continue;
            layout[cell] = {rng.below(kPaletteSize), rng.below(kPatternCount)};
            filled[cell] = true;
          }
        }

        for (std::size_t k = 0; k < c; ++k) {
          for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
              const std::size_t cell = (y / ch) * 4 + x / cw;
              double v = background;
              if (filled[cell]) {
                const auto& code = layout[cell];
                v = kPalette[code.colour][k % 3] * pattern_gain(code.pattern, y % ch, x % cw);
              }
              canvas[(k * h + y) * w + x] = v;
            }
          }
        }

        const auto& cam_t = cams[cam];
        Tensor<float> image({c, h, w});
        for (std::size_t k = 0; k < c; ++k) {
          for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
              const auto sy = std::clamp<long>(static_cast<long>(y) - cam_t.dy, 0, static_cast<long>(h) - 1);
              const auto sx = std::clamp<long>(static_cast<long>(x) - cam_t.dx, 0, static_cast<long>(w) - 1);
              double v = canvas[(k * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
              v += cam_t.brightness;
              if (spec.noise > 0.0) v += spec.noise * rng.normal();
              image[(k * h + y) * w + x] = static_cast<float>(quantize(v)) / 255.0f;
            }
          }
        }
        out.samples.push_back({std::move(image), static_cast<std::int64_t>(id), static_cast<int>(cam) + 1, 0});
      }
    }
  }
  return out;
}

std::vector<std::vector<double>> signature_block_features(const Dataset& dataset, std::size_t domain)
{
  const auto cells = signature_cells(domain);
  std::vector<std::vector<double>> out;
  for (const auto& s : dataset.samples) {
    const std::size_t c = s.image.dim(0);
    const std::size_t h = s.image.dim(1);
    const std::size_t w = s.image.dim(2);
    const std::size_t ch = h / 4;
    const std::size_t cw = w / 4;
    std::vector<double> f;
    for (auto cell : cells) {
      const std::size_t y0 = (cell / 4) * ch;
      const std::size_t x0 = (cell % 4) * cw;
      for (std::size_t k = 0; k < c; ++k) {
        double acc = 0.0;
        for (std::size_t y = y0; y < y0 + ch; ++y) {
          for (std::size_t x = x0; x < x0 + cw; ++x) acc += s.image[(k * h + y) * w + x];
        }
        f.push_back(acc / static_cast<double>(ch * cw));
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace dre::data
