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

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dre/data/dataset.hpp"

namespace dre::data {

/// Images are a 4x4 grid of cells. A domain fixes which cells carry the
/// identity signature and the background shade. With clutter on, every other
/// cell holds per-image blocks drawn from the same colour/pattern vocabulary.
inline constexpr std::size_t kGridCells = 16;
inline constexpr std::size_t kSignatureCells = 4;
inline constexpr std::size_t kPaletteSize = 6;
inline constexpr std::size_t kPatternCount = 4;

struct SyntheticSpec {
  std::size_t identities = 4;
  std::size_t cameras = 2;
  std::size_t images_per_camera = 3;
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t domain = 0;
  double brightness = 0.12;  // camera offsets drawn from [-brightness, brightness]
  int translation = 2;       // camera shifts drawn from [-translation, translation] pixels
  double noise = 0.03;       // per-pixel gaussian std
  bool clutter = false;
  std::uint64_t seed = 0;         // identity codes and per-image noise
  std::uint64_t camera_seed = 0;  // camera nuisance transforms

  /// Throws std::invalid_argument for impossible specs.
  void validate() const;
};

/// Grid cells (row-major, 0..15) carrying the signature in `domain`.
std::array<std::size_t, kSignatureCells> signature_cells(std::size_t domain);

struct CameraTransform {
  double brightness = 0.0;
  int dx = 0;
  int dy = 0;
};

CameraTransform camera_transform(const SyntheticSpec& spec, int camera);

/// Identities 0..n-1, cameras 1..c (Market numbering), ordered by (identity, camera, image).
/// Pixel values are multiples of 1/255.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Mean colour of every signature cell, the features a linear identity
/// classifier works on. One row of kSignatureCells * channels values per sample.
std::vector<std::vector<double>> signature_block_features(const Dataset& dataset, std::size_t domain);

}  // namespace dre::data
