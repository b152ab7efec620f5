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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "dre/data/dataset.hpp"

namespace dre::data {

struct ParsedName {
  std::int64_t person_id;
  int camera_id;
};

/// Parses the Market-1501 convention `{pid}_c{cam}...`. Returns nullopt for
/// names that do not match.
std::optional<ParsedName> parse_market_filename(const std::string& filename);

/// 8-bit RGB/grey image I/O. Reading supports binary PPM/PGM and JPEG;
/// writing produces binary PPM (P6) or PGM (P5).
Tensor<float> read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Tensor<float>& image);

/// Bilinear resize of a C x H x W image.
Tensor<float> resize_image(const Tensor<float>& image, std::size_t height, std::size_t width);

/// Loads every image in `dir` whose name follows the Market pattern, resized
/// to height x width with `channels` channels. Junk (pid -1) is skipped,
/// unparseable names are skipped with a warning, and an empty result throws.
Dataset load_folder(const std::filesystem::path& dir, std::size_t channels, std::size_t height,
                    std::size_t width);

/// Writes `{pid:04}_c{cam}s1_{index:06}_00.ppm` files; camera ids are written 1-based.
void write_folder(const std::filesystem::path& dir, const Dataset& dataset);

}  // namespace dre::data
