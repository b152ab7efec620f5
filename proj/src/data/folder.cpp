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

#include "dre/data/folder.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <fstream>
#include <regex>
#include <stdexcept>
#include <vector>

#include <jpeglib.h>
#include <spdlog/spdlog.h>

namespace dre::data {

namespace fs = std::filesystem;

namespace {

std::string lower_extension(const fs::path& p)
{
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext;
}

// Skips whitespace and '#' comments in a PNM header.
int read_pnm_int(std::istream& is)
{
  int ch = is.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = is.get();
    } else if (!std::isspace(ch)) {
      break;
    }
    ch = is.get();
  }
  int value = 0;
  bool any = false;
  while (ch != EOF && std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    any = true;
    ch = is.get();
  }
  if (!any) throw std::runtime_error("malformed PNM header");
  return value;
}

Tensor<float> read_pnm(const fs::path& path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[2];
  if (!is.read(magic, 2) || magic[0] != 'P' || (magic[1] != '6' && magic[1] != '5')) {
    throw std::runtime_error("unsupported PNM variant in " + path.string());
  }
  const std::size_t channels = magic[1] == '6' ? 3 : 1;
  const int width = read_pnm_int(is);
  const int height = read_pnm_int(is);
  const int maxval = read_pnm_int(is);
  if (width <= 0 || height <= 0 || maxval != 255) {
    throw std::runtime_error("unsupported PNM geometry in " + path.string());
  }
  const auto h = static_cast<std::size_t>(height);
  const auto w = static_cast<std::size_t>(width);
  std::vector<unsigned char> raw(channels * h * w);
  if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw std::runtime_error("truncated PNM data in " + path.string());
  }
  Tensor<float> out({channels, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < channels; ++k) {
        out[(k * h + y) * w + x] = static_cast<float>(raw[(y * w + x) * channels + k]) / 255.0f;
      }
    }
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void on_jpeg_error(j_common_ptr info)
{
  auto* mgr = reinterpret_cast<JpegErrorManager*>(info->err);
  (*info->err->format_message)(info, mgr->message);
  std::longjmp(mgr->jump, 1);
}

Tensor<float> read_jpeg(const fs::path& path)
{
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.string().c_str(), "rb"), &std::fclose);
  if (!file) throw std::runtime_error("cannot open " + path.string());
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = on_jpeg_error;
  std::vector<unsigned char> raw;
  std::size_t h = 0, w = 0, channels = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw std::runtime_error("jpeg decode failed for " + path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  jpeg_start_decompress(&cinfo);
  w = cinfo.output_width;
  h = cinfo.output_height;
  channels = static_cast<std::size_t>(cinfo.output_components);
  raw.resize(w * h * channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = raw.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);

  Tensor<float> out({channels, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < channels; ++k) {
        out[(k * h + y) * w + x] = static_cast<float>(raw[(y * w + x) * channels + k]) / 255.0f;
      }
    }
  }
  return out;
}

Tensor<float> match_channels(const Tensor<float>& image, std::size_t channels)
{
  const std::size_t c = image.dim(0);
  if (c == channels) return image;
  const std::size_t hw = image.dim(1) * image.dim(2);
  Tensor<float> out({channels, image.dim(1), image.dim(2)});
  if (c == 1) {
    for (std::size_t k = 0; k < channels; ++k) std::copy_n(image.data(), hw, out.data() + k * hw);
  } else if (channels == 1) {
    for (std::size_t i = 0; i < hw; ++i) {
      float acc = 0.0f;
      for (std::size_t k = 0; k < c; ++k) acc += image[k * hw + i];
      out[i] = acc / static_cast<float>(c);
    }
  } else {
    throw std::runtime_error("cannot convert " + std::to_string(c) + " channels to " + std::to_string(channels));
  }
  return out;
}

}  // namespace

std::optional<ParsedName> parse_market_filename(const std::string& filename)
{
  static const std::regex pattern(R"(^(-?\d+)_c(\d+))");
  std::smatch m;
  if (!std::regex_search(filename, m, pattern)) return std::nullopt;
  return ParsedName{std::stoll(m[1].str()), std::stoi(m[2].str())};
}

Tensor<float> read_image(const fs::path& path)
{
  const auto ext = lower_extension(path);
  if (ext == ".jpg" || ext == ".jpeg") return read_jpeg(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return read_pnm(path);
  throw std::runtime_error("unsupported image format: " + path.string());
}

void write_image(const fs::path& path, const Tensor<float>& image)
{
  const std::size_t c = image.dim(0);
  const std::size_t h = image.dim(1);
  const std::size_t w = image.dim(2);
  if (c != 1 && c != 3) throw std::runtime_error("write_image: need 1 or 3 channels");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << (c == 3 ? "P6" : "P5") << '\n' << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> raw(c * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) {
        const float v = std::clamp(image[(k * h + y) * w + x], 0.0f, 1.0f);
        raw[(y * w + x) * c + k] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
  }
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

Tensor<float> resize_image(const Tensor<float>& image, std::size_t height, std::size_t width)
{
  const std::size_t c = image.dim(0);
  const std::size_t h = image.dim(1);
  const std::size_t w = image.dim(2);
  if (h == height && w == width) return image;
  Tensor<float> out({c, height, width});
  const double sy = static_cast<double>(h) / static_cast<double>(height);
  const double sx = static_cast<double>(w) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t k = 0; k < c; ++k) {
        auto px = [&](std::size_t yy, std::size_t xx) { return static_cast<double>(image[(k * h + yy) * w + xx]); };
        const double top = px(y0, x0) * (1 - wx) + px(y0, x1) * wx;
        const double bottom = px(y1, x0) * (1 - wx) + px(y1, x1) * wx;
        out[(k * height + y) * width + x] = static_cast<float>(top * (1 - wy) + bottom * wy);
      }
    }
  }
  return out;
}

Dataset load_folder(const fs::path& dir, std::size_t channels, std::size_t height, std::size_t width)
{
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  Dataset out;
  for (const auto& file : files) {
    const auto ext = lower_extension(file);
    if (ext != ".jpg" && ext != ".jpeg" && ext != ".ppm" && ext != ".pgm" && ext != ".pnm") continue;
    const auto parsed = parse_market_filename(file.filename().string());
    if (!parsed) {
      spdlog::warn("load_folder: skipping unparseable file name {}", file.filename().string());
      continue;
    }
    if (parsed->person_id < 0) continue;
    auto image = resize_image(match_channels(read_image(file), channels), height, width);
    out.samples.push_back({std::move(image), parsed->person_id, parsed->camera_id, 0});
  }
  if (out.empty()) throw std::runtime_error("load_folder: no usable images in " + dir.string());
  return out;
}

void write_folder(const fs::path& dir, const Dataset& dataset)
{
  fs::create_directories(dir);
  char name[96];
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    std::snprintf(name, sizeof(name), "%04lld_c%ds1_%06zu_00.ppm", static_cast<long long>(s.person_id),
                  s.camera_id, i);
    write_image(dir / name, s.image);
  }
}

}  // namespace dre::data
