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

#include "dre/backbone/backbone.hpp"

#include <cmath>
#include <stdexcept>

namespace dre {

std::string to_string(MaxEmbeddingMode mode)
{
  switch (mode) {
  case MaxEmbeddingMode::kEmphasis: return "emphasis";
  case MaxEmbeddingMode::kMask: return "mask";
  case MaxEmbeddingMode::kOff: return "off";
  }
  return "emphasis";
}

MaxEmbeddingMode parse_max_embedding_mode(const std::string& text)
{
  if (text == "emphasis") return MaxEmbeddingMode::kEmphasis;
  if (text == "mask") return MaxEmbeddingMode::kMask;
  if (text == "off") return MaxEmbeddingMode::kOff;
  throw std::invalid_argument("unknown maximum embedding mode '" + text +
                              "' (expected emphasis, mask or off)");
}

std::size_t BackboneConfig::hidden_dim() const
{
  return static_cast<std::size_t>(std::lround(static_cast<double>(dim) * mlp_ratio));
}

void BackboneConfig::validate() const
{
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("model." + field + ": " + why);
  };
  if (patch == 0) fail("patch", "must be positive");
  if (image_height == 0 || image_height % patch != 0) fail("image_height", "must be a positive multiple of the patch size");
  if (image_width == 0 || image_width % patch != 0) fail("image_width", "must be a positive multiple of the patch size");
  if (channels == 0) fail("channels", "must be positive");
  if (dim == 0) fail("dim", "must be positive");
  if (heads == 0 || dim % heads != 0) fail("heads", "must divide the embedding dim");
  if (!(mlp_ratio > 0.0) || hidden_dim() == 0) fail("mlp_ratio", "must be positive");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout", "must be in [0, 1)");
}

template <typename T>
Tensor<T> trunc_normal_tensor(Shape shape, Rng& rng, double std)
{
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.truncated_normal(std));
  return t;
}

template <typename T>
void copy_param_values(const ParamList<T>& dst, const ParamList<T>& src)
{
  if (dst.size() != src.size()) {
    throw ShapeError("parameter count mismatch: " + std::to_string(dst.size()) + " vs " +
                     std::to_string(src.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != src[i].name) {
      throw ShapeError("parameter name mismatch: " + dst[i].name + " vs " + src[i].name);
    }
    dst[i].var.value().require_same_shape(src[i].var.value(), dst[i].name.c_str());
    auto v = dst[i].var;
    v.mutable_value() = src[i].var.value();
  }
}

template <typename T>
Tensor<T> extract_patches(const Tensor<T>& images, const BackboneConfig& config)
{
  const auto& s = images.shape();
  if (s.size() != 4 || s[1] != config.channels || s[2] != config.image_height ||
      s[3] != config.image_width) {
    throw ShapeError("patchify: images " + shape_string(s) + " do not match configured [B x " +
                     std::to_string(config.channels) + " x " + std::to_string(config.image_height) +
                     " x " + std::to_string(config.image_width) + "]");
  }
  const std::size_t batch = s[0];
  const std::size_t c = config.channels;
  const std::size_t h = config.image_height;
  const std::size_t w = config.image_width;
  const std::size_t p = config.patch;
  const std::size_t gh = h / p;
  const std::size_t gw = w / p;
  Tensor<T> out({batch * gh * gw, c * p * p});
  T* dst = out.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t py = 0; py < gh; ++py) {
      for (std::size_t px = 0; px < gw; ++px) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t y = 0; y < p; ++y) {
            const T* src = images.data() + ((b * c + ch) * h + py * p + y) * w + px * p;
            dst = std::copy_n(src, p, dst);
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
std::vector<std::size_t> max_patch_indices(const Tensor<T>& z0, std::size_t batch)
{
  const std::size_t d = z0.cols();
  if (batch == 0 || z0.rows() % batch != 0) {
    throw ShapeError("maximum_embedding: rows " + std::to_string(z0.rows()) +
                     " not divisible by batch " + std::to_string(batch));
  }
  const std::size_t n = z0.rows() / batch;
  std::vector<std::size_t> theta(batch * d, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t ch = 0; ch < d; ++ch) {
      std::size_t best = 0;
      T best_v = z0.at(b * n, ch);
      for (std::size_t i = 1; i < n; ++i) {
        const T v = z0.at(b * n + i, ch);
        if (v > best_v) {
          best_v = v;
          best = i;
        }
      }
      theta[b * d + ch] = best;
    }
  }
  return theta;
}

template <typename T>
Var<T> maximum_embedding(const Var<T>& z0, std::size_t batch, MaxEmbeddingMode mode)
{
  if (mode == MaxEmbeddingMode::kOff) return z0;
  const auto theta = max_patch_indices(z0.value(), batch);
  const std::size_t d = z0.cols();
  const std::size_t n = z0.rows() / batch;
  const T base = mode == MaxEmbeddingMode::kEmphasis ? T(1) : T(0);
  Tensor<T> factor(z0.shape(), base);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t ch = 0; ch < d; ++ch) {
      factor.at(b * n + theta[b * d + ch], ch) += T(1);
    }
  }
  return ops::mul(z0, Var<T>::constant(std::move(factor)));
}

template <typename T>
Var<T> assemble_sequence(const Var<T>& me, const Var<T>& class_tokens, const Var<T>& position,
                         std::size_t batch)
{
  if (batch == 0 || me.rows() % batch != 0) {
    throw ShapeError("assemble_sequence: patch rows not divisible by batch");
  }
  const std::size_t expected = me.rows() / batch + class_tokens.rows();
  if (position.rows() != expected || position.cols() != me.cols()) {
    throw ShapeError("assemble_sequence: position embedding " + shape_string(position.shape()) +
                     " expected [" + std::to_string(expected) + "x" + std::to_string(me.cols()) + "]");
  }
  return ops::add_tiled(ops::prepend_tokens(me, class_tokens, batch), position);
}

template <typename T>
Backbone<T>::Backbone(const BackboneConfig& config, Rng& rng) : config_(config)
{
  config_.validate();
  const std::size_t d = config_.dim;
  patch_embed_ = make_linear(d, config_.patch_dim(), rng);
  class_tokens_ = Var<T>::leaf(trunc_normal_tensor<T>({config_.class_tokens(), d}, rng));
  position_ = Var<T>::leaf(trunc_normal_tensor<T>({config_.sequence_length(), d}, rng));
  blocks_.reserve(config_.depth);
  for (std::size_t i = 0; i < config_.depth; ++i) {
    Block blk;
    blk.norm1 = make_norm();
    blk.qkv = make_linear(3 * d, d, rng);
    blk.proj = make_linear(d, d, rng);
    blk.norm2 = make_norm();
    blk.fc1 = make_linear(config_.hidden_dim(), d, rng);
    blk.fc2 = make_linear(d, config_.hidden_dim(), rng);
    blocks_.push_back(std::move(blk));
  }
  final_norm_ = make_norm();
}

template <typename T>
typename Backbone<T>::Linear Backbone<T>::make_linear(std::size_t out, std::size_t in, Rng& rng) const
{
  return {Var<T>::leaf(trunc_normal_tensor<T>({out, in}, rng)), Var<T>::leaf(Tensor<T>({out}))};
}

template <typename T>
typename Backbone<T>::Norm Backbone<T>::make_norm() const
{
  return {Var<T>::leaf(Tensor<T>({config_.dim}, T(1))), Var<T>::leaf(Tensor<T>({config_.dim}))};
}

template <typename T>
Var<T> Backbone<T>::maybe_dropout(const Var<T>& x, Rng* rng) const
{
  if (!rng || config_.dropout <= 0.0) return x;
  return ops::dropout(x, static_cast<T>(config_.dropout), *rng);
}

template <typename T>
Var<T> Backbone<T>::patchify(const Tensor<T>& images) const
{
  auto patches = Var<T>::constant(extract_patches(images, config_));
  return ops::linear(patches, patch_embed_.weight, patch_embed_.bias);
}

template <typename T>
Representations<T> Backbone<T>::encode(const Var<T>& sequence, std::size_t batch, ForwardTrace* trace,
                                       Rng* dropout_rng) const
{
  const std::size_t len = config_.sequence_length();
  if (sequence.rows() != batch * len || sequence.cols() != config_.dim) {
    throw ShapeError("encode: sequence " + shape_string(sequence.shape()) + " expected [" +
                     std::to_string(batch * len) + "x" + std::to_string(config_.dim) + "]");
  }
  Var<T> x = maybe_dropout(sequence, dropout_rng);
  for (const auto& blk : blocks_) {
    if (trace) trace->layer_lengths.push_back(x.rows() / batch);
    auto h = ops::layer_norm(x, blk.norm1.gamma, blk.norm1.beta);
    h = ops::linear(h, blk.qkv.weight, blk.qkv.bias);
    h = ops::self_attention(h, batch, len, config_.heads);
    h = ops::linear(h, blk.proj.weight, blk.proj.bias);
    x = ops::add(x, maybe_dropout(h, dropout_rng));
    h = ops::layer_norm(x, blk.norm2.gamma, blk.norm2.beta);
    h = ops::gelu(ops::linear(h, blk.fc1.weight, blk.fc1.bias));
    h = ops::linear(h, blk.fc2.weight, blk.fc2.bias);
    x = ops::add(x, maybe_dropout(h, dropout_rng));
  }
  x = ops::layer_norm(x, final_norm_.gamma, final_norm_.beta);
  if (trace) trace->layer_lengths.push_back(x.rows() / batch);

  Representations<T> reps;
  reps.batch = batch;
  std::vector<std::size_t> rows(batch);
  for (std::size_t s = 0; s < config_.class_tokens(); ++s) {
    for (std::size_t b = 0; b < batch; ++b) rows[b] = b * len + s;
    auto token = ops::gather_rows(x, rows);
    if (s == 0) {
      reps.primary = token;
    } else {
      reps.auxiliary.push_back(token);
    }
  }
  return reps;
}

template <typename T>
Representations<T> Backbone<T>::forward(const Tensor<T>& images, ForwardTrace* trace,
                                        Rng* dropout_rng) const
{
  const std::size_t batch = images.dim(0);
  auto z0 = patchify(images);
  auto me = maximum_embedding(z0, batch, config_.max_embedding);
  auto z = assemble_sequence(me, class_tokens_, position_, batch);
  return encode(z, batch, trace, dropout_rng);
}

template <typename T>
ParamList<T> Backbone<T>::params() const
{
  ParamList<T> out;
  out.push_back({"patch_embed.weight", patch_embed_.weight});
  out.push_back({"patch_embed.bias", patch_embed_.bias});
  out.push_back({"class_tokens", class_tokens_});
  out.push_back({"position_embedding", position_});
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto p = "blocks." + std::to_string(i) + ".";
    const auto& b = blocks_[i];
    out.push_back({p + "norm1.gamma", b.norm1.gamma});
    out.push_back({p + "norm1.beta", b.norm1.beta});
    out.push_back({p + "qkv.weight", b.qkv.weight});
    out.push_back({p + "qkv.bias", b.qkv.bias});
    out.push_back({p + "proj.weight", b.proj.weight});
    out.push_back({p + "proj.bias", b.proj.bias});
    out.push_back({p + "norm2.gamma", b.norm2.gamma});
    out.push_back({p + "norm2.beta", b.norm2.beta});
    out.push_back({p + "fc1.weight", b.fc1.weight});
    out.push_back({p + "fc1.bias", b.fc1.bias});
    out.push_back({p + "fc2.weight", b.fc2.weight});
    out.push_back({p + "fc2.bias", b.fc2.bias});
  }
  out.push_back({"norm.gamma", final_norm_.gamma});
  out.push_back({"norm.beta", final_norm_.beta});
  return out;
}

#define DRE_INSTANTIATE_BACKBONE(T)                                                              \
  template Tensor<T> trunc_normal_tensor(Shape, Rng&, double);                                   \
  template void copy_param_values(const ParamList<T>&, const ParamList<T>&);                     \
  template Tensor<T> extract_patches(const Tensor<T>&, const BackboneConfig&);                   \
  template std::vector<std::size_t> max_patch_indices(const Tensor<T>&, std::size_t);            \
  template Var<T> maximum_embedding(const Var<T>&, std::size_t, MaxEmbeddingMode);               \
  template Var<T> assemble_sequence(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t);   \
  template class Backbone<T>;

DRE_INSTANTIATE_BACKBONE(float)
DRE_INSTANTIATE_BACKBONE(double)

}  // namespace dre
