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

#include <cstddef>
#include <string>
#include <vector>

#include "dre/numerics/ops.hpp"
#include "dre/numerics/optim.hpp"
#include "dre/numerics/rng.hpp"

namespace dre {

/// How the per-channel prominent patch is folded back into the patch sequence.
enum class MaxEmbeddingMode {
  kEmphasis,  ///< Z0 * (1 + M): the argmax entry of every channel is doubled
  kMask,      ///< Z0 * M: only argmax entries survive
  kOff,       ///< identity
};

std::string to_string(MaxEmbeddingMode mode);
MaxEmbeddingMode parse_max_embedding_mode(const std::string& text);

struct BackboneConfig {
  std::size_t image_height = 32;
  std::size_t image_width = 32;
  std::size_t channels = 3;
  std::size_t patch = 8;
  std::size_t dim = 64;
  std::size_t depth = 4;
  std::size_t heads = 4;
  std::size_t aux_tokens = 2;  // S
  double mlp_ratio = 4.0;
  double dropout = 0.0;
  MaxEmbeddingMode max_embedding = MaxEmbeddingMode::kEmphasis;

  std::size_t num_patches() const { return (image_height / patch) * (image_width / patch); }
  std::size_t class_tokens() const { return aux_tokens + 1; }
  std::size_t sequence_length() const { return num_patches() + class_tokens(); }
  std::size_t patch_dim() const { return channels * patch * patch; }
  std::size_t hidden_dim() const;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// P, A^1..A^S and (after integration) P-hat for one batch, each B x D.
template <typename T>
struct Representations {
  Var<T> primary;
  std::vector<Var<T>> auxiliary;
  Var<T> integrated;
  std::size_t batch = 0;
};

/// Token count observed at the input of every encoder layer and at the output.
struct ForwardTrace {
  std::vector<std::size_t> layer_lengths;
};

/// Rearranges images [B, C, H, W] into flattened patches [B*N, C*p*p]; patches
/// are ordered row-major over the grid, each flattened as (channel, y, x).
template <typename T>
Tensor<T> extract_patches(const Tensor<T>& images, const BackboneConfig& config);

/// Index of the maximal patch per (batch item, channel); ties pick the lowest index.
/// Result is laid out [B, D].
template <typename T>
std::vector<std::size_t> max_patch_indices(const Tensor<T>& z0, std::size_t batch);

/// Z0 [B*N, D] -> M_E [B*N, D].
template <typename T>
Var<T> maximum_embedding(const Var<T>& z0, std::size_t batch, MaxEmbeddingMode mode);

/// [tokens; M_E] + position embedding, per batch item: [B*(S+1+N), D].
template <typename T>
Var<T> assemble_sequence(const Var<T>& me, const Var<T>& class_tokens, const Var<T>& position,
                         std::size_t batch);

template <typename T>
class Backbone {
public:
  Backbone(const BackboneConfig& config, Rng& rng);

  const BackboneConfig& config() const { return config_; }

  /// Z0 = F(patches), [B*N, D].
  Var<T> patchify(const Tensor<T>& images) const;

  /// Runs the encoder over an assembled sequence. `dropout_rng` null means eval mode.
  Representations<T> encode(const Var<T>& sequence, std::size_t batch, ForwardTrace* trace = nullptr,
                            Rng* dropout_rng = nullptr) const;

  Representations<T> forward(const Tensor<T>& images, ForwardTrace* trace = nullptr,
                             Rng* dropout_rng = nullptr) const;

  ParamList<T> params() const;

  const Var<T>& class_tokens() const { return class_tokens_; }
  const Var<T>& position_embedding() const { return position_; }

private:
  struct Linear {
    Var<T> weight;
    Var<T> bias;
  };
  struct Norm {
    Var<T> gamma;
    Var<T> beta;
  };
  struct Block {
    Norm norm1;
    Linear qkv;
    Linear proj;
    Norm norm2;
    Linear fc1;
    Linear fc2;
  };

  Linear make_linear(std::size_t out, std::size_t in, Rng& rng) const;
  Norm make_norm() const;
  Var<T> maybe_dropout(const Var<T>& x, Rng* rng) const;

  BackboneConfig config_;
  Linear patch_embed_;
  Var<T> class_tokens_;
  Var<T> position_;
  std::vector<Block> blocks_;
  Norm final_norm_;
};

/// Truncated normal (std 0.02) tensor.
template <typename T>
Tensor<T> trunc_normal_tensor(Shape shape, Rng& rng, double std = 0.02);

/// Copies values by name; throws on any name or shape mismatch.
template <typename T>
void copy_param_values(const ParamList<T>& dst, const ParamList<T>& src);

}  // namespace dre
