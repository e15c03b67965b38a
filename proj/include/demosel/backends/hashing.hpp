// Copyright 2026 The demosel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "demosel/backends/backend.hpp"

namespace demosel {

inline constexpr std::size_t kDefaultHashingDim = 256;

/// Lowercase alphanumeric word unigrams.
std::vector<std::string> word_tokens(std::string_view text);

/// Deterministic embedding double: signed feature hashing of lowercase word
/// unigrams, then L2 normalization. Word order does not matter.
class HashingEmbedder final : public EmbeddingBackend {
public:
    explicit HashingEmbedder(std::size_t dim = kDefaultHashingDim, std::uint64_t seed = 0);

    std::size_t dim() const override { return dim_; }
    std::string model_name() const override;

    EmbeddingVector embed_text(std::string_view text) const;

protected:
    std::vector<EmbeddingVector> do_embed(std::span<const std::string> texts) override;

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

}  // namespace demosel
