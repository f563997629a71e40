// Copyright 2026 The HKG Authors.
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

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hkg/hierarchy.hpp"
#include "hkg/matrix.hpp"

namespace hkg::embedding {

/// Word vectors keyed by lowercase token.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> entries;

  const std::vector<double>* find(std::string_view token) const;
};

/// Parses `token v1 ... vd` lines; gzip input is detected by its magic bytes.
EmbeddingTable parse_embedding_file(const std::filesystem::path& path);
EmbeddingTable parse_embedding_text(std::string_view text, std::string_view source = "<memory>");

enum class OovPolicy {
  strict,  // any missing token is an error
  skip,    // average over the tokens that were found (error when none is)
  zero,    // a class with no known token gets the zero vector
};

OovPolicy parse_oov_policy(std::string_view name);

/// Lowercase tokens split on whitespace and hyphens.
std::vector<std::string> tokenize_class_name(std::string_view name);

/// C x d matrix whose row i embeds class i of the tree (node order).
struct ClassEmbeddings {
  Matrix matrix;
  std::vector<std::string> node_order;
};

ClassEmbeddings class_embeddings(const hierarchy::LabelTree& tree, const EmbeddingTable& table,
                                 OovPolicy policy = OovPolicy::skip);

}  // namespace hkg::embedding
