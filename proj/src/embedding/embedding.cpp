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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "hkg/embedding.hpp"
#include "hkg/error.hpp"
#include "hkg/util.hpp"

namespace hkg::embedding {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

std::string read_gzip(const std::filesystem::path& path) {
  gzFile file = gzopen(path.string().c_str(), "rb");
  if (file == nullptr) throw FormatError("cannot open " + path.string());
  std::string out;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(file, buf, sizeof(buf))) > 0) out.append(buf, static_cast<std::size_t>(n));
  const bool failed = n < 0;
  gzclose(file);
  if (failed) throw FormatError(path.string() + ": corrupt gzip stream");
  return out;
}

}  // namespace

const std::vector<double>* EmbeddingTable::find(std::string_view token) const {
  const auto it = entries.find(lowercase(token));
  return it == entries.end() ? nullptr : &it->second;
}

EmbeddingTable parse_embedding_text(std::string_view text, std::string_view source) {
  EmbeddingTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    std::string word;
    while (fields >> word) {
      try {
        values.push_back(parse_double(word));
      } catch (const FormatError&) {
        throw FormatError(std::string(source) + ":" + std::to_string(line_no) + ": bad number '" + word + "'");
      }
    }
    if (table.dim == 0) {
      if (values.empty()) throw FormatError(std::string(source) + ":" + std::to_string(line_no) + ": no vector values");
      table.dim = values.size();
    } else if (values.size() != table.dim) {
      throw FormatError(std::string(source) + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.dim) +
                        " values, found " + std::to_string(values.size()));
    }
    table.entries.insert_or_assign(lowercase(token), std::move(values));
  }
  if (table.entries.empty()) throw FormatError(std::string(source) + ": empty embedding file");
  return table;
}

EmbeddingTable parse_embedding_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open embedding file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.size() >= 2 && static_cast<unsigned char>(text[0]) == 0x1f && static_cast<unsigned char>(text[1]) == 0x8b) {
    text = read_gzip(path);
  }
  return parse_embedding_text(text, path.string());
}

OovPolicy parse_oov_policy(std::string_view name) {
  if (name == "strict") return OovPolicy::strict;
  if (name == "skip") return OovPolicy::skip;
  if (name == "zero") return OovPolicy::zero;
  throw ParameterError("unknown OOV policy '" + std::string(name) + "'");
}

std::vector<std::string> tokenize_class_name(std::string_view name) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : name) {
    if (ch == '-' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty()) out.push_back(lowercase(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  if (!current.empty()) out.push_back(lowercase(current));
  return out;
}

ClassEmbeddings class_embeddings(const hierarchy::LabelTree& tree, const EmbeddingTable& table, OovPolicy policy) {
  if (table.entries.empty() || table.dim == 0) throw ParameterError("class_embeddings: empty embedding table");
  ClassEmbeddings out{Matrix(tree.class_count(), table.dim), tree.node_order()};
  for (std::size_t cls = 0; cls < tree.class_count(); ++cls) {
    std::size_t found = 0;
    std::vector<std::string> missing;
    auto row = out.matrix.row(cls);
    // Sorted so the floating-point sum does not depend on word order.
    auto tokens = tokenize_class_name(tree.name(cls));
    std::sort(tokens.begin(), tokens.end());
    for (const auto& token : tokens) {
      const auto* vec = table.find(token);
      if (vec == nullptr) {
        missing.push_back(token);
        continue;
      }
      for (std::size_t k = 0; k < table.dim; ++k) row[k] += (*vec)[k];
      ++found;
    }
    if (found == 0) {
      if (policy == OovPolicy::zero) continue;
      throw LookupError("class_embeddings: no token of '" + tree.name(cls) + "' is in the embedding table");
    }
    if (!missing.empty() && policy == OovPolicy::strict) {
      throw LookupError("class_embeddings: token '" + missing.front() + "' of '" + tree.name(cls) + "' is missing");
    }
    for (auto& v : row) v /= static_cast<double>(found);
    for (double v : row)
      if (!std::isfinite(v)) throw NumericError("class_embeddings: non-finite value for '" + tree.name(cls) + "'");
  }
  return out;
}

}  // namespace hkg::embedding
