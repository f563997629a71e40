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
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include "hkg/error.hpp"
#include "hkg/signal.hpp"
#include "hkg/util.hpp"

namespace hkg::signal {

namespace fs = std::filesystem;

RawStream read_stream_csv(const fs::path& path, std::string leaf_class) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open stream file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  const std::string header = trim(line);
  const std::string key = "sample_rate=";
  const auto pos = header.find(key);
  if (header.empty() || header.front() != '#' || pos == std::string::npos) {
    throw FormatError(path.string() + ":1: expected '# sample_rate=<Hz>' header");
  }
  RawStream stream;
  stream.sample_rate = parse_double(header.substr(pos + key.size()));
  if (!(stream.sample_rate > 0.0)) throw FormatError(path.string() + ":1: sample rate must be positive");
  stream.leaf_class = std::move(leaf_class);
  stream.stream_id = path.stem().string();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    try {
      stream.samples.push_back(parse_double(t));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (stream.samples.empty()) throw FormatError(path.string() + ": no samples");
  return stream;
}

void write_stream_csv(const fs::path& path, const RawStream& stream) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "# sample_rate=" << format_double(stream.sample_rate) << '\n';
  for (double v : stream.samples) out << format_double(v) << '\n';
}

std::vector<RawStream> read_stream_directory(const fs::path& root) {
  if (!fs::is_directory(root)) throw FormatError("not a directory: " + root.string());
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  std::vector<RawStream> out;
  for (const auto& dir : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back(read_stream_csv(f, dir.filename().string()));
  }
  return out;
}

void write_spectrogram_csv(const fs::path& path, const Spectrogram& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (std::size_t y = 0; y < spec.height; ++y) {
    for (std::size_t x = 0; x < spec.width; ++x) {
      if (x) out << ',';
      out << format_double(spec.at(0, y, x));
    }
    out << '\n';
  }
}

void write_spectrogram_pgm(const fs::path& path, const Spectrogram& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  double lo = 0.0;
  for (std::size_t i = 0; i < spec.height * spec.width; ++i) lo = std::min(lo, spec.values[i]);
  out << "P5\n" << spec.width << ' ' << spec.height << "\n255\n";
  for (std::size_t y = 0; y < spec.height; ++y) {
    for (std::size_t x = 0; x < spec.width; ++x) {
      const double v = lo < 0.0 ? (spec.at(0, y, x) - lo) / -lo : 1.0;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    }
  }
}

}  // namespace hkg::signal
