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
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hkg/signal.hpp"

namespace hkg::datagen {

/// Valve pressures in bar.
struct ValveOperatingPoint {
  double p_u = 0.0;    // upstream
  double p_d = 0.0;    // downstream
  double p_min = 0.0;  // internal minimum
  double p_v = 0.0;    // vapor pressure

  /// Throws PhysicsInputError unless p_u > p_d, p_u > p_min, p_v >= 0, all finite.
  void validate() const;
};

struct CavitationCoefficients {
  double x_fz = 0.0;  // (p_u - p_d) / (p_u - p_min)
  double x_f = 0.0;   // (p_u - p_d) / (p_u - p_v)
};

CavitationCoefficients cavitation_coefficients(const ValveOperatingPoint& op);

enum class FlowRegime { none, incipient, constant, choked, flashing };

std::string_view to_string(FlowRegime r);
FlowRegime parse_flow_regime(std::string_view name);

inline constexpr double kIncipientBand = 0.02;

/// X_F > 1 is flashing; |X_F - X_FZ| <= band incipient; X_F < X_FZ none.
/// Above X_FZ the normalised distance (X_F - X_FZ) / (1 - X_FZ) is split
/// into terciles: the lower two are constant cavitation, the top one choked.
FlowRegime regime(double x_fz, double x_f, double band = kIncipientBand);

/// Acoustic recipe for one leaf class.
struct ClassSignature {
  double band_low = 50.0;    // Hz
  double band_high = 3000.0;  // Hz
  double noise_amplitude = 1.0;  // RMS of the band noise
  double burst_rate = 0.0;       // bursts per second
  double burst_amplitude = 0.0;
  double burst_decay = 0.002;  // s
};

struct LeafRecipe {
  std::string leaf;
  std::size_t streams = 20;
  FlowRegime regime = FlowRegime::none;  // operating points are drawn from this regime
  ClassSignature signature;
};

struct SyntheticSpec {
  std::vector<LeafRecipe> leaves;
  double duration = 1.0;         // s
  double sample_rate = 31250.0;  // Hz
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  double jitter = 0.05;  // relative per-stream spread of the signature parameters
  double incipient_band = kIncipientBand;
  double p_u = 10.0;
  double p_v = 0.023;

  /// Four cavitation leaves with monotone band and burst parameters.
  static SyntheticSpec cavitation_default();
  static SyntheticSpec from_json_text(std::string_view text);
  static SyntheticSpec from_json_file(const std::filesystem::path& path);
  std::string to_json() const;

  void validate() const;
};

/// Band-limited Gaussian noise plus Poisson-timed exponentially decaying
/// tone bursts. Samples are rounded to float precision. `bursts` receives
/// the number of bursts placed.
signal::RawStream synth_stream(const LeafRecipe& recipe, const SyntheticSpec& spec, std::uint64_t seed,
                               std::size_t* bursts = nullptr);

enum class Split { train, test };
std::string_view to_string(Split s);

struct StreamInfo {
  std::string id;
  std::string leaf;
  Split split = Split::train;
  std::uint64_t seed = 0;
  std::size_t bursts = 0;
  ValveOperatingPoint operating_point;
  CavitationCoefficients coefficients;
  FlowRegime regime = FlowRegime::none;
};

struct GeneratedStream {
  signal::RawStream stream;
  StreamInfo info;
};

/// Streams for every leaf with a stratified stream-level split. Throws
/// SplitError for a leaf with fewer than two streams.
std::vector<GeneratedStream> generate(const SyntheticSpec& spec);

struct Manifest {
  SyntheticSpec spec;
  std::vector<StreamInfo> streams;

  std::string to_json() const;
  void write_regime_csv(const std::filesystem::path& path) const;
};

/// Writes <root>/{train,test}/<leaf>/<id>.csv, manifest.json and regimes.csv.
Manifest make_dataset(const SyntheticSpec& spec, const std::filesystem::path& root);

}  // namespace hkg::datagen
