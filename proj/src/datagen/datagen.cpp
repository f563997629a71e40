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

#include "hkg/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "hkg/error.hpp"
#include "hkg/rng.hpp"
#include "hkg/util.hpp"

namespace hkg::datagen {

namespace fs = std::filesystem;
using nlohmann::json;

void ValveOperatingPoint::validate() const {
  if (!std::isfinite(p_u) || !std::isfinite(p_d) || !std::isfinite(p_min) || !std::isfinite(p_v))
    throw PhysicsInputError("operating point has a non-finite pressure");
  if (!(p_u > p_d)) throw PhysicsInputError("upstream pressure must exceed downstream pressure");
  if (!(p_u > p_min)) throw PhysicsInputError("upstream pressure must exceed the internal minimum");
  if (p_v < 0.0) throw PhysicsInputError("vapor pressure must be non-negative");
}

CavitationCoefficients cavitation_coefficients(const ValveOperatingPoint& op) {
  if (!std::isfinite(op.p_u) || !std::isfinite(op.p_d) || !std::isfinite(op.p_min) || !std::isfinite(op.p_v))
    throw PhysicsInputError("operating point has a non-finite pressure");
  if (op.p_u == op.p_min) throw PhysicsInputError("p_u equals p_min: X_FZ undefined");
  if (op.p_u == op.p_v) throw PhysicsInputError("p_u equals p_v: X_F undefined");
  const double dp = op.p_u - op.p_d;
  return {dp / (op.p_u - op.p_min), dp / (op.p_u - op.p_v)};
}

std::string_view to_string(FlowRegime r) {
  switch (r) {
    case FlowRegime::none: return "none";
    case FlowRegime::incipient: return "incipient";
    case FlowRegime::constant: return "constant";
    case FlowRegime::choked: return "choked";
    case FlowRegime::flashing: return "flashing";
  }
  return "?";
}

FlowRegime parse_flow_regime(std::string_view name) {
  for (auto r : {FlowRegime::none, FlowRegime::incipient, FlowRegime::constant, FlowRegime::choked,
                 FlowRegime::flashing})
    if (to_string(r) == name) return r;
  throw ParameterError("unknown flow regime '" + std::string(name) + "'");
}

FlowRegime regime(double x_fz, double x_f, double band) {
  if (!std::isfinite(x_fz) || !std::isfinite(x_f)) throw ParameterError("regime: coefficients must be finite");
  if (x_f > 1.0) return FlowRegime::flashing;
  if (std::abs(x_f - x_fz) <= band) return FlowRegime::incipient;
  if (x_f < x_fz) return FlowRegime::none;
  const double d = (x_f - x_fz) / (1.0 - x_fz);
  return d <= 2.0 / 3.0 ? FlowRegime::constant : FlowRegime::choked;
}

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

// Spec ----------------------------------------------------------------------

SyntheticSpec SyntheticSpec::cavitation_default() {
  SyntheticSpec s;
  s.leaves = {
      {"non-cavitation", 20, FlowRegime::none, {50.0, 3000.0, 0.5, 0.0, 0.0, 0.002}},
      {"incipient-cavitation", 20, FlowRegime::incipient, {50.0, 5000.0, 0.6, 5.0, 2.0, 0.002}},
      {"constant-cavitation", 20, FlowRegime::constant, {50.0, 8000.0, 0.8, 20.0, 3.0, 0.002}},
      {"choked-flow-cavitation", 20, FlowRegime::choked, {50.0, 12000.0, 1.0, 60.0, 4.0, 0.002}},
  };
  return s;
}

void SyntheticSpec::validate() const {
  if (leaves.empty()) throw ParameterError("synthetic spec: no leaves");
  if (!(duration > 0.0) || !std::isfinite(duration)) throw ParameterError("synthetic spec: duration must be > 0");
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw ParameterError("synthetic spec: sample_rate must be > 0");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ParameterError("synthetic spec: test_fraction must lie in (0, 1)");
  if (!(jitter >= 0.0 && jitter < 1.0)) throw ParameterError("synthetic spec: jitter must lie in [0, 1)");
  if (!(incipient_band >= 0.0)) throw ParameterError("synthetic spec: incipient_band must be >= 0");
  if (!(p_u > p_v) || p_v < 0.0) throw ParameterError("synthetic spec: need p_u > p_v >= 0");
  for (const auto& l : leaves) {
    const auto& g = l.signature;
    if (l.leaf.empty()) throw ParameterError("synthetic spec: leaf without a name");
    if (l.streams == 0) throw ParameterError("synthetic spec: leaf '" + l.leaf + "' has no streams");
    if (!(g.band_low >= 0.0 && g.band_high > g.band_low))
      throw ParameterError("synthetic spec: leaf '" + l.leaf + "' needs 0 <= band_low < band_high");
    if (!(sample_rate > 2.0 * g.band_high * (1.0 + jitter))) {
      throw ParameterError("synthetic spec: leaf '" + l.leaf + "' band edge " + format_double(g.band_high) +
                           " Hz is too high for sample rate " + format_double(sample_rate) + " Hz");
    }
    if (g.noise_amplitude < 0.0 || g.burst_rate < 0.0 || g.burst_amplitude < 0.0 || !(g.burst_decay > 0.0))
      throw ParameterError("synthetic spec: leaf '" + l.leaf + "' has a negative signature parameter");
  }
}

namespace {

json signature_json(const ClassSignature& g) {
  return {{"band_low", g.band_low},
          {"band_high", g.band_high},
          {"noise_amplitude", g.noise_amplitude},
          {"burst_rate", g.burst_rate},
          {"burst_amplitude", g.burst_amplitude},
          {"burst_decay", g.burst_decay}};
}

json spec_json(const SyntheticSpec& s) {
  json leaves = json::array();
  for (const auto& l : s.leaves) {
    leaves.push_back({{"leaf", l.leaf},
                      {"streams", l.streams},
                      {"regime", std::string(to_string(l.regime))},
                      {"signature", signature_json(l.signature)}});
  }
  return {{"seed", s.seed},
          {"duration", s.duration},
          {"sample_rate", s.sample_rate},
          {"test_fraction", s.test_fraction},
          {"jitter", s.jitter},
          {"incipient_band", s.incipient_band},
          {"p_u", s.p_u},
          {"p_v", s.p_v},
          {"leaves", leaves}};
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("synthetic spec: field '") + key + "' has the wrong type");
  }
}

}  // namespace

std::string SyntheticSpec::to_json() const { return spec_json(*this).dump(2); }

SyntheticSpec SyntheticSpec::from_json_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("synthetic spec: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("synthetic spec: top level must be an object");
  SyntheticSpec s = cavitation_default();
  read_field(j, "seed", s.seed);
  read_field(j, "duration", s.duration);
  read_field(j, "sample_rate", s.sample_rate);
  read_field(j, "test_fraction", s.test_fraction);
  read_field(j, "jitter", s.jitter);
  read_field(j, "incipient_band", s.incipient_band);
  read_field(j, "p_u", s.p_u);
  read_field(j, "p_v", s.p_v);
  if (j.contains("streams_per_leaf")) {
    std::size_t n = 0;
    read_field(j, "streams_per_leaf", n);
    for (auto& l : s.leaves) l.streams = n;
  }
  if (j.contains("leaves")) {
    if (!j["leaves"].is_array()) throw ConfigError("synthetic spec: 'leaves' must be an array");
    s.leaves.clear();
    for (const auto& jl : j["leaves"]) {
      LeafRecipe l;
      read_field(jl, "leaf", l.leaf);
      read_field(jl, "streams", l.streams);
      std::string r = "none";
      read_field(jl, "regime", r);
      l.regime = parse_flow_regime(r);
      if (jl.contains("signature")) {
        const auto& g = jl["signature"];
        read_field(g, "band_low", l.signature.band_low);
        read_field(g, "band_high", l.signature.band_high);
        read_field(g, "noise_amplitude", l.signature.noise_amplitude);
        read_field(g, "burst_rate", l.signature.burst_rate);
        read_field(g, "burst_amplitude", l.signature.burst_amplitude);
        read_field(g, "burst_decay", l.signature.burst_decay);
      }
      s.leaves.push_back(std::move(l));
    }
  }
  s.validate();
  return s;
}

SyntheticSpec SyntheticSpec::from_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read synthetic spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

// Synthesis -----------------------------------------------------------------

signal::RawStream synth_stream(const LeafRecipe& recipe, const SyntheticSpec& spec, std::uint64_t seed,
                               std::size_t* bursts) {
  const auto& g = recipe.signature;
  if (!(spec.sample_rate > 2.0 * g.band_high * (1.0 + spec.jitter)) || !(g.band_high > g.band_low) ||
      g.band_low < 0.0) {
    throw ParameterError("synth_stream: band [" + format_double(g.band_low) + ", " + format_double(g.band_high) +
                         "] Hz invalid for sample rate " + format_double(spec.sample_rate) + " Hz");
  }
  const double fs_hz = spec.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration * fs_hz));
  if (n < 2) throw ParameterError("synth_stream: stream shorter than two samples");
  Rng rng(seed);
  auto spread = [&](double v) { return v * (1.0 + spec.jitter * rng.uniform(-1.0, 1.0)); };
  const double lo = spread(g.band_low);
  const double hi = spread(g.band_high);
  const double noise_amp = spread(g.noise_amplitude);
  const double rate = spread(g.burst_rate);

  std::vector<signal::Complex> white(n);
  for (auto& z : white) z = rng.normal();
  auto spectrum = signal::dft(white);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = static_cast<double>(std::min(k, n - k)) * fs_hz / static_cast<double>(n);
    if (f < lo || f > hi) spectrum[k] = 0.0;
  }
  const auto banded = signal::inverse_dft(spectrum);
  std::vector<double> x(n);
  double power = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = banded[i].real();
    power += x[i] * x[i];
  }
  const double rms = std::sqrt(power / static_cast<double>(n));
  for (auto& v : x) v = rms > 0.0 ? v * noise_amp / rms : 0.0;

  std::size_t placed = 0;
  if (rate > 0.0 && g.burst_amplitude > 0.0) {
    double t = rng.exponential(rate);
    while (t < spec.duration) {
      const double amp = g.burst_amplitude * rng.uniform(0.5, 1.5);
      const double freq = rng.uniform(lo, hi);
      const double decay = spread(g.burst_decay);
      const auto start = static_cast<std::size_t>(t * fs_hz);
      const auto len = static_cast<std::size_t>(8.0 * decay * fs_hz);
      for (std::size_t i = 0; i < len && start + i < n; ++i) {
        const double dt = static_cast<double>(i) / fs_hz;
        x[start + i] += amp * std::exp(-dt / decay) * std::sin(2.0 * std::numbers::pi * freq * dt);
      }
      ++placed;
      t += rng.exponential(rate);
    }
  }
  for (auto& v : x) v = static_cast<double>(static_cast<float>(v));
  if (bursts != nullptr) *bursts = placed;

  signal::RawStream out;
  out.samples = std::move(x);
  out.sample_rate = fs_hz;
  out.leaf_class = recipe.leaf;
  return out;
}

namespace {

bool regime_matches(FlowRegime target, FlowRegime got) {
  return got == target || (target == FlowRegime::choked && got == FlowRegime::flashing);
}

/// Rejection-samples an operating point whose regime matches the leaf.
ValveOperatingPoint draw_operating_point(const SyntheticSpec& spec, FlowRegime target, Rng& rng) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const double x_fz = rng.uniform(0.55, 0.85);
    const double x_f = rng.uniform(0.3, 1.15);
    ValveOperatingPoint op;
    op.p_u = spec.p_u;
    op.p_v = spec.p_v;
    op.p_d = op.p_u - x_f * (op.p_u - op.p_v);
    op.p_min = op.p_u - (op.p_u - op.p_d) / x_fz;
    const auto c = cavitation_coefficients(op);
    if (regime_matches(target, regime(c.x_fz, c.x_f, spec.incipient_band))) return op;
  }
  throw ParameterError("could not draw an operating point for regime '" + std::string(to_string(target)) + "'");
}

}  // namespace

std::vector<GeneratedStream> generate(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<GeneratedStream> out;
  std::uint64_t global = 0;
  for (std::size_t li = 0; li < spec.leaves.size(); ++li) {
    const auto& recipe = spec.leaves[li];
    if (recipe.streams < 2) {
      throw SplitError("leaf '" + recipe.leaf + "' has " + std::to_string(recipe.streams) +
                       " stream(s); at least 2 are needed for a train/test split");
    }
    // Stratified split: a seeded permutation of the leaf's streams.
    const auto n = recipe.streams;
    auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng split_rng(derive_seed(spec.seed, 0x5eed0000ULL + li));
    split_rng.shuffle(order.begin(), order.end());
    std::vector<Split> split(n, Split::train);
    for (std::size_t i = 0; i < n_test; ++i) split[order[i]] = Split::test;

    const std::size_t first = out.size();
    out.resize(first + n);
    parallel_for(n, [&](std::size_t i) {
      const std::uint64_t seed = derive_seed(spec.seed, global + i);
      char id[64];
      std::snprintf(id, sizeof id, "%s-%03zu", recipe.leaf.c_str(), i);
      auto& gs = out[first + i];
      gs.info.id = id;
      gs.info.leaf = recipe.leaf;
      gs.info.split = split[i];
      gs.info.seed = seed;
      Rng op_rng(derive_seed(seed, 1));
      gs.info.operating_point = draw_operating_point(spec, recipe.regime, op_rng);
      gs.info.coefficients = cavitation_coefficients(gs.info.operating_point);
      gs.info.regime = regime(gs.info.coefficients.x_fz, gs.info.coefficients.x_f, spec.incipient_band);
      gs.stream = synth_stream(recipe, spec, seed, &gs.info.bursts);
      gs.stream.stream_id = gs.info.id;
    });
    global += n;
  }
  return out;
}

std::string Manifest::to_json() const {
  json streams_j = json::array();
  json counts = json::object();
  for (const auto& l : spec.leaves) counts[l.leaf] = {{"train", 0}, {"test", 0}};
  for (const auto& s : streams) {
    const auto& c = s.coefficients;
    const auto& op = s.operating_point;
    streams_j.push_back({{"id", s.id},
                         {"leaf", s.leaf},
                         {"split", std::string(to_string(s.split))},
                         {"seed", s.seed},
                         {"bursts", s.bursts},
                         {"p_u", op.p_u},
                         {"p_d", op.p_d},
                         {"p_min", op.p_min},
                         {"p_v", op.p_v},
                         {"x_fz", c.x_fz},
                         {"x_f", c.x_f},
                         {"regime", std::string(to_string(s.regime))}});
    auto& slot = counts[s.leaf][std::string(to_string(s.split))];
    slot = slot.get<std::size_t>() + 1;
  }
  json j{{"spec", spec_json(spec)}, {"counts", counts}, {"streams", streams_j}};
  return j.dump(2);
}

void Manifest::write_regime_csv(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "stream_id,leaf,split,p_u,p_d,p_min,p_v,x_fz,x_f,regime\n";
  for (const auto& s : streams) {
    const auto& op = s.operating_point;
    out << s.id << ',' << s.leaf << ',' << to_string(s.split) << ',' << format_double(op.p_u) << ','
        << format_double(op.p_d) << ',' << format_double(op.p_min) << ',' << format_double(op.p_v) << ','
        << format_double(s.coefficients.x_fz) << ',' << format_double(s.coefficients.x_f) << ','
        << to_string(s.regime) << '\n';
  }
}

Manifest make_dataset(const SyntheticSpec& spec, const fs::path& root) {
  auto generated = generate(spec);
  Manifest m;
  m.spec = spec;
  for (auto& g : generated) {
    const auto dir = root / std::string(to_string(g.info.split)) / g.info.leaf;
    fs::create_directories(dir);
    signal::write_stream_csv(dir / (g.info.id + ".csv"), g.stream);
    m.streams.push_back(std::move(g.info));
  }
  {
    std::ofstream out(root / "manifest.json");
    if (!out) throw FormatError("cannot write " + (root / "manifest.json").string());
    out << m.to_json() << '\n';
  }
  m.write_regime_csv(root / "regimes.csv");
  return m;
}

}  // namespace hkg::datagen
