#include "sigwav/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sigwav/error.hpp"

namespace sigwav::synthetic {

namespace {

constexpr std::size_t kTonesPerComponent = 4;

std::uint64_t clip_seed(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

SyntheticSpec default_spec() {
  SyntheticSpec s;
  s.classes = {
      {"c0", {{5, 1.0, 3.0}, {2, 0.05, 11.0}}},
      {"c1", {{4, 1.0, 5.0}, {1, 0.05, 9.0}}},
      {"c2", {{3, 1.0, 4.0}, {6, 0.05, 13.0}}},
      {"c3", {{2, 1.0, 6.0}, {5, 0.05, 7.0}}},
  };
  return s;
}

SyntheticSpec load_spec(const std::string& path) {
  namespace pt = boost::property_tree;
  std::ifstream in(path);
  require(in.good(), ErrorCategory::config, "cannot open synthetic spec " + path);
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCategory::config, path + ": " + e.message() + " at line " + std::to_string(e.line()));
  }
  SyntheticSpec s;
  try {
    if (auto g = tree.get_child_optional("synthetic")) {
      s.seed = g->get("seed", s.seed);
      s.min_length = g->get("min_length", s.min_length);
      s.max_length = g->get("max_length", s.max_length);
      s.noise_floor = g->get("noise_floor", s.noise_floor);
    }
    const auto classes = tree.get_child_optional("classes");
    require(classes.has_value() && !classes->empty(), ErrorCategory::config,
            path + ": no [classes] section");
    for (const auto& [name, value] : *classes) {
      ClassSpec c{name, {}};
      std::vector<std::string> parts;
      const std::string text = boost::trim_copy(value.data());
      boost::split(parts, text, boost::is_any_of(" \t"), boost::token_compress_on);
      for (const auto& p : parts) {
        std::vector<std::string> f;
        boost::split(f, p, boost::is_any_of(":"));
        require(f.size() == 3, ErrorCategory::config,
                path + ": component '" + p + "' of class " + name + " is not band:energy:am_rate");
        c.components.push_back({std::stoul(f[0]), std::stod(f[1]), std::stod(f[2])});
      }
      s.classes.push_back(std::move(c));
    }
  } catch (const pt::ptree_error& e) {
    fail(ErrorCategory::config, path + ": " + e.what());
  } catch (const std::logic_error& e) {
    fail(ErrorCategory::config, path + ": malformed number (" + e.what() + ")");
  }
  return s;
}

std::pair<double, double> band_range(std::size_t band, std::size_t levels, unsigned sample_rate) {
  const double nyquist = sample_rate / 2.0;
  if (band >= levels) return {0.0, nyquist / std::ldexp(1.0, static_cast<int>(levels))};
  const double hi = nyquist / std::ldexp(1.0, static_cast<int>(band));
  return {hi / 2, hi};
}

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::size_t n_per_class, std::size_t levels,
                                 std::size_t minimum_length) {
  require(!spec.classes.empty(), ErrorCategory::config, "synthetic spec has no classes");
  require(spec.min_length <= spec.max_length, ErrorCategory::config,
          "synthetic min_length exceeds max_length");
  require(spec.min_length >= minimum_length, ErrorCategory::config,
          "synthetic min_length " + std::to_string(spec.min_length) +
              " is below the front-end minimum " + std::to_string(minimum_length));
  for (const auto& c : spec.classes)
    for (const auto& comp : c.components) {
      require(comp.band < levels + 1, ErrorCategory::config,
              "class " + c.name + " uses band " + std::to_string(comp.band) + " but only " +
                  std::to_string(levels + 1) + " bands exist");
      require(comp.energy >= 0, ErrorCategory::config, "negative component energy in " + c.name);
    }

  SyntheticData out;
  for (const auto& c : spec.classes) out.labels.push_back(c.name);
  const double fs = spec.sample_rate;
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t k = 0; k < spec.classes.size(); ++k) {
      const std::size_t index = i * spec.classes.size() + k;
      std::mt19937_64 rng(clip_seed(spec.seed, index));
      std::uniform_int_distribution<std::size_t> len_dist(spec.min_length, spec.max_length);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::normal_distribution<double> noise(0.0, spec.noise_floor);
      const std::size_t n = len_dist(rng);
      std::vector<double> x(n, 0.0);
      for (const auto& comp : spec.classes[k].components) {
        const auto [lo, hi] = band_range(comp.band, levels, spec.sample_rate);
        // Keep tones away from the band edges where adjacent filters overlap.
        const double f_lo = lo > 0 ? lo * 1.2 : hi * 0.3;
        const double f_hi = hi * 0.85;
        const double amp = std::sqrt(2.0 * comp.energy / kTonesPerComponent);
        const double am_phase = 2 * std::numbers::pi * unit(rng);
        for (std::size_t t = 0; t < kTonesPerComponent; ++t) {
          const double f = f_lo + (f_hi - f_lo) * unit(rng);
          const double phase = 2 * std::numbers::pi * unit(rng);
          for (std::size_t s = 0; s < n; ++s) {
            const double time = s / fs;
            const double env = 1.0 + 0.8 * std::sin(2 * std::numbers::pi * comp.am_rate * time + am_phase);
            x[s] += amp * env * std::sin(2 * std::numbers::pi * f * time + phase);
          }
        }
      }
      double peak = 0;
      for (double v : x) peak = std::max(peak, std::abs(v));
      const double scale = peak > 0 ? 0.5 / peak : 1.0;
      for (auto& v : x) v = std::clamp(v * scale + noise(rng), -1.0, 1.0);
      out.data.push_back({std::move(x), k, "synthetic_" + std::to_string(index)});
    }
  }
  return out;
}

}  // namespace sigwav::synthetic
