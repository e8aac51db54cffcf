#pragma once

// Deterministic band-energy dataset. Each class puts tones into chosen
// octave bands of the wavelet cascade, each with its own amplitude
// modulation rate, over a white noise floor.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sigwav/training.hpp"

namespace sigwav::synthetic {

struct Component {
  std::size_t band = 0;  // 0 = d_1 (highest octave) ... levels = a_L
  double energy = 1.0;   // relative
  double am_rate = 0.0;  // Hz
};

struct ClassSpec {
  std::string name;
  std::vector<Component> components;
};

struct SyntheticSpec {
  std::vector<ClassSpec> classes;
  std::size_t min_length = 5120;
  std::size_t max_length = 6400;
  double noise_floor = 1e-4;
  std::uint64_t seed = 7;
  unsigned sample_rate = 16000;
};

SyntheticSpec default_spec();
// INI: [synthetic] seed/min_length/max_length/noise_floor, [classes] name = band:energy:am ...
SyntheticSpec load_spec(const std::string& path);

// Frequency range [lo, hi) in Hz covered by a band of an L-level cascade.
std::pair<double, double> band_range(std::size_t band, std::size_t levels, unsigned sample_rate);

struct SyntheticData {
  training::Dataset data;
  std::vector<std::string> labels;
};

// Clips interleaved by class. Lengths below `minimum_length` or bands beyond
// `levels` raise config errors.
SyntheticData generate_synthetic(const SyntheticSpec& spec, std::size_t n_per_class, std::size_t levels,
                                 std::size_t minimum_length);

}  // namespace sigwav::synthetic
