#pragma once

// WAV ingestion (PCM16 / float32, mono or stereo), resampling to 16 kHz and
// dataset manifests.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sigwav/training.hpp"

namespace sigwav::audio {

inline constexpr unsigned kTargetRate = 16000;

struct AudioClip {
  std::vector<double> samples;  // mono, [-1, 1]
  unsigned sample_rate = kTargetRate;
  std::size_t label = 0;
  std::string source;
};

AudioClip parse_wav(std::span<const std::uint8_t> bytes, const std::string& source);
AudioClip load_wav(const std::string& path);
// Mono PCM16, values clipped to [-1, 32767/32768].
void write_wav(const std::string& path, const AudioClip& clip);

bool supported_rate(unsigned rate);
// Kaiser-windowed sinc (64 taps, beta 8.6) over a polyphase table.
std::vector<double> resample(std::span<const double> x, unsigned from_rate, unsigned to_rate);
AudioClip resample_to_16k(const AudioClip& clip);

struct ManifestRow {
  std::string path;
  std::string label;
};

struct DatasetManifest {
  std::vector<ManifestRow> rows;
  std::vector<std::string> vocabulary;  // first-seen order
};

// CSV with header `path,label`.
DatasetManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const DatasetManifest& manifest);

// Loads every row (wav -> mono -> 16 kHz). With a fixed vocabulary, unknown
// labels raise label errors; otherwise the manifest's own vocabulary is used.
training::Dataset load_dataset(const DatasetManifest& manifest, const std::string& root,
                               const std::vector<std::string>& vocabulary);

// EMO-DB: the sixth filename character codes the emotion.
const std::vector<std::string>& emodb_labels();
std::string emodb_label(const std::string& filename);
DatasetManifest emodb_manifest(const std::string& directory);

}  // namespace sigwav::audio
