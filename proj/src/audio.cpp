#include "sigwav/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

#include <boost/algorithm/string.hpp>

#include "sigwav/error.hpp"

namespace sigwav::audio {

namespace fs = std::filesystem;

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

bool tag(std::span<const std::uint8_t> b, std::size_t at, const char* id) {
  return std::equal(id, id + 4, b.begin() + at);
}

[[noreturn]] void parse_fail(const std::string& source, std::size_t offset, const std::string& what) {
  fail(ErrorCategory::parse, source + ": " + what + " at byte " + std::to_string(offset));
}

void put16(std::ofstream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

void put32(std::ofstream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>(v >> 24)};
  os.write(b, 4);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  boost::split(fields, line, boost::is_any_of(","));
  for (auto& f : fields) boost::trim(f);
  return fields;
}

}  // namespace

AudioClip parse_wav(std::span<const std::uint8_t> b, const std::string& source) {
  if (b.size() < 12) parse_fail(source, 0, "file shorter than a RIFF header");
  if (!tag(b, 0, "RIFF")) parse_fail(source, 0, "missing RIFF tag");
  if (!tag(b, 8, "WAVE")) parse_fail(source, 8, "missing WAVE tag");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_at = 0, data_len = 0;
  std::size_t at = 12;
  while (at + 8 <= b.size()) {
    const std::uint32_t len = u32(b, at + 4);
    const std::size_t body = at + 8;
    if (body + len > b.size() && !tag(b, at, "data")) parse_fail(source, at, "chunk runs past end of file");
    if (tag(b, at, "fmt ")) {
      if (len < 16) parse_fail(source, at, "fmt chunk too short");
      format = u16(b, body);
      channels = u16(b, body + 2);
      rate = u32(b, body + 4);
      bits = u16(b, body + 14);
      if (format == kFormatExtensible) {
        if (len < 26) parse_fail(source, at, "extensible fmt chunk too short");
        format = u16(b, body + 24);
      }
      have_fmt = true;
    } else if (tag(b, at, "data")) {
      data_at = body;
      // Some writers leave the length unset; clamp to the file.
      data_len = std::min<std::size_t>(len, b.size() - body);
      break;
    }
    at = body + len + (len & 1);
  }
  if (!have_fmt) parse_fail(source, at, "no fmt chunk");
  if (data_at == 0) parse_fail(source, at, "no data chunk");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  require(pcm16 || f32, ErrorCategory::format,
          source + ": unsupported encoding (format code " + std::to_string(format) + ", " +
              std::to_string(bits) + " bits)");
  require(channels == 1 || channels == 2, ErrorCategory::format,
          source + ": unsupported channel count " + std::to_string(channels));
  require(rate > 0, ErrorCategory::format, source + ": zero sample rate");

  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  AudioClip clip;
  clip.sample_rate = rate;
  clip.source = source;
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t p = data_at + (f * channels + c) * width;
      if (pcm16) {
        acc += static_cast<std::int16_t>(u16(b, p)) / 32768.0;
      } else {
        const std::uint32_t raw = u32(b, p);
        float v;
        std::memcpy(&v, &raw, 4);
        acc += std::clamp(static_cast<double>(v), -1.0, 1.0);
      }
    }
    clip.samples[f] = acc / channels;
  }
  return clip;
}

AudioClip load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCategory::dataset, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_wav(bytes, path);
}

void write_wav(const std::string& path, const AudioClip& clip) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), ErrorCategory::dataset, "cannot write " + path);
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  os.write("RIFF", 4);
  put32(os, 36 + 2 * n);
  os.write("WAVEfmt ", 8);
  put32(os, 16);
  put16(os, kFormatPcm);
  put16(os, 1);
  put32(os, clip.sample_rate);
  put32(os, clip.sample_rate * 2);
  put16(os, 2);
  put16(os, 16);
  os.write("data", 4);
  put32(os, 2 * n);
  for (double s : clip.samples) {
    const double q = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    put16(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0))));
  }
  require(os.good(), ErrorCategory::dataset, "failed writing " + path);
}

bool supported_rate(unsigned rate) {
  return rate == 8000 || rate == 16000 || rate == 22050 || rate == 44100 || rate == 48000;
}

std::vector<double> resample(std::span<const double> x, unsigned from_rate, unsigned to_rate) {
  require(from_rate > 0 && to_rate > 0, ErrorCategory::format, "zero sample rate");
  if (from_rate == to_rate) return {x.begin(), x.end()};
  const unsigned g = std::gcd(from_rate, to_rate);
  const std::size_t up = to_rate / g, down = from_rate / g;
  constexpr int kTaps = 64;
  constexpr int kHalf = kTaps / 2;
  constexpr double kBeta = 8.6;
  const double cutoff = std::min(1.0, static_cast<double>(to_rate) / from_rate);
  const double i0_beta = std::cyl_bessel_i(0.0, kBeta);

  // table[p][j]: weight of x[i + j - kHalf + 1] for output phase p/up.
  std::vector<double> table(up * kTaps);
  for (std::size_t p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / up;
    double total = 0;
    for (int j = 0; j < kTaps; ++j) {
      const double t = (j - kHalf + 1) - frac;
      const double r = t / kHalf;
      const double window = std::abs(r) < 1 ? std::cyl_bessel_i(0.0, kBeta * std::sqrt(1 - r * r)) / i0_beta : 0.0;
      const double arg = std::numbers::pi * cutoff * t;
      const double sinc = t == 0 ? 1.0 : std::sin(arg) / arg;
      table[p * kTaps + j] = cutoff * sinc * window;
      total += table[p * kTaps + j];
    }
    for (int j = 0; j < kTaps; ++j) table[p * kTaps + j] /= total;
  }

  const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(x.size()) * to_rate / from_rate));
  std::vector<double> y(out_len, 0.0);
  if (x.empty()) return y;
  const auto last = static_cast<long long>(x.size()) - 1;
  for (std::size_t n = 0; n < out_len; ++n) {
    const std::size_t pos = n * down;
    const auto i = static_cast<long long>(pos / up);
    const double* h = table.data() + (pos % up) * kTaps;
    double acc = 0;
    for (int j = 0; j < kTaps; ++j) {
      const long long k = std::clamp<long long>(i + j - kHalf + 1, 0, last);
      acc += h[j] * x[static_cast<std::size_t>(k)];
    }
    y[n] = acc;
  }
  return y;
}

AudioClip resample_to_16k(const AudioClip& clip) {
  require(supported_rate(clip.sample_rate), ErrorCategory::format,
          clip.source + ": unsupported sample rate " + std::to_string(clip.sample_rate));
  if (clip.sample_rate == kTargetRate) return clip;
  AudioClip out = clip;
  out.samples = resample(clip.samples, clip.sample_rate, kTargetRate);
  for (auto& s : out.samples) s = std::clamp(s, -1.0, 1.0);
  out.sample_rate = kTargetRate;
  return out;
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::dataset, "cannot open manifest " + path);
  DatasetManifest m;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = split_csv_line(line);
    if (!header) {
      require(f.size() == 2 && f[0] == "path" && f[1] == "label", ErrorCategory::parse,
              path + ": expected header 'path,label' on line " + std::to_string(line_no));
      header = true;
      continue;
    }
    require(f.size() == 2 && !f[0].empty(), ErrorCategory::parse,
            path + ": malformed row on line " + std::to_string(line_no));
    require(!f[1].empty(), ErrorCategory::label, path + ": empty label on line " + std::to_string(line_no));
    if (std::find(m.vocabulary.begin(), m.vocabulary.end(), f[1]) == m.vocabulary.end())
      m.vocabulary.push_back(f[1]);
    m.rows.push_back({f[0], f[1]});
  }
  require(header, ErrorCategory::parse, path + ": missing 'path,label' header");
  return m;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream os(path);
  require(os.good(), ErrorCategory::dataset, "cannot write manifest " + path);
  os << "path,label\n";
  for (const auto& r : manifest.rows) os << r.path << ',' << r.label << '\n';
}

training::Dataset load_dataset(const DatasetManifest& manifest, const std::string& root,
                               const std::vector<std::string>& vocabulary) {
  std::vector<std::string> missing;
  for (const auto& r : manifest.rows)
    if (!fs::exists(fs::path(root) / r.path)) missing.push_back(r.path);
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
    fail(ErrorCategory::dataset, "missing audio files: " + list);
  }
  const auto& vocab = vocabulary.empty() ? manifest.vocabulary : vocabulary;
  training::Dataset data;
  for (const auto& r : manifest.rows) {
    auto it = std::find(vocab.begin(), vocab.end(), r.label);
    require(it != vocab.end(), ErrorCategory::label, "unknown label '" + r.label + "' for " + r.path);
    auto clip = resample_to_16k(load_wav((fs::path(root) / r.path).string()));
    data.push_back({std::move(clip.samples), static_cast<std::size_t>(it - vocab.begin()), r.path});
  }
  return data;
}

const std::vector<std::string>& emodb_labels() {
  static const std::vector<std::string> labels{"anger",     "boredom", "disgust", "fear",
                                               "happiness", "sadness", "neutral"};
  return labels;
}

std::string emodb_label(const std::string& filename) {
  const std::string stem = fs::path(filename).filename().string();
  require(stem.size() >= 6, ErrorCategory::label, "EMO-DB name too short: " + stem);
  switch (stem[5]) {
    case 'W': return "anger";
    case 'L': return "boredom";
    case 'E': return "disgust";
    case 'A': return "fear";
    case 'F': return "happiness";
    case 'T': return "sadness";
    case 'N': return "neutral";
    default: fail(ErrorCategory::label, "unknown EMO-DB emotion code '" + std::string(1, stem[5]) + "' in " + stem);
  }
}

DatasetManifest emodb_manifest(const std::string& directory) {
  require(fs::is_directory(directory), ErrorCategory::dataset, "not a directory: " + directory);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(directory))
    if (e.is_regular_file() && boost::iequals(e.path().extension().string(), ".wav"))
      files.push_back(e.path().filename().string());
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorCategory::dataset, "no wav files in " + directory);
  DatasetManifest m;
  m.vocabulary = emodb_labels();
  for (const auto& f : files) m.rows.push_back({f, emodb_label(f)});
  return m;
}

}  // namespace sigwav::audio
