#include "sigwav/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sigwav/error.hpp"

namespace sigwav {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

}  // namespace

void save_checkpoint(const std::string& path, Model& model, const RunConfig& cfg,
                     const std::vector<std::string>& labels) {
  nlohmann::ordered_json header;
  header["format_version"] = kCheckpointVersion;
  header["labels"] = labels;
  nlohmann::ordered_json config;
  for (const auto& [section, body] : to_ptree(cfg))
    for (const auto& [key, value] : body) config[section][key] = value.data();
  header["config"] = config;
  header["parameters"] = nlohmann::ordered_json::array();
  auto params = model.parameters();
  for (auto* p : params) header["parameters"].push_back({{"name", p->name}, {"shape", p->value.shape}});

  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary);
  require(os.good(), ErrorCategory::dataset, "cannot write checkpoint " + path);
  write_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (auto* p : params)
    os.write(reinterpret_cast<const char*>(p->value.data.data()),
             static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
  require(os.good(), ErrorCategory::dataset, "failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), ErrorCategory::dataset, "cannot open checkpoint " + path);
  std::uint64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), 8);
  require(is.good() && n < (1ULL << 31), ErrorCategory::format, path + ": bad header length");
  std::string text(n, '\0');
  is.read(text.data(), static_cast<std::streamsize>(n));
  require(is.good(), ErrorCategory::format, path + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::format, path + ": header is not JSON: " + e.what());
  }
  require(header.value("format_version", 0) == kCheckpointVersion, ErrorCategory::format,
          path + ": unsupported checkpoint version");

  boost::property_tree::ptree tree;
  for (const auto& [section, body] : header.at("config").items())
    for (const auto& [key, value] : body.items()) tree.put(section + "." + key, value.get<std::string>());

  Checkpoint ck;
  ck.config = from_ptree(tree);
  ck.labels = header.at("labels").get<std::vector<std::string>>();
  ck.model = std::make_unique<Model>(ck.config.model, ck.config.train.seed);
  auto params = ck.model->parameters();
  const auto& listed = header.at("parameters");
  require(listed.size() == params.size(), ErrorCategory::format,
          path + ": parameter count " + std::to_string(listed.size()) + " does not match the model's " +
              std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = listed[i].at("name").get<std::string>();
    const auto shape = listed[i].at("shape").get<Shape>();
    require(name == params[i]->name && shape == params[i]->value.shape, ErrorCategory::format,
            path + ": parameter " + name + " " + to_string(shape) + " does not match " +
                params[i]->name + " " + to_string(params[i]->value.shape));
    is.read(reinterpret_cast<char*>(params[i]->value.data.data()),
            static_cast<std::streamsize>(params[i]->value.data.size() * sizeof(double)));
    require(is.good(), ErrorCategory::format, path + ": truncated data for " + name);
  }
  return ck;
}

}  // namespace sigwav
