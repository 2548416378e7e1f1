#include "agest/model.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace agest {

namespace {
constexpr const char* kSchema = "agest.checkpoint/1";
}

AgeModel AgeModel::init(const ModelConfig& cfg, const DatasetConfig& data, Rng& rng) {
  cfg.validate();
  AgeModel m;
  m.cfg = cfg;
  m.image_mode = data.image_mode;
  m.patch_size = data.patch_size;
  m.age_min = data.age_min;
  m.age_max = data.age_max;
  if (m.image_mode) m.patch = PatchEmbed::init(data.patch_size, cfg.dim, rng);
  m.extractor = ExtractorParams::init(cfg.dim, cfg.diffusion, rng);
  m.head = ClassifierHead::init(data.age_min, data.age_max, cfg.dim, rng);
  m.margins = GroupMarginParams::init(cfg.scale, cfg.initial_margin);
  return m;
}

std::vector<std::pair<std::string, Parameter*>> AgeModel::parameters() {
  std::vector<std::pair<std::string, Parameter*>> out;
  if (image_mode) {
    out.emplace_back("patch.weight", &patch.weight);
    out.emplace_back("patch.bias", &patch.bias);
  }
  for (auto& p : extractor.parameters("extractor")) out.push_back(p);
  for (auto& p : head.parameters("head")) out.push_back(p);
  for (auto& p : margins.parameters("margins")) out.push_back(p);
  return out;
}

std::string checkpoint_to_string(const AgeModel& model) {
  // parameters() is non-const by design (optimizers take pointers); the
  // serializer only reads.
  AgeModel& m = const_cast<AgeModel&>(model);
  Json j;
  j["schema"] = kSchema;
  Json mc;
  to_json(mc, m.cfg);
  j["model"] = mc;
  j["image_mode"] = m.image_mode;
  j["patch_size"] = m.patch_size;
  j["age_min"] = m.age_min;
  j["age_max"] = m.age_max;
  Json tensors = Json::object();
  for (auto& [name, p] : m.parameters()) {
    tensors[name] = Json{{"rows", p->value.rows}, {"cols", p->value.cols}, {"data", p->value.data}};
  }
  j["tensors"] = tensors;
  return j.dump(2) + "\n";
}

void save_checkpoint(const AgeModel& model, const std::string& path) {
  write_file_atomic(path, checkpoint_to_string(model));
}

AgeModel checkpoint_from_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("checkpoint parse error: ") + e.what());
  }
  if (!j.contains("schema") || j.at("schema").get<std::string>() != kSchema) {
    throw std::runtime_error("checkpoint: unsupported schema");
  }
  ModelConfig cfg;
  from_json(j.at("model"), cfg);
  DatasetConfig data;  // only the fields AgeModel::init reads matter here
  data.image_mode = j.at("image_mode").get<bool>();
  data.patch_size = j.at("patch_size").get<std::size_t>();
  data.age_min = j.at("age_min").get<int>();
  data.age_max = j.at("age_max").get<int>();
  data.dim = cfg.dim;
  Rng rng(0);  // every tensor is overwritten below
  AgeModel m = AgeModel::init(cfg, data, rng);

  const Json& tensors = j.at("tensors");
  auto params = m.parameters();
  if (tensors.size() != params.size()) {
    throw std::runtime_error("checkpoint: tensor count mismatch");
  }
  for (auto& [name, p] : params) {
    if (!tensors.contains(name)) throw std::runtime_error("checkpoint: missing tensor " + name);
    const Json& t = tensors.at(name);
    const auto rows = t.at("rows").get<std::size_t>();
    const auto cols = t.at("cols").get<std::size_t>();
    if (rows != p->value.rows || cols != p->value.cols) {
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    }
    std::vector<double> data = t.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) {
      throw std::runtime_error("checkpoint: data length mismatch for " + name);
    }
    p->value.data = std::move(data);
    p->value.ensure_finite("checkpoint tensor " + name);
  }
  return m;
}

AgeModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace agest
