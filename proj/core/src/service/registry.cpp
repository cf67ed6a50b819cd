#include "othello/service/registry.hpp"

#include <algorithm>

#include "othello/lm/checkpoint.hpp"

namespace othello::service {

void ModelRegistry::load_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "model directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ckpt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) add(f.stem().string(), lm::load_checkpoint(f));
}

void ModelRegistry::add(const std::string& id, lm::Model<float> model) {
  std::lock_guard lock(mutex_);
  models_[id] = std::make_shared<const lm::Model<float>>(std::move(model));
}

std::shared_ptr<const lm::Model<float>> ModelRegistry::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = models_.find(id);
  if (it == models_.end()) throw Error(ErrorCode::kUnknownModel, "no model named '" + id + "'");
  return it->second;
}

bool ModelRegistry::contains(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return models_.contains(id);
}

std::vector<std::string> ModelRegistry::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : models_) out.push_back(id);
  return out;
}

nlohmann::ordered_json ModelRegistry::to_json() const {
  std::lock_guard lock(mutex_);
  auto arr = nlohmann::ordered_json::array();
  for (const auto& [id, model] : models_) {
    const lm::ModelConfig& c = model->config();
    arr.push_back({{"id", id},
                   {"layers", c.layers},
                   {"heads", c.heads},
                   {"dim", c.dim},
                   {"context", c.context},
                   {"parameters", c.parameter_count()}});
  }
  return arr;
}

}  // namespace othello::service
