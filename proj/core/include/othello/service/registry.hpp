#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "othello/lm/model.hpp"

namespace othello::service {

// Read-only checkpoints shared by every session and job. A model's id is the
// file stem of its checkpoint.
class ModelRegistry {
 public:
  ModelRegistry() = default;

  // Adds every *.ckpt in dir. Throws Io when dir is missing and
  // CorruptCheckpoint for an unreadable file.
  void load_directory(const std::filesystem::path& dir);

  void add(const std::string& id, lm::Model<float> model);

  // Throws UnknownModel.
  std::shared_ptr<const lm::Model<float>> get(const std::string& id) const;
  bool contains(const std::string& id) const;
  std::vector<std::string> ids() const;

  nlohmann::ordered_json to_json() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const lm::Model<float>>> models_;
};

}  // namespace othello::service
