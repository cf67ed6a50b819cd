#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "othello/evaluation.hpp"
#include "othello/service/registry.hpp"

namespace othello::service {

struct GenerateParams {
  int n = 200;
  double temperature = 1.0;
  int top_k = 0;
  std::uint64_t seed = 0;
  std::string model_id;
};

enum class JobStatus { kQueued, kRunning, kDone, kFailed, kCancelled };
std::string_view to_string(JobStatus s);

struct JobView {
  std::string id;
  GenerateParams params;
  JobStatus status = JobStatus::kQueued;
  int completed = 0;
  std::optional<AggregateReport> summary;
  std::optional<std::string> error;
  // Present once the job is done.
  std::vector<std::string> transcripts;
  std::optional<std::filesystem::path> artifact_dir;
};

// Runs generate-and-evaluate jobs in the background, one worker thread per
// job. Outputs depend only on the parameters: game i is sampled from a stream
// derived from (seed, i). With an artifact root, each job writes
// ROOT/<id>/{transcripts.txt, reports.jsonl, summary.json}.
class JobManager {
 public:
  explicit JobManager(const ModelRegistry& models,
                      std::optional<std::filesystem::path> artifact_root = std::nullopt);
  ~JobManager();

  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;

  // Throws UnknownModel and InvalidConfig.
  std::string submit(const GenerateParams& params);
  // Throws UnknownJob.
  JobView view(const std::string& id) const;
  // Blocks until the job leaves the queued/running states.
  JobView wait(const std::string& id) const;

 private:
  struct Job;
  void run(const std::shared_ptr<Job>& job, std::stop_token stop);
  std::shared_ptr<Job> find(const std::string& id) const;

  const ModelRegistry& models_;
  std::optional<std::filesystem::path> artifact_root_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::vector<std::jthread> workers_;
  std::uint64_t next_id_ = 1;
};

nlohmann::ordered_json to_json(const GenerateParams& p);
// Transcripts are included only when asked for; they can be large.
nlohmann::ordered_json to_json(const JobView& j, bool include_transcripts = false);

}  // namespace othello::service
