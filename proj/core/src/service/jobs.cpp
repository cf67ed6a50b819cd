#include "othello/service/jobs.hpp"

#include <condition_variable>

#include "othello/json_io.hpp"
#include "othello/lm/sampling.hpp"
#include "othello/rng.hpp"

namespace othello::service {

struct JobManager::Job {
  mutable std::mutex mutex;
  std::condition_variable_any changed;
  JobView view;
};

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::kQueued: return "queued";
    case JobStatus::kRunning: return "running";
    case JobStatus::kDone: return "done";
    case JobStatus::kFailed: return "failed";
    case JobStatus::kCancelled: return "cancelled";
  }
  return "unknown";
}

JobManager::JobManager(const ModelRegistry& models,
                       std::optional<std::filesystem::path> artifact_root)
    : models_(models), artifact_root_(std::move(artifact_root)) {}

JobManager::~JobManager() {
  for (auto& w : workers_) w.request_stop();
  workers_.clear();
}

std::string JobManager::submit(const GenerateParams& params) {
  const auto model = models_.get(params.model_id);
  if (params.n < 1) throw Error(ErrorCode::kInvalidConfig, "n must be >= 1");
  lm::SampleConfig sc;
  sc.temperature = params.temperature;
  sc.top_k = params.top_k;
  sc.seed = params.seed;
  sc.validate(model->config().context);

  auto job = std::make_shared<Job>();
  std::lock_guard lock(mutex_);
  job->view.id = "job-" + std::to_string(next_id_++);
  job->view.params = params;
  jobs_[job->view.id] = job;
  workers_.emplace_back([this, job](std::stop_token stop) { run(job, stop); });
  return job->view.id;
}

void JobManager::run(const std::shared_ptr<Job>& job, std::stop_token stop) {
  GenerateParams params;
  {
    std::lock_guard lock(job->mutex);
    job->view.status = JobStatus::kRunning;
    params = job->view.params;
  }
  job->changed.notify_all();
  auto finish = [&](JobStatus status, auto&& update) {
    {
      std::lock_guard lock(job->mutex);
      job->view.status = status;
      update(job->view);
    }
    job->changed.notify_all();
  };
  try {
    const auto model = models_.get(params.model_id);
    lm::SampleConfig sc;
    sc.temperature = params.temperature;
    sc.top_k = params.top_k;
    sc.seed = params.seed;
    std::vector<std::string> transcripts;
    transcripts.reserve(static_cast<std::size_t>(params.n));
    for (int i = 0; i < params.n; ++i) {
      if (stop.stop_requested()) {
        finish(JobStatus::kCancelled, [](JobView&) {});
        return;
      }
      Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(i)));
      transcripts.push_back(lm::generate_game(*model, sc, rng));
      std::lock_guard lock(job->mutex);
      job->view.completed = i + 1;
    }
    AggregateReport summary;
    std::optional<std::filesystem::path> dir;
    if (artifact_root_) {
      dir = *artifact_root_ / job->view.id;
      summary = write_evaluation(*dir, transcripts);
    } else {
      std::vector<LegalityReport> reports;
      for (const auto& t : transcripts) reports.push_back(validate_transcript(t));
      summary = completion_stats(reports);
    }
    finish(JobStatus::kDone, [&](JobView& v) {
      v.summary = summary;
      v.transcripts = std::move(transcripts);
      v.artifact_dir = dir;
    });
  } catch (const std::exception& e) {
    finish(JobStatus::kFailed, [&](JobView& v) { v.error = e.what(); });
  }
}

std::shared_ptr<JobManager::Job> JobManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) throw Error(ErrorCode::kUnknownJob, "no job '" + id + "'");
  return it->second;
}

JobView JobManager::view(const std::string& id) const {
  const auto job = find(id);
  std::lock_guard lock(job->mutex);
  return job->view;
}

JobView JobManager::wait(const std::string& id) const {
  const auto job = find(id);
  std::unique_lock lock(job->mutex);
  job->changed.wait(lock, [&] {
    return job->view.status != JobStatus::kQueued && job->view.status != JobStatus::kRunning;
  });
  return job->view;
}

nlohmann::ordered_json to_json(const GenerateParams& p) {
  return {{"n", p.n},
          {"temperature", p.temperature},
          {"top_k", p.top_k},
          {"seed", p.seed},
          {"model_id", p.model_id}};
}

nlohmann::ordered_json to_json(const JobView& j, bool include_transcripts) {
  nlohmann::ordered_json out;
  out["id"] = j.id;
  out["status"] = to_string(j.status);
  out["params"] = to_json(j.params);
  out["progress"] = {{"completed", j.completed}, {"total", j.params.n}};
  out["summary"] = j.summary ? othello::to_json(*j.summary) : nlohmann::ordered_json();
  out["error"] = j.error ? nlohmann::ordered_json(*j.error) : nlohmann::ordered_json();
  out["artifact_dir"] =
      j.artifact_dir ? nlohmann::ordered_json(j.artifact_dir->string()) : nlohmann::ordered_json();
  if (include_transcripts) out["transcripts"] = j.transcripts;
  return out;
}

}  // namespace othello::service
