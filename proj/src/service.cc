#include "afr/service.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "afr/a3c.h"
#include "afr/env.h"
#include "afr/errors.h"
#include "afr/features.h"

namespace afr {
namespace {

using Json = nlohmann::json;

int RoundHalfUp(double x) { return static_cast<int>(std::floor(x + 0.5)); }

Json ErrorJson(const std::string& message) { return Json{{"error", message}}; }

HttpReply Reply(int status, const Json& body) {
  return {status, body.dump()};
}

// Exceptions from request handling mapped onto HTTP status codes.
template <typename Fn>
HttpReply Guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const BadRequest& e) {
    return Reply(400, ErrorJson(e.what()));
  } catch (const ParseError& e) {
    return Reply(400, ErrorJson(e.what()));
  } catch (const ValidationError& e) {
    return Reply(400, ErrorJson(e.what()));
  } catch (const CheckpointMissing& e) {
    return Reply(404, ErrorJson(e.what()));
  } catch (const IoError& e) {
    return Reply(404, ErrorJson(e.what()));
  } catch (const std::exception& e) {
    return Reply(500, ErrorJson(std::string("internal error: ") + e.what()));
  }
}

double PercentOf(double part, double whole) { return 100.0 * part / whole; }

}  // namespace

int TransformAction(int action, int base_count, int target_count) {
  if (target_count < 1) throw InvalidRange("target range needs at least 1 level");
  if (base_count < 1) throw InvalidRange("base range needs at least 1 level");
  if (action < 1 || action > base_count)
    throw InvalidRange("action " + std::to_string(action) + " outside [1, " +
                       std::to_string(base_count) + "]");
  if (target_count == base_count) return action;
  const double scaled =
      static_cast<double>(target_count) * action / static_cast<double>(base_count);
  return std::clamp(RoundHalfUp(scaled), 1, target_count);
}

DecisionRequest DecisionRequestFromJson(std::string_view body) {
  Json j;
  try {
    j = Json::parse(body.begin(), body.end());
  } catch (const Json::parse_error& e) {
    throw BadRequest(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw BadRequest("request body must be a JSON object");
  DecisionRequest r;
  try {
    r.frame_diffs = j.at("frame_diffs").get<std::vector<double>>();
    r.sizes_by_level = j.at("sizes_by_level").get<std::vector<std::int64_t>>();
    if (j.contains("neighbor_mean_diffs") && !j["neighbor_mean_diffs"].is_null()) {
      const auto n = j["neighbor_mean_diffs"].get<std::vector<double>>();
      if (n.size() != 2)
        throw BadRequest("neighbor_mean_diffs must hold exactly 2 values");
      r.neighbor_mean_diffs = std::array<double, 2>{n[0], n[1]};
    }
    r.original_fps = j.at("original_fps").get<int>();
    r.last_level = j.at("last_level").get<int>();
    r.qoe_profile_name = j.value("qoe_profile_name", std::string("qoe_q"));
    if (j.contains("target_levels") && !j["target_levels"].is_null())
      r.target_levels = j["target_levels"].get<int>();
  } catch (const Json::exception& e) {
    throw BadRequest(std::string("bad request field: ") + e.what());
  }
  return r;
}

std::string DecisionRequestToJson(const DecisionRequest& r) {
  Json j;
  j["frame_diffs"] = r.frame_diffs;
  j["sizes_by_level"] = r.sizes_by_level;
  if (r.neighbor_mean_diffs)
    j["neighbor_mean_diffs"] = std::vector<double>(r.neighbor_mean_diffs->begin(),
                                                   r.neighbor_mean_diffs->end());
  j["original_fps"] = r.original_fps;
  j["last_level"] = r.last_level;
  j["qoe_profile_name"] = r.qoe_profile_name;
  if (r.target_levels) j["target_levels"] = *r.target_levels;
  return j.dump();
}

std::string DecisionToJson(const Decision& d) {
  Json j;
  j["level"] = d.level;
  j["base_level"] = d.base_level;
  j["fps_value"] = d.fps_value;
  j["distribution"] = d.distribution;
  return j.dump();
}

DecisionRequest RequestForChunk(const VideoTrace& trace, int chunk_index,
                                int last_level, std::string profile_name) {
  if (chunk_index < 0 || chunk_index >= trace.chunk_count())
    throw IndexOutOfRange("chunk index out of range");
  const ChunkRecord& c = trace.chunks[chunk_index];
  DecisionRequest r;
  r.frame_diffs = c.frame_diffs;
  r.sizes_by_level = c.sizes_by_level;
  const double own = c.MeanDiff();
  r.neighbor_mean_diffs = std::array<double, 2>{
      chunk_index > 0 ? trace.chunks[chunk_index - 1].MeanDiff() : own,
      chunk_index + 1 < trace.chunk_count()
          ? trace.chunks[chunk_index + 1].MeanDiff()
          : own};
  r.original_fps = trace.original_fps;
  r.last_level = last_level;
  r.qoe_profile_name = std::move(profile_name);
  return r;
}

Decision Decide(const CheckpointBundle& checkpoint,
                const DecisionRequest& request) {
  const int base_count = checkpoint.actor.spec().m_actions;
  if (static_cast<int>(request.sizes_by_level.size()) != base_count)
    throw BadRequest("sizes_by_level must have " + std::to_string(base_count) +
                     " entries");
  if (request.original_fps <= 0) throw BadRequest("original_fps must be positive");
  const int target = request.target_levels.value_or(base_count);
  if (target < 1) throw BadRequest("target_levels must be at least 1");

  StateObservation obs;
  try {
    double own = 0.0;
    if (!request.frame_diffs.empty())
      own = std::accumulate(request.frame_diffs.begin(),
                            request.frame_diffs.end(), 0.0) /
            static_cast<double>(request.frame_diffs.size());
    const std::array<double, 2> neighbors =
        request.neighbor_mean_diffs.value_or(std::array<double, 2>{own, own});
    obs = BuildObservation(request.frame_diffs, neighbors,
                           request.sizes_by_level, request.last_level,
                           request.original_fps, checkpoint.norm);
  } catch (const Error& e) {
    throw BadRequest(e.what());
  }

  Decision d;
  d.distribution = ForwardActor(checkpoint.actor, obs).probs;
  d.base_level = GreedyAction(d.distribution);
  d.level = TransformAction(d.base_level, base_count, target);
  d.fps_value = static_cast<double>(request.original_fps) * d.level / target;
  return d;
}

std::vector<int> ScheduleVideo(const CheckpointBundle& checkpoint,
                               const VideoTrace& trace) {
  if (trace.level_count() != checkpoint.actor.spec().m_actions)
    throw BadRequest("trace level count does not match the checkpoint");
  StreamingEnv env;
  env.Reset(trace, QoEProfile::QualityFirst(), checkpoint.norm);
  std::vector<int> levels;
  levels.reserve(trace.chunks.size());
  while (!env.done()) {
    const int level =
        GreedyAction(ForwardActor(checkpoint.actor, env.observation()).probs);
    levels.push_back(level);
    env.Step(level);
  }
  return levels;
}

std::vector<int> EvsoBaseline(const VideoTrace& trace,
                              std::span<const double> thresholds) {
  const int m = trace.level_count();
  if (static_cast<int>(thresholds.size()) != m - 1)
    throw BadThresholds("need " + std::to_string(m - 1) + " thresholds");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!std::isfinite(thresholds[i]))
      throw BadThresholds("thresholds must be finite");
    if (i > 0 && thresholds[i] < thresholds[i - 1])
      throw BadThresholds("thresholds must be ascending");
  }
  std::vector<int> levels;
  levels.reserve(trace.chunks.size());
  for (const ChunkRecord& c : trace.chunks) {
    const double sum = c.DiffSum();
    levels.push_back(1 + static_cast<int>(std::count_if(
                             thresholds.begin(), thresholds.end(),
                             [sum](double t) { return t < sum; })));
  }
  return levels;
}

std::vector<double> DefaultEvsoThresholds(std::span<const VideoTrace> dataset,
                                          int level_count) {
  std::vector<double> sums;
  for (const VideoTrace& t : dataset)
    for (const ChunkRecord& c : t.chunks) sums.push_back(c.DiffSum());
  if (sums.empty()) throw EmptyDataset("EVSO calibration needs chunks");
  std::sort(sums.begin(), sums.end());
  std::vector<double> cuts;
  for (int i = 1; i < level_count; ++i) {
    const double pos =
        static_cast<double>(i) / level_count * static_cast<double>(sums.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sums.size() - 1);
    cuts.push_back(sums[lo] + (pos - static_cast<double>(lo)) * (sums[hi] - sums[lo]));
  }
  return cuts;
}

std::vector<int> NaiveBaseline(const VideoTrace& trace, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw InvalidRange("naive fraction must lie in (0, 1]");
  const int m = trace.level_count();
  // Snap away representation error (0.6 * 5 = 3.0000000000000004).
  const double scaled = std::round(fraction * m * 1e9) / 1e9;
  const int level = std::clamp(RoundHalfUp(scaled), 1, m);
  return std::vector<int>(trace.chunks.size(), level);
}

const ReportRow* EvaluationReport::Find(std::string_view category,
                                        std::string_view policy) const {
  for (const ReportRow& r : rows)
    if (r.category == category && r.policy == policy) return &r;
  return nullptr;
}

EvaluationReport EvaluatePolicies(std::span<const VideoTrace> dataset,
                                  const QoEProfile& profile,
                                  std::span<const PolicyColumn> policies) {
  if (dataset.empty()) throw EmptyDataset("evaluation needs at least one trace");
  EvaluationReport report;
  for (const PolicyColumn& policy : policies) {
    std::map<std::string, std::vector<const TraceScore*>> by_category;
    const std::size_t first = report.per_trace.size();
    for (const VideoTrace& trace : dataset) {
      const FrameRateLadder ladder = FrameRateLadder::ForTrace(trace);
      TraceScore score;
      score.video_id = trace.video_id;
      score.category = trace.category_tag;
      score.policy = policy.name;
      score.levels = policy.schedule(trace);
      score.reward = EpisodeReward(trace, score.levels, profile);
      for (std::size_t k = 0; k < score.levels.size(); ++k) {
        score.fps_pct += PercentOf(ladder.Fps(score.levels[k]), ladder.original_fps());
        score.quality_pct += trace.chunks[k].quality_by_level[score.levels[k] - 1];
      }
      score.fps_pct /= static_cast<double>(score.levels.size());
      score.quality_pct /= static_cast<double>(score.levels.size());
      report.per_trace.push_back(std::move(score));
    }
    std::vector<const TraceScore*> all;
    for (std::size_t i = first; i < report.per_trace.size(); ++i) {
      by_category[report.per_trace[i].category].push_back(&report.per_trace[i]);
      all.push_back(&report.per_trace[i]);
    }
    auto aggregate = [&](const std::string& category,
                         const std::vector<const TraceScore*>& scores) {
      ReportRow row{category, policy.name, 0, 0, 0};
      for (const TraceScore* s : scores) {
        row.fps_pct += s->fps_pct;
        row.quality_pct += s->quality_pct;
        row.mean_reward += s->reward;
      }
      const double n = static_cast<double>(scores.size());
      row.fps_pct /= n;
      row.quality_pct /= n;
      row.mean_reward /= n;
      report.rows.push_back(row);
    };
    for (const auto& [category, scores] : by_category) aggregate(category, scores);
    aggregate("overall", all);
  }
  return report;
}

EvaluationReport Evaluate(const CheckpointBundle& checkpoint,
                          std::span<const VideoTrace> dataset,
                          const QoEProfile& profile,
                          std::optional<std::vector<double>> evso_thresholds) {
  if (dataset.empty()) throw EmptyDataset("evaluation needs at least one trace");
  const std::vector<double> cuts = evso_thresholds.value_or(
      DefaultEvsoThresholds(dataset, dataset.front().level_count()));
  const std::vector<PolicyColumn> columns = {
      {"model", [&](const VideoTrace& t) { return ScheduleVideo(checkpoint, t); }},
      {"oracle", [&](const VideoTrace& t) { return GreedyOracle(t, profile); }},
      {"evso", [&](const VideoTrace& t) { return EvsoBaseline(t, cuts); }},
      {"naive-60", [](const VideoTrace& t) { return NaiveBaseline(t, 0.6); }},
      {"naive-40", [](const VideoTrace& t) { return NaiveBaseline(t, 0.4); }},
  };
  return EvaluatePolicies(dataset, profile, columns);
}

std::string ReportCsv(const EvaluationReport& report) {
  std::ostringstream out;
  out << "category,policy,fps_pct,quality_pct,mean_reward\n";
  char line[256];
  for (const ReportRow& r : report.rows) {
    std::snprintf(line, sizeof(line), "%s,%s,%.4f,%.4f,%.6f\n",
                  r.category.c_str(), r.policy.c_str(), r.fps_pct,
                  r.quality_pct, r.mean_reward);
    out << line;
  }
  return out.str();
}

std::string ReportTable(const EvaluationReport& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %-10s %8s %10s %12s\n", "category",
                "policy", "FPS(%)", "quality(%)", "mean reward");
  out << line;
  for (const ReportRow& r : report.rows) {
    std::snprintf(line, sizeof(line), "%-10s %-10s %8.2f %10.2f %12.3f\n",
                  r.category.c_str(), r.policy.c_str(), r.fps_pct,
                  r.quality_pct, r.mean_reward);
    out << line;
  }
  return out.str();
}

DecisionService::DecisionService(std::vector<CheckpointBundle> checkpoints)
    : checkpoints_(std::make_shared<const CheckpointSet>(std::move(checkpoints))),
      server_(std::make_unique<httplib::Server>()) {
  InstallRoutes();
}

DecisionService::~DecisionService() { Stop(); }

void DecisionService::Reload(std::vector<CheckpointBundle> checkpoints) {
  auto next = std::make_shared<const CheckpointSet>(std::move(checkpoints));
  std::lock_guard lock(mutex_);
  checkpoints_ = std::move(next);
}

std::shared_ptr<const DecisionService::CheckpointSet> DecisionService::Current()
    const {
  std::lock_guard lock(mutex_);
  return checkpoints_;
}

namespace {

const CheckpointBundle& ForProfile(const std::vector<CheckpointBundle>& set,
                                   const std::string& name) {
  for (const CheckpointBundle& c : set)
    if (c.profile_name == name) return c;
  throw CheckpointMissing("no checkpoint loaded for profile '" + name + "'");
}

}  // namespace

HttpReply DecisionService::HandleDecide(std::string_view body) const {
  return Guarded([&] {
    const auto set = Current();
    const DecisionRequest request = DecisionRequestFromJson(body);
    const Decision d = Decide(ForProfile(*set, request.qoe_profile_name), request);
    return HttpReply{200, DecisionToJson(d)};
  });
}

HttpReply DecisionService::HandleSchedule(std::string_view body) const {
  return Guarded([&] {
    const auto set = Current();
    Json j;
    try {
      j = Json::parse(body.begin(), body.end());
    } catch (const Json::parse_error& e) {
      throw BadRequest(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw BadRequest("request body must be a JSON object");
    VideoTrace trace;
    if (j.contains("trace"))
      trace = TraceFromJson(j["trace"].dump());
    else if (j.contains("trace_path") && j["trace_path"].is_string())
      trace = LoadTrace(j["trace_path"].get<std::string>());
    else
      throw BadRequest("expected 'trace' or 'trace_path'");
    const std::string profile =
        j.value("qoe_profile_name", std::string("qoe_q"));
    const std::vector<int> levels = ScheduleVideo(ForProfile(*set, profile), trace);
    const FrameRateLadder ladder = FrameRateLadder::ForTrace(trace);
    std::vector<double> fps;
    for (int level : levels) fps.push_back(ladder.Fps(level));
    return Reply(200, Json{{"video_id", trace.video_id},
                           {"levels", levels},
                           {"fps", fps}});
  });
}

HttpReply DecisionService::HandleHealth() const {
  const auto set = Current();
  std::vector<std::string> profiles;
  for (const CheckpointBundle& c : *set) profiles.push_back(c.profile_name);
  return Reply(200, Json{{"status", "ok"},
                         {"checkpoint_version", kCheckpointVersion},
                         {"profiles", profiles}});
}

void DecisionService::InstallRoutes() {
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  };
  server_->Post("/v1/decide", [this, send](const httplib::Request& req,
                                           httplib::Response& res) {
    send(res, HandleDecide(req.body));
  });
  server_->Post("/v1/schedule", [this, send](const httplib::Request& req,
                                             httplib::Response& res) {
    send(res, HandleSchedule(req.body));
  });
  server_->Get("/v1/health", [this, send](const httplib::Request&,
                                          httplib::Response& res) {
    send(res, HandleHealth());
  });
  server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty())
      res.set_content(ErrorJson("not found").dump(), "application/json");
  });
}

void DecisionService::Listen(const std::string& host, int port) {
  if (!server_->bind_to_port(host, port))
    throw BindError("cannot bind " + host + ":" + std::to_string(port));
  ListenAfterBind();
}

int DecisionService::BindAny(const std::string& host) {
  const int port = server_->bind_to_any_port(host);
  if (port < 0) throw BindError("cannot bind " + host);
  return port;
}

void DecisionService::ListenAfterBind() { server_->listen_after_bind(); }

void DecisionService::Stop() {
  if (server_) server_->stop();
}

std::pair<std::string, int> ParseBindAddress(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0)
    throw BindError("bind address must look like host:port");
  const std::string port_text(address.substr(colon + 1));
  try {
    std::size_t used = 0;
    const int port = std::stoi(port_text, &used);
    if (used != port_text.size() || port < 0 || port > 65535)
      throw BindError("bad port '" + port_text + "'");
    return {std::string(address.substr(0, colon)), port};
  } catch (const std::logic_error&) {
    throw BindError("bad port '" + port_text + "'");
  }
}

}  // namespace afr
