#pragma once

// Evaluation protocol: dataset pairs x methods x ablations x progress thresholds, averaged
// over trials, reported as JSON and as plain-text tables.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "trllm/embedding.hpp"
#include "trllm/errors.hpp"
#include "trllm/fusion.hpp"
#include "trllm/goal_predictor.hpp"
#include "trllm/llm_bridge.hpp"
#include "trllm/scene.hpp"
#include "trllm/trajectory.hpp"

namespace trllm {

struct Scenario {
  std::string id;
  std::string day_time;
  std::string persona;
  std::string location;  // free-text description of where the person is
  WorldPoint start_location;
  std::string gt_target_object;
  std::string gt_action;
  std::vector<std::string> action_history;
  std::vector<std::string> conversation;
  std::string source = "synthetic";

  void validate() const {
    if (id.empty()) throw ValidationError("scenario: empty id");
    if (gt_target_object.empty()) throw ValidationError("scenario '" + id + "': empty gt_target_object");
    if (gt_action.empty()) throw ValidationError("scenario '" + id + "': empty gt_action");
  }
};

inline Scenario scenario_from_json(const nlohmann::json& j) {
  const std::string where = "scenario";
  Scenario s;
  s.id = detail::get_field<std::string>(j, "id", where);
  s.day_time = detail::get_field<std::string>(j, "day_time", where);
  s.persona = detail::get_field<std::string>(j, "persona", where);
  if (j.contains("location")) s.location = detail::get_field<std::string>(j, "location", where);
  const auto start = detail::get_field<std::vector<double>>(j, "start_location", where);
  if (start.size() != 2) throw ParseError(where + ": field 'start_location' must be [x, y]");
  s.start_location = {start[0], start[1]};
  s.gt_target_object = detail::get_field<std::string>(j, "gt_target_object", where);
  s.gt_action = detail::get_field<std::string>(j, "gt_action", where);
  s.action_history = detail::get_field<std::vector<std::string>>(j, "action_history", where);
  s.conversation = detail::get_field<std::vector<std::string>>(j, "conversation", where);
  if (j.contains("source")) s.source = detail::get_field<std::string>(j, "source", where);
  s.validate();
  return s;
}

inline nlohmann::ordered_json scenario_to_json(const Scenario& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["day_time"] = s.day_time;
  j["persona"] = s.persona;
  j["location"] = s.location;
  j["start_location"] = {s.start_location.x, s.start_location.y};
  j["gt_target_object"] = s.gt_target_object;
  j["gt_action"] = s.gt_action;
  j["action_history"] = s.action_history;
  j["conversation"] = s.conversation;
  j["source"] = s.source;
  return j;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(detail::read_json_file(path));
}

inline void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  detail::write_text_file(path, scenario_to_json(s).dump(2) + "\n");
}

inline SceneContext make_context(const Scenario& s, const Scene& scene) {
  return {s.day_time, s.persona, s.location, s.action_history, s.conversation, scene.labels()};
}

struct EvalPair {
  Scenario scenario;
  std::shared_ptr<const Scene> scene;
  Trajectory trajectory;
};

// Manifest: JSON array of {"scenario", "scene", "trajectory"} paths relative to the manifest.
inline std::vector<EvalPair> load_manifest(const std::filesystem::path& path) {
  const auto j = detail::read_json_file(path);
  if (!j.is_array()) throw ParseError("manifest: expected a JSON array");
  const auto base = path.parent_path();
  std::map<std::string, std::shared_ptr<const Scene>> scenes;
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = "manifest[" + std::to_string(i) + "]";
    const auto scene_path = (base / detail::get_field<std::string>(j[i], "scene", where)).lexically_normal();
    auto& scene = scenes[scene_path.string()];
    if (!scene) scene = std::make_shared<const Scene>(load_scene(scene_path));
    EvalPair pair{load_scenario(base / detail::get_field<std::string>(j[i], "scenario", where)), scene,
                  load_trajectory(base / detail::get_field<std::string>(j[i], "trajectory", where))};
    if (!scene->find(pair.scenario.gt_target_object)) {
      throw ValidationError(where + ": target '" + pair.scenario.gt_target_object + "' is not in scene '" +
                            scene->name + "'");
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

// ---------------------------------------------------------------------------

// Shortest prefix with progress d; the last sample is interpolated so the prefix progress is
// d. When the whole trajectory is shorter than d it is returned unchanged and
// telemetry->truncation_saturated is incremented.
inline Trajectory truncate_at_progress(const Trajectory& traj, double d, Telemetry* telemetry = nullptr) {
  if (!(d >= 0.0)) throw ContractError("truncate: progress must be >= 0");
  const auto& s = traj.samples();
  if (d == 0.0) return Trajectory({s[0], {s[1].t, s[0].x, s[0].y}});
  double covered = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double seg = segment_length(s[i - 1], s[i]);
    if (covered + seg >= d) {
      std::vector<TrajectorySample> out(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(i));
      const double u = (d - covered) / seg;
      if (u >= 1.0) {
        out.push_back(s[i]);
      } else {
        TrajectorySample cut{s[i - 1].t + u * (s[i].t - s[i - 1].t), s[i - 1].x + u * (s[i].x - s[i - 1].x),
                             s[i - 1].y + u * (s[i].y - s[i - 1].y)};
        if (!(cut.t > s[i - 1].t)) cut.t = std::nextafter(s[i - 1].t, s[i].t);
        out.push_back(cut);
      }
      return Trajectory(std::move(out));
    }
    covered += seg;
  }
  if (telemetry) ++telemetry->truncation_saturated;
  return traj;
}

inline int top5_hit(const ObjectProbabilityMap& p, const std::string& gt, std::size_t k = 5) {
  if (!p.contains(gt)) throw ContractError("top-k hit: ground truth '" + gt + "' is not a candidate");
  const auto top = top_k(p, k);
  return std::find(top.begin(), top.end(), gt) != top.end() ? 1 : 0;
}

// ---------------------------------------------------------------------------

enum class Method { llm, trajectory, fused };

inline constexpr std::array<Method, 3> kAllMethods{Method::llm, Method::trajectory, Method::fused};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::llm: return "llm";
    case Method::trajectory: return "trajectory";
    case Method::fused: return "fused";
  }
  return "llm";
}

inline Method parse_method(std::string_view s) {
  for (auto m : kAllMethods) {
    if (to_string(m) == s) return m;
  }
  throw ContractError("unknown method '" + std::string(s) + "'");
}

struct EvalConfig {
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  std::vector<AblationMode> ablations{kAllAblations.begin(), kAllAblations.end()};
  std::vector<double> d_thresholds_m{1.0, 2.0, 3.0};
  int trials = 3;
  std::size_t k = 5;
  GoalPredictorKind predictor = GeometricPredictor{};
  std::shared_ptr<const ChatBackend> llm;
  std::shared_ptr<const EmbeddingProvider> embedder = std::make_shared<HashingEmbedder>();
  std::string llm_description = "unspecified";
  std::string embedder_description = "hashing-512";
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const {
    if (trials < 1) throw ContractError("eval config: trials must be >= 1");
    if (k < 1) throw ContractError("eval config: k must be >= 1");
    if (jobs < 1) throw ContractError("eval config: jobs must be >= 1");
    if (methods.empty() || ablations.empty() || d_thresholds_m.empty()) {
      throw ContractError("eval config: methods, ablations and thresholds must be non-empty");
    }
    for (std::size_t i = 0; i < d_thresholds_m.size(); ++i) {
      if (!(d_thresholds_m[i] > 0.0)) throw ContractError("eval config: thresholds must be positive");
      if (i > 0 && !(d_thresholds_m[i] > d_thresholds_m[i - 1])) {
        throw ContractError("eval config: thresholds must be ascending");
      }
    }
    if (!llm) throw ContractError("eval config: no language-model backend");
    if (!embedder) throw ContractError("eval config: no embedding provider");
  }
};

struct ReportCell {
  Method method = Method::llm;
  AblationMode ablation = AblationMode::all;
  double d_min_m = 0.0;
  double top5_accuracy = std::numeric_limits<double>::quiet_NaN();
  double action_cosine = std::numeric_limits<double>::quiet_NaN();
  double judge_accuracy = std::numeric_limits<double>::quiet_NaN();
  long pair_count = 0;
  long invalid = 0;  // pair-trials lost to endpoint failures
  Telemetry flags;
};

struct Report {
  std::uint64_t seed = 0;
  int trials = 0;
  std::size_t k = 5;
  std::string predictor;
  std::string llm;
  std::string embedder;
  std::vector<ReportCell> cells;
  std::vector<std::string> errors;  // first message per failing pair-trial

  const ReportCell* find(Method m, AblationMode a, double d) const {
    for (const auto& c : cells) {
      if (c.method == m && c.ablation == a && c.d_min_m == d) return &c;
    }
    return nullptr;
  }
};

namespace detail {

struct CellSample {
  bool valid = false;
  int hit = 0;
  double cosine = 0.0;
  int judge = 0;
};

struct PairResult {
  // [trial][cell]
  std::vector<std::vector<CellSample>> samples;
  std::vector<Telemetry> flags;  // per cell, summed over trials
  std::vector<std::string> errors;
};

// Mean of per-trial means, computed as m0 + sum(m_t - m0) / T so identical trials reproduce m0
// exactly.
inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double shift = 0.0;
  for (double x : xs) shift += x - xs.front();
  return xs.front() + shift / static_cast<double>(xs.size());
}

}  // namespace detail

// Deterministic given deterministic backends. The trajectory channel never sees text, so its
// action is predicted from the minimal (wo_conv_hist) context in every column.
inline Report run_evaluation(const std::vector<EvalPair>& pairs, const EvalConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw ContractError("evaluation: no pairs");
  const std::size_t n_m = cfg.methods.size();
  const std::size_t n_a = cfg.ablations.size();
  const std::size_t n_d = cfg.d_thresholds_m.size();
  const std::size_t n_cells = n_m * n_a * n_d;
  auto cell_index = [&](std::size_t mi, std::size_t ai, std::size_t di) { return (mi * n_a + ai) * n_d + di; };
  const bool need_llm = std::any_of(cfg.methods.begin(), cfg.methods.end(), [](Method m) { return m != Method::trajectory; });
  const bool need_traj = std::any_of(cfg.methods.begin(), cfg.methods.end(), [](Method m) { return m != Method::llm; });

  auto evaluate_pair = [&](const EvalPair& pair) {
    detail::PairResult r;
    r.samples.assign(static_cast<std::size_t>(cfg.trials), std::vector<detail::CellSample>(n_cells));
    r.flags.assign(n_cells, Telemetry{});
    const auto& scene = *pair.scene;
    const auto ctx = make_context(pair.scenario, scene);
    const auto gt_vec = cfg.embedder->embed(pair.scenario.gt_action);

    // The physical channel is deterministic; compute it once per threshold.
    std::vector<std::optional<ObjectProbabilityMap>> physical(n_d);
    std::vector<Telemetry> physical_flags(n_d);
    if (need_traj) {
      for (std::size_t di = 0; di < n_d; ++di) {
        const auto observed = truncate_at_progress(pair.trajectory, cfg.d_thresholds_m[di], &physical_flags[di]);
        physical[di] = object_probabilities(predict_heatmap(cfg.predictor, scene, observed), scene, &physical_flags[di]);
      }
    }

    for (int trial = 0; trial < cfg.trials; ++trial) {
      std::map<std::pair<int, std::string>, std::string> action_cache;
      struct Score {
        double cosine = 0.0;
        int verdict = 0;
        Telemetry flags;
      };
      std::map<std::string, Score> score_cache;
      for (std::size_t ai = 0; ai < n_a; ++ai) {
        const auto mode = cfg.ablations[ai];
        Telemetry llm_flags;
        std::optional<ObjectProbabilityMap> semantic;
        std::string failure;
        if (need_llm) {
          try {
            semantic = predict_target_ranks(*cfg.llm, ctx, mode, &llm_flags);
          } catch (const EndpointError& e) {
            failure = e.what();
          }
        }
        for (std::size_t mi = 0; mi < n_m; ++mi) {
          const auto method = cfg.methods[mi];
          for (std::size_t di = 0; di < n_d; ++di) {
            const auto ci = cell_index(mi, ai, di);
            Telemetry flags;
            if (method != Method::llm) flags += physical_flags[di];
            if (method != Method::trajectory) flags += llm_flags;
            if (method != Method::trajectory && !semantic) {
              r.flags[ci] += flags;
              if (r.errors.empty()) r.errors.push_back(pair.scenario.id + ": " + failure);
              continue;
            }
            ObjectProbabilityMap probs = method == Method::llm        ? *semantic
                                         : method == Method::trajectory ? *physical[di]
                                                                        : fuse(*semantic, *physical[di], &flags);
            auto& sample = r.samples[static_cast<std::size_t>(trial)][ci];
            sample.hit = top5_hit(probs, pair.scenario.gt_target_object, cfg.k);
            const auto target = top_k(probs, 1).front();
            const auto action_mode = method == Method::trajectory ? AblationMode::wo_conv_hist : mode;
            try {
              auto key = std::make_pair(static_cast<int>(action_mode), target);
              auto it = action_cache.find(key);
              if (it == action_cache.end()) {
                it = action_cache.emplace(key, predict_action(*cfg.llm, ctx, action_mode, target)).first;
              }
              const auto& predicted = it->second;
              auto sc = score_cache.find(predicted);
              if (sc == score_cache.end()) {
                const double cosine = predicted.empty() ? 0.0 : cosine_similarity(cfg.embedder->embed(predicted), gt_vec);
                Telemetry judge_flags;
                const int verdict = predicted.empty() ? 0 : judge_action(*cfg.llm, predicted, pair.scenario.gt_action, &judge_flags);
                sc = score_cache.emplace(predicted, Score{cosine, verdict, judge_flags}).first;
              }
              flags += sc->second.flags;
              sample.cosine = sc->second.cosine;
              sample.judge = sc->second.verdict;
              sample.valid = true;
            } catch (const EndpointError& e) {
              if (r.errors.empty()) r.errors.push_back(pair.scenario.id + ": " + e.what());
            }
            r.flags[ci] += flags;
          }
        }
      }
    }
    return r;
  };

  std::vector<detail::PairResult> results(pairs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < pairs.size(); i = next++) {
      try {
        results[i] = evaluate_pair(pairs[i]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const int threads = std::min<int>(cfg.jobs, static_cast<int>(pairs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  Report report;
  report.seed = cfg.seed;
  report.trials = cfg.trials;
  report.k = cfg.k;
  report.predictor = predictor_name(cfg.predictor);
  report.llm = cfg.llm_description;
  report.embedder = cfg.embedder_description;
  for (const auto& r : results) {
    report.errors.insert(report.errors.end(), r.errors.begin(), r.errors.end());
  }
  for (std::size_t mi = 0; mi < n_m; ++mi) {
    for (std::size_t ai = 0; ai < n_a; ++ai) {
      for (std::size_t di = 0; di < n_d; ++di) {
        const auto ci = cell_index(mi, ai, di);
        ReportCell cell;
        cell.method = cfg.methods[mi];
        cell.ablation = cfg.ablations[ai];
        cell.d_min_m = cfg.d_thresholds_m[di];
        cell.pair_count = static_cast<long>(pairs.size());
        std::vector<double> hit_means, cos_means, judge_means;
        for (int t = 0; t < cfg.trials; ++t) {
          long valid = 0, hits = 0, judged = 0;
          double cos_sum = 0.0;
          for (const auto& r : results) {
            const auto& s = r.samples[static_cast<std::size_t>(t)][ci];
            if (!s.valid) {
              ++cell.invalid;
              continue;
            }
            ++valid;
            hits += s.hit;
            judged += s.judge;
            cos_sum += s.cosine;
          }
          if (valid == 0) continue;
          hit_means.push_back(static_cast<double>(hits) / static_cast<double>(valid));
          cos_means.push_back(cos_sum / static_cast<double>(valid));
          judge_means.push_back(static_cast<double>(judged) / static_cast<double>(valid));
        }
        for (const auto& r : results) cell.flags += r.flags[ci];
        cell.top5_accuracy = detail::mean_of(hit_means);
        cell.action_cosine = detail::mean_of(cos_means);
        cell.judge_accuracy = detail::mean_of(judge_means);
        report.cells.push_back(cell);
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Report output

inline nlohmann::ordered_json report_to_json(const Report& report) {
  auto num = [](double v) -> nlohmann::ordered_json {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["format"] = "trllm-report/1";
  j["seed"] = report.seed;
  j["trials"] = report.trials;
  j["k"] = report.k;
  j["predictor"] = report.predictor;
  j["llm"] = report.llm;
  j["embedder"] = report.embedder;
  auto cells = nlohmann::ordered_json::array();
  for (const auto& c : report.cells) {
    nlohmann::ordered_json cj;
    cj["method"] = to_string(c.method);
    cj["ablation"] = to_string(c.ablation);
    cj["d_min_m"] = c.d_min_m;
    cj["top5_accuracy"] = num(c.top5_accuracy);
    cj["action_cosine"] = num(c.action_cosine);
    cj["judge_accuracy"] = num(c.judge_accuracy);
    cj["pair_count"] = c.pair_count;
    cj["invalid"] = c.invalid;
    cj["flags"] = {{"rank_defaults", c.flags.rank_defaults},
                   {"judge_unparsable", c.flags.judge_unparsable},
                   {"zero_mass_fallbacks", c.flags.zero_mass_fallbacks},
                   {"fusion_fallbacks", c.flags.fusion_fallbacks},
                   {"truncation_saturated", c.flags.truncation_saturated}};
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  j["errors"] = report.errors;
  return j;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string pad_right(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

inline std::string pad_left(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

}  // namespace detail

// Rows are method x threshold, columns are ablation modes.
inline std::string report_to_text(const Report& report) {
  std::vector<Method> methods;
  std::vector<AblationMode> ablations;
  std::vector<double> ds;
  for (const auto& c : report.cells) {
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
    if (std::find(ablations.begin(), ablations.end(), c.ablation) == ablations.end()) ablations.push_back(c.ablation);
    if (std::find(ds.begin(), ds.end(), c.d_min_m) == ds.end()) ds.push_back(c.d_min_m);
  }
  std::ostringstream out;
  out << "predictor: " << report.predictor << "  llm: " << report.llm << "  embedder: " << report.embedder
      << "  trials: " << report.trials << "  seed: " << report.seed << "\n";
  auto table = [&](const std::string& title, auto value, int digits) {
    out << "\n" << title << "\n";
    out << detail::pad_right("method", 22);
    for (auto a : ablations) out << detail::pad_left(std::string(to_string(a)), 14);
    out << "\n";
    for (auto m : methods) {
      for (double d : ds) {
        std::string label = std::string(to_string(m)) + " (d>" + detail::fixed(d, d == std::floor(d) ? 0 : 2) + "m)";
        out << detail::pad_right(label, 22);
        for (auto a : ablations) {
          const auto* c = report.find(m, a, d);
          out << detail::pad_left(c ? detail::fixed(value(*c), digits) : "-", 14);
        }
        out << "\n";
      }
    }
  };
  table("Target object prediction: top-" + std::to_string(report.k) + " accuracy [%]",
        [](const ReportCell& c) { return 100.0 * c.top5_accuracy; }, 1);
  table("Action prediction: cosine similarity", [](const ReportCell& c) { return c.action_cosine; }, 3);
  table("Action prediction: judge accuracy [%]", [](const ReportCell& c) { return 100.0 * c.judge_accuracy; }, 1);
  if (!report.errors.empty()) {
    out << "\nendpoint failures:\n";
    for (const auto& e : report.errors) out << "  " << e << "\n";
  }
  return out.str();
}

}  // namespace trllm
