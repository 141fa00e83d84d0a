// trllm: offline command-line entry point.
//
// Exit codes: 0 ok, 2 bad arguments, 3 data errors, 4 endpoint errors.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trllm/dataset_gen.hpp"
#include "trllm/eval.hpp"
#include "trllm/fusion.hpp"
#include "trllm/goal_predictor.hpp"
#include "trllm/llm_http.hpp"
#include "trllm/render.hpp"
#include "trllm/unet.hpp"
#include "trllm/weights.hpp"

namespace fs = std::filesystem;
using namespace trllm;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LlmOptions {
  std::string mock;  // "heuristic" or a response-script path
  std::string endpoint;
  std::string model;
  int max_parallel = 4;
  int max_retries = 3;
  double timeout_s = 60.0;

  void add(CLI::App& cmd) {
    cmd.add_option("--mock-llm", mock, "Offline backend: 'heuristic' or a response-script JSON path");
    cmd.add_option("--llm-endpoint", endpoint, "OpenAI-compatible base URL, e.g. http://host:8000/v1");
    cmd.add_option("--llm-model", model, "Model name sent to the endpoint");
    cmd.add_option("--llm-parallel", max_parallel, "Maximum in-flight requests")->check(CLI::PositiveNumber);
    cmd.add_option("--llm-retries", max_retries, "Retries on transport errors, 429 and 5xx")->check(CLI::NonNegativeNumber);
    cmd.add_option("--llm-timeout", timeout_s, "Per-request timeout in seconds")->check(CLI::PositiveNumber);
  }

  bool given() const { return !mock.empty() || !endpoint.empty(); }

  LlmEndpointConfig endpoint_config() const {
    LlmEndpointConfig cfg;
    cfg.base_url = endpoint;
    cfg.model_name = model;
    cfg.max_parallel = max_parallel;
    cfg.max_retries = max_retries;
    cfg.timeout_s = timeout_s;
    return cfg;
  }

  std::shared_ptr<const ChatBackend> make() const {
    if (!mock.empty() && !endpoint.empty()) throw UsageError("--mock-llm and --llm-endpoint are mutually exclusive");
    if (mock == "heuristic") return std::make_shared<HeuristicBackend>();
    if (!mock.empty()) return std::make_shared<ScriptedBackend>(ScriptedBackend::from_json(detail::read_json_file(mock)));
    if (!endpoint.empty()) {
      if (model.empty()) throw UsageError("--llm-endpoint needs --llm-model");
      return std::make_shared<HttpChatBackend>(endpoint_config());
    }
    throw UsageError("a language-model backend is required: --mock-llm or --llm-endpoint");
  }

  std::string describe() const {
    if (mock == "heuristic") return "mock:heuristic";
    if (!mock.empty()) return "mock:script";
    return "http:" + model;
  }
};

struct PredictorOptions {
  std::string kind = "geometric";
  std::string weights;
  double beta = kDefaultBeta;

  void add(CLI::App& cmd) {
    cmd.add_option("--predictor", kind, "Goal predictor")->check(CLI::IsMember({"unet", "geometric", "uniform"}));
    cmd.add_option("--weights", weights, "TRLW weight container (required for --predictor unet)");
    cmd.add_option("--beta", beta, "Geometric predictor detour rate per meter")->check(CLI::PositiveNumber);
  }

  GoalPredictorKind make() const {
    if (kind == "unet") {
      if (weights.empty()) throw UsageError("--predictor unet needs --weights");
      auto wc = std::make_shared<const WeightContainer>(load_weights(weights));
      const auto spec = infer_unet_spec(*wc);
      validate_unet_weights(spec, *wc);
      return UNetPredictor{std::move(wc), spec};
    }
    if (kind == "uniform") return UniformPredictor{};
    return GeometricPredictor{beta};
  }
};

struct PredictOptions {
  std::string scene, scenario, trajectory;
  std::string method = "fused";
  std::string ablation = "all";
  double d_min = 0.0;
  std::string heatmap_out;
  PredictorOptions predictor;
  LlmOptions llm;

  void add(CLI::App& cmd, bool scenario_required) {
    cmd.add_option("--scene", scene, "Scene descriptor JSON")->required();
    auto* s = cmd.add_option("--scenario", scenario, "Scenario JSON");
    if (scenario_required) s->required();
    cmd.add_option("--trajectory", trajectory, "Trajectory CSV (t,x,y)")->required();
    cmd.add_option("--method", method, "Prediction method")->check(CLI::IsMember({"llm", "trajectory", "fused"}));
    cmd.add_option("--ablation", ablation, "Context ablation")->check(CLI::IsMember({"all", "wo_conv", "wo_conv_hist"}));
    cmd.add_option("--d-min", d_min, "Truncate the trajectory at this progress in meters (0 = full)")
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--heatmap-out", heatmap_out, "Write the predicted heatmap as a TRLH dump");
    predictor.add(cmd);
    llm.add(cmd);
  }
};

struct Prediction {
  Scene scene;
  Trajectory observed;
  Heatmap heatmap;
  ObjectProbabilityMap probs;
  std::optional<std::string> action;
  Telemetry flags;
};

Prediction run_predict(const PredictOptions& o) {
  const auto method = parse_method(o.method);
  const auto mode = parse_ablation(o.ablation);
  const bool need_llm = method != Method::trajectory;
  if (need_llm && !o.llm.given()) throw UsageError("--method " + o.method + " needs --mock-llm or --llm-endpoint");
  if (need_llm && o.scenario.empty()) throw UsageError("--method " + o.method + " needs --scenario");
  const auto predictor = o.predictor.make();

  Prediction p{load_scene(o.scene), load_trajectory(o.trajectory), {}, {}, std::nullopt, {}};
  std::optional<Scenario> scenario;
  if (!o.scenario.empty()) scenario = load_scenario(o.scenario);
  if (o.d_min > 0.0) p.observed = truncate_at_progress(p.observed, o.d_min, &p.flags);

  p.heatmap = method == Method::llm ? Heatmap(p.scene.geometry(), 0.0) : predict_heatmap(predictor, p.scene, p.observed);
  std::shared_ptr<const ChatBackend> llm;
  if (o.llm.given()) llm = o.llm.make();
  std::optional<ObjectProbabilityMap> semantic;
  if (need_llm) semantic = predict_target_ranks(*llm, make_context(*scenario, p.scene), mode, &p.flags);
  if (method == Method::llm) {
    p.probs = *semantic;
  } else {
    auto physical = object_probabilities(p.heatmap, p.scene, &p.flags);
    p.probs = method == Method::fused ? fuse(*semantic, physical, &p.flags) : physical;
  }
  if (llm && scenario) {
    const auto action_mode = method == Method::trajectory ? AblationMode::wo_conv_hist : mode;
    p.action = predict_action(*llm, make_context(*scenario, p.scene), action_mode, top_k(p.probs, 1).front());
  }
  if (!o.heatmap_out.empty()) save_heatmap(p.heatmap, o.heatmap_out);
  return p;
}

nlohmann::ordered_json telemetry_json(const Telemetry& t) {
  return {{"rank_defaults", t.rank_defaults},
          {"judge_unparsable", t.judge_unparsable},
          {"zero_mass_fallbacks", t.zero_mass_fallbacks},
          {"fusion_fallbacks", t.fusion_fallbacks},
          {"truncation_saturated", t.truncation_saturated}};
}

int cmd_predict(const PredictOptions& o) {
  const auto p = run_predict(o);
  nlohmann::ordered_json out;
  out["method"] = o.method;
  out["predictor"] = o.method == "llm" ? "none" : o.predictor.kind;
  out["ablation"] = o.ablation;
  out["d_min_m"] = o.d_min;
  out["progress_m"] = progress_distance(p.observed);
  auto ranked = nlohmann::ordered_json::array();
  for (const auto& label : top_k(p.probs, p.probs.size())) {
    ranked.push_back({{"label", label}, {"probability", p.probs.at(label)}});
  }
  out["ranked"] = std::move(ranked);
  out["top1"] = top_k(p.probs, 1).front();
  out["action"] = p.action ? nlohmann::ordered_json(*p.action) : nlohmann::ordered_json(nullptr);
  out["flags"] = telemetry_json(p.flags);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_render(const PredictOptions& o, const std::string& out_path) {
  const auto p = run_predict(o);
  png::write_rgba(out_path, render_prediction(p.scene, p.heatmap, p.probs, &p.observed));
  std::cerr << "wrote " << out_path << "\n";
  return 0;
}

struct EvaluateOptions {
  std::string manifest;
  std::string out = "report";
  int trials = 3;
  int jobs = 1;
  std::uint64_t seed = 0;
  std::size_t k = 5;
  std::vector<double> thresholds{1.0, 2.0, 3.0};
  std::string embedding_model;
  PredictorOptions predictor;
  LlmOptions llm;
};

int cmd_evaluate(const EvaluateOptions& o) {
  EvalConfig cfg;
  cfg.llm = o.llm.make();
  cfg.llm_description = o.llm.describe();
  cfg.predictor = o.predictor.make();
  cfg.trials = o.trials;
  cfg.jobs = o.jobs;
  cfg.seed = o.seed;
  cfg.k = o.k;
  cfg.d_thresholds_m = o.thresholds;
  if (!o.embedding_model.empty()) {
    if (o.llm.endpoint.empty()) throw UsageError("--embedding-model needs --llm-endpoint");
    auto ec = o.llm.endpoint_config();
    ec.model_name = o.embedding_model;
    cfg.embedder = std::make_shared<RemoteEmbedder>(ec);
    cfg.embedder_description = "http:" + o.embedding_model;
  }
  const auto pairs = load_manifest(o.manifest);
  if (pairs.empty()) throw ValidationError("manifest '" + o.manifest + "' lists no pairs");
  std::cerr << "evaluating " << pairs.size() << " pairs x " << o.trials << " trials\n";
  const auto report = run_evaluation(pairs, cfg);
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw IoError("cannot create '" + o.out + "': " + ec.message());
  detail::write_text_file(fs::path(o.out) / "report.json", report_to_json(report).dump(2) + "\n");
  detail::write_text_file(fs::path(o.out) / "report.txt", report_to_text(report));
  for (const auto& e : report.errors) std::cerr << "endpoint failure: " << e << "\n";
  std::cerr << "wrote " << (fs::path(o.out) / "report.json").string() << " and report.txt\n";
  return 0;
}

struct GenDataOptions {
  std::uint64_t seed = 7;
  int scenes = 6;
  std::optional<int> rooms;
  std::optional<int> objects;
  double speed = kDefaultSpeedMps;
  std::string out = "data";
};

int cmd_gen_data(const GenDataOptions& o) {
  std::vector<Scene> scenes;
  if (o.rooms || o.objects) {
    const RoomSpec spec{o.rooms.value_or(3), o.objects.value_or(12)};
    for (int i = 0; i < o.scenes; ++i) {
      auto scene = gen_scene(o.seed * 1000 + static_cast<std::uint64_t>(i), spec);
      char name[32];
      std::snprintf(name, sizeof name, "scene_%02d", i + 1);
      scene.name = name;
      scenes.push_back(std::move(scene));
    }
  } else {
    scenes = bundled_scenes(o.seed, o.scenes);
  }
  const auto files = write_dataset(o.out, scenes, bundled_scenarios(), o.speed);
  for (const auto& id : files.unmatched_scenarios) {
    std::cerr << "warning: scenario " << id << " matched no scene\n";
  }
  std::cerr << "wrote " << files.scenes.size() << " scenes, " << files.scenarios.size() << " scenarios, "
            << files.pair_count << " pairs to " << o.out << "\n";
  return 0;
}

struct MakeWeightsOptions {
  std::uint32_t seed = 1;
  std::string out;
  std::vector<int> encoder{256, 256, 512, 512, 512};
  std::vector<int> decoder{512, 512, 512, 256, 256};
  bool zero = false;
};

int cmd_make_weights(const MakeWeightsOptions& o) {
  UNetSpec spec;
  if (o.encoder.size() != 5 || o.decoder.size() != 5) throw UsageError("--encoder and --decoder take 5 widths each");
  std::copy(o.encoder.begin(), o.encoder.end(), spec.encoder_channels.begin());
  std::copy(o.decoder.begin(), o.decoder.end(), spec.decoder_channels.begin());
  spec.validate();
  const auto wc = o.zero ? make_zero_unet_weights(spec) : make_random_unet_weights(spec, o.seed);
  save_weights(wc, o.out);
  std::cerr << "wrote " << wc.tensors().size() << " tensors to " << o.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Target-object and action prediction from trajectories and language-model context"};
  app.require_subcommand(1);

  PredictOptions predict;
  auto* predict_cmd = app.add_subcommand("predict", "Rank scene objects for one scenario/scene/trajectory triple");
  predict.add(*predict_cmd, false);

  PredictOptions render;
  std::string render_out;
  auto* render_cmd = app.add_subcommand("render", "Render a prediction overlay to PNG");
  render.add(*render_cmd, false);
  render_cmd->add_option("--out", render_out, "Output PNG path")->required();

  EvaluateOptions evaluate;
  auto* eval_cmd = app.add_subcommand("evaluate", "Run the evaluation grid over a manifest");
  eval_cmd->add_option("--manifest", evaluate.manifest, "manifest.json")->required();
  eval_cmd->add_option("--out", evaluate.out, "Output directory for report.json and report.txt");
  eval_cmd->add_option("--trials", evaluate.trials, "Trials per pair")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--jobs", evaluate.jobs, "Worker threads")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", evaluate.seed, "Seed recorded in the report");
  eval_cmd->add_option("--k", evaluate.k, "Top-k cutoff")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--thresholds", evaluate.thresholds, "Progress thresholds in meters")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--embedding-model", evaluate.embedding_model, "Use the endpoint's /embeddings with this model");
  evaluate.predictor.add(*eval_cmd);
  evaluate.llm.add(*eval_cmd);

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic scenes, scenarios, trajectories and manifest");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--scenes", gen.scenes, "Number of scenes")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--rooms", gen.rooms, "Rooms per scene (random layout instead of the bundled plans)");
  gen_cmd->add_option("--objects", gen.objects, "Objects per scene (random layout instead of the bundled plans)");
  gen_cmd->add_option("--speed", gen.speed, "Walking speed in m/s")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--out", gen.out, "Output directory");

  MakeWeightsOptions mw;
  auto* mw_cmd = app.add_subcommand("make-weights", "Write a seeded random (or zero) U-Net weight container");
  mw_cmd->add_option("--seed", mw.seed, "Seed");
  mw_cmd->add_option("--out", mw.out, "Output path")->required();
  mw_cmd->add_option("--encoder", mw.encoder, "Five encoder widths")->delimiter(',')->expected(5);
  mw_cmd->add_option("--decoder", mw.decoder, "Five decoder widths")->delimiter(',')->expected(5);
  mw_cmd->add_flag("--zero", mw.zero, "All-zero weights");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*predict_cmd) return cmd_predict(predict);
    if (*render_cmd) return cmd_render(render, render_out);
    if (*eval_cmd) return cmd_evaluate(evaluate);
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*mw_cmd) return cmd_make_weights(mw);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const EndpointError& e) {
    std::cerr << "endpoint error: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
