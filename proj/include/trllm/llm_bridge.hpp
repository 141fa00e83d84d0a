#pragma once

// Two-stage target-object elicitation, action prediction and action judging over a
// chat-completion backend.

#include <algorithm>
#include <array>
#include <cctype>
#include <iterator>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "trllm/errors.hpp"
#include "trllm/household.hpp"
#include "trllm/probability.hpp"

namespace trllm {

struct SceneContext {
  std::string day_time;
  std::string persona;
  std::string location;
  std::vector<std::string> action_history;
  std::vector<std::string> conversation;
  std::vector<std::string> object_list;

  void validate() const {
    if (object_list.empty()) throw ContractError("scene context: empty object list");
    std::unordered_set<std::string_view> seen;
    for (const auto& o : object_list) {
      if (!seen.insert(o).second) throw ContractError("scene context: duplicate object '" + o + "'");
    }
  }
};

enum class AblationMode { all, wo_conv, wo_conv_hist };

inline constexpr std::array<AblationMode, 3> kAllAblations{AblationMode::all, AblationMode::wo_conv,
                                                           AblationMode::wo_conv_hist};

inline std::string_view to_string(AblationMode m) {
  switch (m) {
    case AblationMode::all: return "all";
    case AblationMode::wo_conv: return "wo_conv";
    case AblationMode::wo_conv_hist: return "wo_conv_hist";
  }
  return "all";
}

inline AblationMode parse_ablation(std::string_view s) {
  for (auto m : kAllAblations) {
    if (to_string(m) == s) return m;
  }
  throw ContractError("unknown ablation mode '" + std::string(s) + "'");
}

enum class Rank : char { A = 'A', B = 'B', C = 'C', D = 'D' };

struct RankAssignment {
  std::vector<std::string> labels;
  std::vector<Rank> ranks;

  Rank at(std::string_view label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) return ranks[i];
    }
    throw ContractError("rank assignment: unknown label '" + std::string(label) + "'");
  }
  bool operator==(const RankAssignment&) const = default;
};

struct ScoreTable {
  double a = 15.0;
  double b = 10.0;
  double c = 5.0;
  double d = 1.0;

  double score(Rank r) const {
    switch (r) {
      case Rank::A: return a;
      case Rank::B: return b;
      case Rank::C: return c;
      case Rank::D: return d;
    }
    return d;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Prompt templates (v1). Sections are "## <title>" blocks; lists render as "- item" lines.

namespace prompts {

inline constexpr std::string_view kVersion = "v1";
inline constexpr std::string_view kUnavailable = "(unavailable)";
inline constexpr std::string_view kNone = "(none)";

inline constexpr std::string_view kCandidateHeader = "### TASK: TARGET OBJECT CANDIDATES";
inline constexpr std::string_view kRankingHeader = "### TASK: TARGET OBJECT RANKING";
inline constexpr std::string_view kActionHeader = "### TASK: ACTION PREDICTION";
inline constexpr std::string_view kJudgeHeader = "### TASK: ACTION JUDGEMENT";

inline constexpr std::string_view kContext =
    "## Day and time\n{{day_time}}\n\n"
    "## Persona\n{{persona}}\n\n"
    "## Current location\n{{location}}\n\n"
    "## Action history\n{{action_history}}\n\n"
    "## Conversation\n{{conversation}}\n\n"
    "## Objects in the scene\n{{object_list}}\n\n";

inline constexpr std::string_view kCandidate =
    "{{header}} (prompt {{version}})\n"
    "The following describes a person at home. Sections marked (unavailable) could not be observed.\n\n"
    "{{context}}"
    "## Instruction\n"
    "Think about what the person is likely to do next. List the objects from the object list that the "
    "person is most likely to walk to, and for each one the action they would perform there. Write one "
    "free-form line per candidate, most likely first, in the form `object - action`.\n";

inline constexpr std::string_view kRanking =
    "{{header}} (prompt {{version}})\n"
    "The following describes a person at home. Sections marked (unavailable) could not be observed.\n\n"
    "{{context}}"
    "## Candidate targets from the previous step\n{{candidates}}\n\n"
    "## Instruction\n"
    "Using the context and the candidate targets, rate how likely each object in the object list is to be "
    "the person's next target. Use exactly one of four ranks per object: A (high probability), "
    "B (moderate probability), C (low probability), D (very low probability). Output one line per object "
    "in the form `label: RANK`, covering every object exactly once, and nothing else.\n";

inline constexpr std::string_view kAction =
    "{{header}} (prompt {{version}})\n"
    "The following describes a person at home. Sections marked (unavailable) could not be observed.\n\n"
    "{{context}}"
    "## Target object\n{{target}}\n\n"
    "## Instruction\n"
    "The person is walking to the target object. Describe in one concise sentence the most plausible "
    "action they will perform there. Output only that sentence.\n";

inline constexpr std::string_view kJudge =
    "{{header}} (prompt {{version}})\n"
    "## Predicted action\n{{predicted}}\n\n"
    "## Ground-truth action\n{{ground_truth}}\n\n"
    "## Instruction\n"
    "Output 1 if the predicted action is reasonably similar to the ground-truth action (same object and "
    "a compatible activity), and 0 otherwise. Output only the digit.\n";

inline std::string fill(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& vars) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const auto close = tmpl.find("}}", open);
    out.append(tmpl.substr(pos, open - pos));
    const auto key = tmpl.substr(open + 2, close - open - 2);
    auto it = vars.find(key);
    if (it == vars.end()) throw ContractError("prompt template: unbound placeholder '" + std::string(key) + "'");
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

inline std::string bullet_list(const std::vector<std::string>& items) {
  if (items.empty()) return std::string(kNone);
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '\n';
    out += "- " + items[i];
  }
  return out;
}

inline std::string or_none(const std::string& s) { return s.empty() ? std::string(kNone) : s; }

inline std::string render_context(const SceneContext& ctx, AblationMode mode) {
  const bool drop_conv = mode != AblationMode::all;
  const bool drop_hist = mode == AblationMode::wo_conv_hist;
  return fill(kContext,
              {{"day_time", or_none(ctx.day_time)},
               {"persona", or_none(ctx.persona)},
               {"location", or_none(ctx.location)},
               {"action_history", drop_hist ? std::string(kUnavailable) : bullet_list(ctx.action_history)},
               {"conversation", drop_conv ? std::string(kUnavailable) : bullet_list(ctx.conversation)},
               {"object_list", bullet_list(ctx.object_list)}});
}

}  // namespace prompts

inline std::string build_candidate_prompt(const SceneContext& ctx, AblationMode mode) {
  ctx.validate();
  return prompts::fill(prompts::kCandidate, {{"header", std::string(prompts::kCandidateHeader)},
                                             {"version", std::string(prompts::kVersion)},
                                             {"context", prompts::render_context(ctx, mode)}});
}

inline std::string build_ranking_prompt(const SceneContext& ctx, AblationMode mode, const std::string& candidates) {
  ctx.validate();
  return prompts::fill(prompts::kRanking, {{"header", std::string(prompts::kRankingHeader)},
                                           {"version", std::string(prompts::kVersion)},
                                           {"context", prompts::render_context(ctx, mode)},
                                           {"candidates", prompts::or_none(std::string(detail::trim(candidates)))}});
}

inline std::string build_action_prompt(const SceneContext& ctx, AblationMode mode, const std::string& target) {
  ctx.validate();
  if (std::find(ctx.object_list.begin(), ctx.object_list.end(), target) == ctx.object_list.end()) {
    throw ContractError("action prompt: target '" + target + "' is not in the object list");
  }
  return prompts::fill(prompts::kAction, {{"header", std::string(prompts::kActionHeader)},
                                          {"version", std::string(prompts::kVersion)},
                                          {"context", prompts::render_context(ctx, mode)},
                                          {"target", target}});
}

inline std::string build_judge_prompt(const std::string& predicted, const std::string& ground_truth) {
  return prompts::fill(prompts::kJudge, {{"header", std::string(prompts::kJudgeHeader)},
                                         {"version", std::string(prompts::kVersion)},
                                         {"predicted", predicted},
                                         {"ground_truth", ground_truth}});
}

// ---------------------------------------------------------------------------
// Response parsing

// Total parser for `label : letter` lines. Labels match case-insensitively; missing labels and
// letters outside A-D become D; later lines override earlier ones. Each defaulted label adds
// one to telemetry->rank_defaults.
inline RankAssignment parse_ranks(std::string_view response, const std::vector<std::string>& objects,
                                  Telemetry* telemetry = nullptr) {
  RankAssignment out{objects, std::vector<Rank>(objects.size(), Rank::D)};
  std::vector<char> valid(objects.size(), 0);
  std::vector<std::string> lowered;
  lowered.reserve(objects.size());
  for (const auto& o : objects) lowered.push_back(household::to_lower(o));

  for (auto line : detail::split_lines(response)) {
    const auto colon = line.rfind(':');
    if (colon == std::string_view::npos) continue;
    const auto label = household::to_lower(detail::trim(line.substr(0, colon)));
    const auto value = detail::trim(line.substr(colon + 1));
    for (std::size_t i = 0; i < objects.size(); ++i) {
      if (lowered[i] != label) continue;
      const char c = value.size() == 1 ? static_cast<char>(std::toupper(static_cast<unsigned char>(value[0]))) : '?';
      if (c >= 'A' && c <= 'D') {
        out.ranks[i] = static_cast<Rank>(c);
        valid[i] = 1;
      } else {
        out.ranks[i] = Rank::D;
        valid[i] = 0;
      }
    }
  }
  if (telemetry) {
    for (char v : valid) telemetry->rank_defaults += v ? 0 : 1;
  }
  return out;
}

inline ObjectProbabilityMap ranks_to_probabilities(const RankAssignment& ranks, const ScoreTable& table = {}) {
  std::vector<double> scores;
  scores.reserve(ranks.ranks.size());
  for (auto r : ranks.ranks) scores.push_back(table.score(r));
  return ObjectProbabilityMap::from_weights(ranks.labels, std::move(scores));
}

// First standalone '0' or '1' token wins; anything else scores 0 and bumps
// telemetry->judge_unparsable.
inline int parse_judgement(std::string_view response, Telemetry* telemetry = nullptr) {
  for (std::size_t i = 0; i < response.size(); ++i) {
    const char c = response[i];
    if (c != '0' && c != '1') continue;
    const bool left = i == 0 || !std::isalnum(static_cast<unsigned char>(response[i - 1]));
    bool right = i + 1 == response.size() || !std::isalnum(static_cast<unsigned char>(response[i + 1]));
    // "1.5" or "0.7" are numbers, not verdicts; a trailing sentence period is fine.
    if (right && i + 2 < response.size() && response[i + 1] == '.' && std::isdigit(static_cast<unsigned char>(response[i + 2]))) {
      right = false;
    }
    if (left && right) return c - '0';
  }
  if (telemetry) ++telemetry->judge_unparsable;
  return 0;
}

// ---------------------------------------------------------------------------
// Backends

// Anything that turns one user prompt into one assistant reply. Implementations must be safe
// to call concurrently.
class ChatBackend {
public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const std::string& prompt) const = 0;
};

// 64-bit FNV-1a as 16 lowercase hex digits.
inline std::string prompt_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Replies looked up by prompt hash in a JSON map {"<16 hex>": "reply"}. Unknown prompts get
// `fallback` (empty by default).
class ScriptedBackend final : public ChatBackend {
public:
  explicit ScriptedBackend(std::map<std::string, std::string> responses, std::string fallback = {})
      : responses_(std::move(responses)), fallback_(std::move(fallback)) {}

  static ScriptedBackend from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("response script: expected a JSON object");
    std::map<std::string, std::string> m;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!it.value().is_string()) throw ParseError("response script: value for '" + it.key() + "' is not a string");
      m.emplace(it.key(), it.value().get<std::string>());
    }
    return ScriptedBackend(std::move(m));
  }

  std::string complete(const std::string& prompt) const override {
    auto it = responses_.find(prompt_hash(prompt));
    return it == responses_.end() ? fallback_ : it->second;
  }

private:
  std::map<std::string, std::string> responses_;
  std::string fallback_;
};

// Offline stand-in that reads the structured prompt back:
//   ranking   A for objects named in the action history or conversation, B for objects that
//             share a room type with an A object or belong to a room named in the current
//             location, D otherwise
//   candidate the A objects with their typical actions
//   action    the typical action for the target object
//   judge     1 when the two actions share at least half of their content words
class HeuristicBackend final : public ChatBackend {
public:
  std::string complete(const std::string& prompt) const override {
    const auto sections = parse_sections(prompt);
    const auto first_line = prompt.substr(0, prompt.find('\n'));
    if (first_line.rfind(prompts::kRankingHeader, 0) == 0) return rank(sections);
    if (first_line.rfind(prompts::kCandidateHeader, 0) == 0) return candidates(sections);
    if (first_line.rfind(prompts::kActionHeader, 0) == 0) return action(sections);
    if (first_line.rfind(prompts::kJudgeHeader, 0) == 0) return judge(sections);
    return {};
  }

private:
  using Sections = std::map<std::string, std::vector<std::string>, std::less<>>;

  static Sections parse_sections(const std::string& prompt) {
    Sections out;
    std::string current;
    for (auto line : detail::split_lines(prompt)) {
      if (line.rfind("## ", 0) == 0) {
        current = std::string(line.substr(3));
        out[current];
        continue;
      }
      if (current.empty()) continue;
      auto t = detail::trim(line);
      if (t.empty() || t == prompts::kUnavailable || t == prompts::kNone) continue;
      if (t.rfind("- ", 0) == 0) t.remove_prefix(2);
      out[current].emplace_back(t);
    }
    return out;
  }

  static std::vector<std::string> get(const Sections& s, std::string_view key) {
    auto it = s.find(key);
    return it == s.end() ? std::vector<std::string>{} : it->second;
  }

  static std::string joined(const Sections& s, std::string_view key) {
    std::string out;
    for (const auto& l : get(s, key)) out += l + "\n";
    return out;
  }

  // A: mentioned in history or conversation. B: shares a room type with an A object, or
  // belongs to a room named in the location. D otherwise.
  static std::vector<std::pair<std::string, Rank>> ranks_for(const Sections& s) {
    const auto objects = get(s, "Objects in the scene");
    const auto evidence = joined(s, "Action history") + joined(s, "Conversation");
    auto rooms = household::rooms_named_in(joined(s, "Current location"));
    std::vector<std::pair<std::string, Rank>> out;
    for (const auto& o : objects) {
      const bool mentioned = household::mentions(evidence, o);
      out.emplace_back(o, mentioned ? Rank::A : Rank::D);
      if (!mentioned) continue;
      for (const auto& room : household::room_types()) {
        if (std::find(room.objects.begin(), room.objects.end(), o) != room.objects.end() &&
            std::find(rooms.begin(), rooms.end(), &room) == rooms.end()) {
          rooms.push_back(&room);
        }
      }
    }
    for (auto& [o, r] : out) {
      if (r != Rank::D) continue;
      for (const auto* room : rooms) {
        if (std::find(room->objects.begin(), room->objects.end(), o) != room->objects.end()) r = Rank::B;
      }
    }
    return out;
  }

  static std::string rank(const Sections& s) {
    std::string out;
    for (const auto& [label, r] : ranks_for(s)) out += label + ": " + static_cast<char>(r) + "\n";
    return out;
  }

  static std::string candidates(const Sections& s) {
    std::string out;
    for (const auto& [label, r] : ranks_for(s)) {
      if (r == Rank::A) out += label + " - " + household::typical_action(label) + "\n";
    }
    return out;
  }

  static std::string action(const Sections& s) {
    const auto target = get(s, "Target object");
    return target.empty() ? std::string{} : household::typical_action(target.front());
  }

  static std::vector<std::string> content_words(const std::string& text) {
    static const std::unordered_set<std::string> stop = {"a", "an", "the", "and", "to", "of", "in", "on",
                                                         "at", "for", "with", "their", "some", "something",
                                                         "from", "into", "up", "down", "out"};
    std::vector<std::string> words;
    std::string cur;
    for (char c : text + " ") {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      } else if (!cur.empty()) {
        if (!stop.count(cur)) words.push_back(cur);
        cur.clear();
      }
    }
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    return words;
  }

  static std::string judge(const Sections& s) {
    const auto a = content_words(joined(s, "Predicted action"));
    const auto b = content_words(joined(s, "Ground-truth action"));
    if (a.empty() || b.empty()) return "0";
    std::vector<std::string> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    const double overlap = static_cast<double>(common.size()) / static_cast<double>(std::min(a.size(), b.size()));
    return overlap >= 0.5 ? "1" : "0";
  }
};

// ---------------------------------------------------------------------------
// Pipelines

inline ObjectProbabilityMap predict_target_ranks(const ChatBackend& backend, const SceneContext& ctx,
                                                 AblationMode mode, Telemetry* telemetry = nullptr,
                                                 const ScoreTable& table = {}) {
  const auto candidates = backend.complete(build_candidate_prompt(ctx, mode));
  const auto ranking = backend.complete(build_ranking_prompt(ctx, mode, candidates));
  return ranks_to_probabilities(parse_ranks(ranking, ctx.object_list, telemetry), table);
}

inline std::string predict_action(const ChatBackend& backend, const SceneContext& ctx, AblationMode mode,
                                  const std::string& target_object) {
  return std::string(detail::trim(backend.complete(build_action_prompt(ctx, mode, target_object))));
}

inline int judge_action(const ChatBackend& backend, const std::string& predicted, const std::string& ground_truth,
                        Telemetry* telemetry = nullptr) {
  if (detail::trim(predicted).empty() || detail::trim(ground_truth).empty()) {
    throw ContractError("judge: predicted and ground-truth actions must be non-empty");
  }
  return parse_judgement(backend.complete(build_judge_prompt(predicted, ground_truth)), telemetry);
}

}  // namespace trllm
