#pragma once

// Room vocabulary and typical actions for household objects. Used by the offline heuristic
// model backend and by the synthetic scene generator.

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace trllm::household {

struct RoomType {
  std::string_view name;
  std::vector<std::string_view> objects;
};

inline const std::vector<RoomType>& room_types() {
  static const std::vector<RoomType> rooms = {
      {"kitchen",
       {"fridge", "stove", "sink", "microwave", "kettle", "dishwasher", "oven", "toaster", "coffee maker",
        "pantry shelf", "dining table", "trash can"}},
      {"living room",
       {"sofa", "tv", "bookshelf", "coffee table", "armchair", "piano", "fireplace", "floor lamp", "plant",
        "speaker", "game console", "aquarium"}},
      {"bedroom",
       {"bed", "wardrobe", "dresser", "nightstand", "mirror", "laundry basket", "vanity table", "alarm clock",
        "bench", "wall shelf", "closet", "reading chair"}},
      {"bathroom",
       {"toilet", "bathtub", "washbasin", "shower", "towel rack", "washing machine", "medicine cabinet",
        "hair dryer", "scale", "hamper", "soap dispenser", "cabinet"}},
      {"office",
       {"desk", "computer", "printer", "filing cabinet", "whiteboard", "office chair", "bookcase", "lamp",
        "shredder", "globe", "file tray", "couch"}},
  };
  return rooms;
}

inline const RoomType* find_room(std::string_view name) {
  for (const auto& r : room_types()) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

struct ActionPhrase {
  std::string_view object;
  std::string_view action;
};

inline const std::vector<ActionPhrase>& action_phrases() {
  static const std::vector<ActionPhrase> phrases = {
      {"fridge", "open the fridge and take out something to drink"},
      {"stove", "cook a meal on the stove"},
      {"sink", "wash the dishes at the sink"},
      {"microwave", "heat up food in the microwave"},
      {"kettle", "boil water in the kettle for tea"},
      {"dishwasher", "load the dirty dishes into the dishwasher"},
      {"oven", "bake something in the oven"},
      {"toaster", "make toast in the toaster"},
      {"coffee maker", "brew a cup of coffee with the coffee maker"},
      {"pantry shelf", "take a snack from the pantry shelf"},
      {"dining table", "sit down and eat at the dining table"},
      {"trash can", "throw garbage into the trash can"},
      {"sofa", "sit down and relax on the sofa"},
      {"tv", "turn on the tv and watch a show"},
      {"bookshelf", "pick a book from the bookshelf"},
      {"coffee table", "put a cup down on the coffee table"},
      {"armchair", "sit in the armchair and read"},
      {"piano", "sit down and play the piano"},
      {"fireplace", "light a fire in the fireplace"},
      {"floor lamp", "switch on the floor lamp"},
      {"plant", "water the plant"},
      {"speaker", "play music on the speaker"},
      {"game console", "play a video game on the game console"},
      {"aquarium", "feed the fish in the aquarium"},
      {"bed", "lie down on the bed and sleep"},
      {"wardrobe", "take clothes out of the wardrobe"},
      {"dresser", "put folded clothes in the dresser"},
      {"nightstand", "put a glass of water on the nightstand"},
      {"mirror", "check their appearance in the mirror"},
      {"laundry basket", "put dirty clothes in the laundry basket"},
      {"vanity table", "apply makeup at the vanity table"},
      {"alarm clock", "set the alarm clock"},
      {"toilet", "use the toilet"},
      {"bathtub", "take a bath in the bathtub"},
      {"washbasin", "wash their hands at the washbasin"},
      {"shower", "take a shower"},
      {"towel rack", "grab a towel from the towel rack"},
      {"washing machine", "start the washing machine"},
      {"medicine cabinet", "take medicine from the medicine cabinet"},
      {"hair dryer", "dry their hair with the hair dryer"},
      {"desk", "sit at the desk and write"},
      {"computer", "check email on the computer"},
      {"printer", "print a document on the printer"},
      {"filing cabinet", "file papers in the filing cabinet"},
      {"whiteboard", "write notes on the whiteboard"},
      {"office chair", "sit down on the office chair"},
      {"bookcase", "take a book from the bookcase"},
      {"lamp", "turn on the lamp"},
  };
  return phrases;
}

inline std::string typical_action(std::string_view object) {
  for (const auto& p : action_phrases()) {
    if (p.object == object) return std::string(p.action);
  }
  return "use the " + std::string(object);
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Case-insensitive phrase match on word boundaries ("tv" does not match "tvs").
inline bool mentions(std::string_view text, std::string_view phrase) {
  if (phrase.empty()) return false;
  const std::string t = to_lower(text);
  const std::string p = to_lower(phrase);
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t pos = t.find(p); pos != std::string::npos; pos = t.find(p, pos + 1)) {
    const bool left = pos == 0 || !is_word(t[pos - 1]);
    const std::size_t end = pos + p.size();
    const bool right = end == t.size() || !is_word(t[end]);
    if (left && right) return true;
  }
  return false;
}

// Rooms whose name appears in `location`.
inline std::vector<const RoomType*> rooms_named_in(std::string_view location) {
  std::vector<const RoomType*> out;
  for (const auto& r : room_types()) {
    if (mentions(location, r.name)) out.push_back(&r);
  }
  return out;
}

}  // namespace trllm::household
