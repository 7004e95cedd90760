#include "envs_internal.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>

#include "copolab/error.hpp"
#include "copolab/random.hpp"

namespace copolab::detail {

namespace {

enum class Family { kPickPlace, kExamine, kClean, kHeat, kCool, kPickTwo };
constexpr int kNumFamilies = 6;

constexpr std::array<std::string_view, kNumFamilies> kFamilyNames{
    "pick-place", "examine-with-light", "clean-place",
    "heat-place", "cool-place",         "pick-two-place"};

constexpr std::array<std::string_view, 17> kRegular{
    "cabinet 1", "cabinet 2",     "cabinet 3", "countertop 1", "countertop 2",
    "drawer 1",  "drawer 2",      "shelf 1",   "shelf 2",      "diningtable 1",
    "sidetable 1", "desk 1",      "dresser 1", "garbagecan 1", "coffeetable 1",
    "sofa 1",    "bed 1"};

constexpr std::string_view kSink = "sinkbasin 1";
constexpr std::string_view kMicrowave = "microwave 1";
constexpr std::string_view kFridge = "fridge 1";
constexpr std::string_view kLamp = "desklamp 1";

constexpr std::array<std::string_view, 18> kObjectTypes{
    "apple", "bowl",  "bread", "book",   "cd",     "cup",
    "egg",   "keychain", "knife", "mug", "pen",    "pencil",
    "plate", "potato", "spoon", "tomato", "vase",  "watch"};

constexpr std::array<std::array<std::string_view, 8>, kNumFamilies> kFamilyPools{{
    {"apple", "book", "cd", "cup", "keychain", "mug", "plate", "vase"},
    {"book", "cd", "keychain", "pen", "pencil", "vase", "watch", "mug"},
    {"apple", "bowl", "cup", "knife", "mug", "plate", "spoon", "tomato"},
    {"apple", "bread", "cup", "egg", "mug", "plate", "potato", "tomato"},
    {"apple", "bowl", "bread", "cup", "egg", "mug", "potato", "tomato"},
    {"book", "cd", "keychain", "pen", "pencil", "spoon", "apple", "egg"},
}};

constexpr int kNumRegularInHouse = 5;
constexpr int kNumDistractors = 3;

bool is_regular(std::string_view loc) {
  return std::find(kRegular.begin(), kRegular.end(), loc) != kRegular.end();
}

std::string type_of(const std::string& object) {
  return object.substr(0, object.find(' '));
}

std::string list_with_articles(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ", ";
    out += "a " + items[i];
  }
  return out;
}

struct HouseState {
  Family family = Family::kPickPlace;
  std::string target_type;
  std::string target_rec;  // empty for examine-with-light
  std::string lamp_holder;
  std::vector<std::string> locations;  // layout order
  std::map<std::string, std::vector<std::string>> contents;
  std::string location;  // empty: middle of the room
  std::string holding;   // empty: hands free
  std::set<std::string> cleaned, heated, cooled;
  bool lamp_on_with_target = false;
  std::string instruction;
};

class GridHouse final : public TextEnv {
 public:
  ResetResult reset(const EnvSpec& spec) override {
    if (spec.task_id < 0 || spec.task_id >= gridhouse_num_tasks()) {
      throw UnknownTask("GridHouse task " + std::to_string(spec.task_id));
    }
    spec_ = spec;
    step_counter_ = 0;
    done_ = false;
    success_ = false;
    score_ = 0.0;
    s_ = HouseState{};

    const int fam = spec.task_id % kNumFamilies;
    const int k = spec.task_id / kNumFamilies;
    s_.family = static_cast<Family>(fam);
    s_.target_type = std::string(kFamilyPools[fam][k % 8]);
    Rng rng(mix_seed(spec.seed, 0x6772696468ULL + static_cast<std::uint64_t>(spec.task_id)));

    std::vector<std::string> regular;
    if (s_.family == Family::kExamine) {
      s_.lamp_holder = rng.uniform() < 0.5 ? "desk 1" : "sidetable 1";
      regular.push_back(s_.lamp_holder);
    } else {
      s_.target_rec = std::string(kRegular[(k * 5 + fam * 3) % kRegular.size()]);
      regular.push_back(s_.target_rec);
    }
    std::vector<std::string> pool;
    for (auto r : kRegular) {
      if (r != s_.target_rec && r != s_.lamp_holder) pool.emplace_back(r);
    }
    rng.shuffle(pool);
    while (static_cast<int>(regular.size()) < kNumRegularInHouse) {
      regular.push_back(pool.back());
      pool.pop_back();
    }
    s_.locations = regular;
    s_.locations.emplace_back(kSink);
    s_.locations.emplace_back(kMicrowave);
    s_.locations.emplace_back(kFridge);
    rng.shuffle(s_.locations);
    for (const auto& loc : s_.locations) s_.contents[loc];

    // Targets never start on the target receptacle.
    std::vector<std::string> target_spots;
    for (const auto& r : regular) {
      if (r != s_.target_rec) target_spots.push_back(r);
    }
    const int n_targets = s_.family == Family::kPickTwo ? 2 : 1;
    for (int i = 1; i <= n_targets; ++i) {
      const auto& spot = target_spots[rng.index(target_spots.size())];
      s_.contents[spot].push_back(s_.target_type + " " + std::to_string(i));
    }
    std::vector<std::string> others;
    for (auto t : kObjectTypes) {
      if (t != s_.target_type) others.emplace_back(t);
    }
    rng.shuffle(others);
    for (int i = 0; i < kNumDistractors; ++i) {
      const auto& spot = regular[rng.index(regular.size())];
      s_.contents[spot].push_back(others[static_cast<std::size_t>(i)] + " 1");
    }
    if (!s_.lamp_holder.empty()) {
      auto& c = s_.contents[s_.lamp_holder];
      c.insert(c.begin(), std::string(kLamp));
    }

    s_.instruction = make_instruction();
    ResetResult out;
    out.instruction = s_.instruction;
    out.observation = initial_observation();
    out.admissible_actions = admissible_actions();
    return out;
  }

  StepOutcome step(std::string_view action_view) override {
    if (done_) throw EpisodeFinished("GridHouse episode already finished");
    const std::string action(action_view);
    ++step_counter_;
    StepOutcome out;
    const auto admissible = admissible_actions();
    if (std::find(admissible.begin(), admissible.end(), action) ==
        admissible.end()) {
      out.observation = std::string(kNothingHappened);
    } else {
      out.observation = apply(action);
    }
    success_ = goal_reached();
    score_ = success_ ? 1.0 : 0.0;
    done_ = success_ || step_counter_ >= spec_.max_steps;
    out.done = done_;
    out.success = success_;
    out.score = score_;
    if (!done_) out.admissible_actions = admissible_actions();
    return out;
  }

  std::string oracle_action() const override {
    if (done_) throw EpisodeFinished("GridHouse oracle called after done");
    const std::string here = s_.location;
    auto go = [&](const std::string& where) -> std::string {
      if (here != where) return "go to " + where;
      return {};
    };
    if (!s_.holding.empty() && !is_target(s_.holding)) {
      if (is_regular(here)) return "put " + s_.holding + " in " + here;
      for (const auto& loc : s_.locations) {
        if (is_regular(loc)) return "go to " + loc;
      }
    }
    if (!s_.holding.empty()) {
      const auto& h = s_.holding;
      if (s_.family == Family::kExamine) {
        if (auto g = go(s_.lamp_holder); !g.empty()) return g;
        return "use " + std::string(kLamp);
      }
      if (needs_treatment(h)) {
        const std::string app(appliance());
        if (auto g = go(app); !g.empty()) return g;
        return std::string(verb()) + " " + h + " with " + app;
      }
      if (auto g = go(s_.target_rec); !g.empty()) return g;
      return "put " + h + " in " + s_.target_rec;
    }
    const auto [obj, where] = next_target();
    if (obj.empty()) throw NoSolution("GridHouse: no target object left");
    if (auto g = go(where); !g.empty()) return g;
    return "take " + obj + " from " + where;
  }

  ThinkFacts facts() const override {
    ThinkFacts f;
    f.location = s_.location.empty() ? "the middle of the room" : s_.location;
    f.holding = s_.holding.empty() ? "nothing" : s_.holding;
    if (done_) return f;
    f.oracle_action = oracle_action();
    const auto& h = s_.holding;
    if (!h.empty() && !is_target(h)) {
      f.key_fact = "the " + h + " is not needed.";
    } else if (!h.empty() && s_.family == Family::kExamine) {
      f.key_fact = "the " + std::string(kLamp) + " is on " + s_.lamp_holder + ".";
    } else if (!h.empty() && needs_treatment(h)) {
      f.key_fact = "the " + std::string(appliance()) + " can " +
                   std::string(verb()) + " the " + h + ".";
    } else if (!h.empty()) {
      f.key_fact = "the " + h + " goes in " + s_.target_rec + ".";
    } else {
      const auto [obj, where] = next_target();
      f.key_fact = "the " + obj + " is on " + where + ".";
    }
    const auto adm = admissible_actions();
    std::vector<std::string> others;
    for (const auto& a : adm) {
      if (a != f.oracle_action) others.push_back(a);
    }
    if (!others.empty()) {
      const auto pick = mix_seed(spec_.seed, static_cast<std::uint64_t>(step_counter_) * 131 +
                                                 static_cast<std::uint64_t>(spec_.task_id));
      f.alternative_action = others[pick % others.size()];
    }
    return f;
  }

  std::vector<std::string> admissible_actions() const override {
    std::vector<std::string> out;
    const std::string& here = s_.location;
    for (const auto& loc : s_.locations) {
      if (loc != here) out.push_back("go to " + loc);
    }
    if (here.empty()) return out;
    if (is_regular(here)) {
      const auto& c = s_.contents.at(here);
      if (s_.holding.empty()) {
        for (const auto& o : c) {
          if (o != kLamp) out.push_back("take " + o + " from " + here);
        }
      } else {
        out.push_back("put " + s_.holding + " in " + here);
      }
      if (here == s_.lamp_holder) out.push_back("use " + std::string(kLamp));
    } else if (!s_.holding.empty()) {
      const std::string_view v = here == kSink        ? "clean"
                                 : here == kMicrowave ? "heat"
                                                      : "cool";
      out.push_back(std::string(v) + " " + s_.holding + " with " + here);
    }
    return out;
  }

  std::unique_ptr<TextEnv> clone() const override {
    return std::make_unique<GridHouse>(*this);
  }

  EnvId id() const override { return EnvId::kGridHouse; }
  std::string category() const override {
    return std::string(kFamilyNames[static_cast<std::size_t>(s_.family)]);
  }
  bool lists_actions() const override { return true; }

 private:
  std::string make_instruction() const {
    switch (s_.family) {
      case Family::kPickPlace:
        return "put a " + s_.target_type + " in " + s_.target_rec + ".";
      case Family::kExamine:
        return "look at " + s_.target_type + " under the desklamp.";
      case Family::kClean:
        return "put a clean " + s_.target_type + " in " + s_.target_rec + ".";
      case Family::kHeat:
        return "put a hot " + s_.target_type + " in " + s_.target_rec + ".";
      case Family::kCool:
        return "put a cool " + s_.target_type + " in " + s_.target_rec + ".";
      case Family::kPickTwo:
        return "put two " + s_.target_type + " in " + s_.target_rec + ".";
    }
    return {};
  }

  std::string initial_observation() const {
    std::string obs = "you are in the middle of a room. looking quickly around you, you see " +
                      list_with_articles(s_.locations) + ".";
    std::vector<std::string> notices;
    for (const auto& loc : s_.locations) {
      for (const auto& o : s_.contents.at(loc)) {
        if (o != kLamp) notices.push_back(o + " on " + loc);
      }
    }
    if (!notices.empty()) obs += " you notice " + list_with_articles(notices) + ".";
    return obs;
  }

  std::string describe(const std::string& loc) const {
    if (!is_regular(loc)) return "the " + loc + " is ready.";
    const auto& c = s_.contents.at(loc);
    if (c.empty()) return "on the " + loc + ", you see nothing.";
    return "on the " + loc + ", you see " + list_with_articles(c) + ".";
  }

  std::string apply(const std::string& action) {
    if (action.starts_with("go to ")) {
      s_.location = action.substr(6);
      return "you arrive at " + s_.location + ". " + describe(s_.location);
    }
    if (action.starts_with("take ")) {
      const auto from = action.find(" from ");
      const std::string obj = action.substr(5, from - 5);
      auto& c = s_.contents[s_.location];
      c.erase(std::find(c.begin(), c.end(), obj));
      s_.holding = obj;
      return "you pick up the " + obj + " from the " + s_.location + ".";
    }
    if (action.starts_with("put ")) {
      const std::string obj = s_.holding;
      s_.contents[s_.location].push_back(obj);
      s_.holding.clear();
      return "you put the " + obj + " in the " + s_.location + ".";
    }
    if (action.starts_with("use ")) {
      if (!s_.holding.empty() && is_target(s_.holding)) s_.lamp_on_with_target = true;
      return "you turn on the " + std::string(kLamp) + ".";
    }
    const std::string obj = s_.holding;
    if (action.starts_with("clean ")) {
      s_.cleaned.insert(obj);
      return "you clean the " + obj + " using the " + std::string(kSink) + ".";
    }
    if (action.starts_with("heat ")) {
      s_.heated.insert(obj);
      return "you heat the " + obj + " using the " + std::string(kMicrowave) + ".";
    }
    s_.cooled.insert(obj);
    return "you cool the " + obj + " using the " + std::string(kFridge) + ".";
  }

  bool is_target(const std::string& obj) const {
    return type_of(obj) == s_.target_type;
  }

  std::string_view appliance() const {
    switch (s_.family) {
      case Family::kClean: return kSink;
      case Family::kHeat: return kMicrowave;
      default: return kFridge;
    }
  }
  std::string_view verb() const {
    switch (s_.family) {
      case Family::kClean: return "clean";
      case Family::kHeat: return "heat";
      default: return "cool";
    }
  }

  bool treated(const std::string& obj) const {
    switch (s_.family) {
      case Family::kClean: return s_.cleaned.contains(obj);
      case Family::kHeat: return s_.heated.contains(obj);
      case Family::kCool: return s_.cooled.contains(obj);
      default: return true;
    }
  }
  bool needs_treatment(const std::string& obj) const { return !treated(obj); }

  int placed_targets() const {
    if (s_.target_rec.empty()) return 0;
    int n = 0;
    for (const auto& o : s_.contents.at(s_.target_rec)) {
      if (is_target(o) && treated(o)) ++n;
    }
    return n;
  }

  bool goal_reached() const {
    if (s_.family == Family::kExamine) return s_.lamp_on_with_target;
    const int needed = s_.family == Family::kPickTwo ? 2 : 1;
    return placed_targets() >= needed;
  }

  // First target object not already satisfied, with where it lies.
  std::pair<std::string, std::string> next_target() const {
    for (const auto& loc : s_.locations) {
      if (!is_regular(loc)) continue;
      for (const auto& o : s_.contents.at(loc)) {
        if (!is_target(o)) continue;
        if (loc == s_.target_rec && treated(o)) continue;
        return {o, loc};
      }
    }
    return {};
  }

  HouseState s_;
};

}  // namespace

int gridhouse_num_tasks() { return kNumFamilies * 40; }

std::unique_ptr<TextEnv> make_gridhouse() { return std::make_unique<GridHouse>(); }

std::vector<std::string> gridhouse_lexicon() {
  std::vector<std::string> words;
  auto add = [&](std::string_view text) {
    for (auto& t : lex(text)) words.push_back(std::move(t));
  };
  for (auto r : kRegular) add(r);
  for (auto o : kObjectTypes) add(o);
  for (auto f : kFamilyNames) add(f);
  add(kSink);
  add(kMicrowave);
  add(kFridge);
  add(kLamp);
  add(kNothingHappened);
  add("2 3");
  add("put a clean hot cool two in look at under the desklamp.");
  add("you are in the middle of a room. looking quickly around you, you see nothing.");
  add("you notice on arrive at is ready. pick up from put clean using heat cool turn");
  add("go to take use with");
  add("the can goes is not needed.");
  return words;
}

}  // namespace copolab::detail
