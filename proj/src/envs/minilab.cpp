#include "envs_internal.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <map>

#include "copolab/error.hpp"
#include "copolab/random.hpp"

namespace copolab::detail {

namespace {

constexpr std::array<std::string_view, 9> kRooms{
    "hallway", "kitchen", "greenhouse", "workshop", "bedroom",
    "studio",  "bathroom", "outside",   "foundry"};

constexpr std::array<std::pair<std::string_view, std::string_view>, 9> kDoors{{
    {"hallway", "kitchen"},
    {"hallway", "greenhouse"},
    {"hallway", "workshop"},
    {"hallway", "bedroom"},
    {"hallway", "studio"},
    {"kitchen", "bathroom"},
    {"kitchen", "outside"},
    {"greenhouse", "outside"},
    {"outside", "foundry"},
}};

const std::map<std::string_view, std::vector<std::string_view>>& scenery() {
  static const std::map<std::string_view, std::vector<std::string_view>> k{
      {"hallway", {"picture"}},
      {"kitchen", {"stove", "sink", "table"}},
      {"greenhouse", {"flower pot", "shovel"}},
      {"workshop", {"table", "wire"}},
      {"bedroom", {"bed", "closet"}},
      {"studio", {"easel", "red paint", "blue paint"}},
      {"bathroom", {"toilet", "bathtub"}},
      {"outside", {"tree", "fire pit"}},
      {"foundry", {"furnace"}},
  };
  return k;
}

constexpr std::array<std::string_view, 9> kTypeNames{
    "find-living-thing", "power-device", "grow-plant",
    "measure-temperature", "boil-substance", "test-conductivity",
    "plant-life-cycle", "melt-metal", "melting-point"};

constexpr std::array<std::string_view, 4> kLiquids{"water", "milk", "juice", "oil"};
constexpr std::array<std::string_view, 4> kAnimals{"frog", "turtle", "bee", "moth"};
constexpr std::array<std::string_view, 4> kDevices{"lamp", "fan", "buzzer", "motor"};
constexpr std::array<std::string_view, 4> kPlants{"bean", "pea", "sunflower", "lily"};
constexpr std::array<std::string_view, 4> kColors{"red", "green", "blue", "orange"};
constexpr std::array<std::string_view, 4> kMaterials{"nail", "spoon", "eraser", "coin"};
constexpr std::array<std::string_view, 4> kMetals{"tin", "lead", "zinc", "copper"};
constexpr std::array<std::string_view, 4> kSolids{"ice", "butter", "wax", "chocolate"};

constexpr int kVariants = 4;

struct Stage {
  std::string room;
  std::string action;
  std::string response;
  std::string pickup;  // object moved to the inventory, if any
};

std::string response_for(const std::string& action) {
  if (action == "wait") return "time passes.";
  if (action.starts_with("pick up ")) {
    return "you move the " + action.substr(8) + " to the inventory.";
  }
  if (action.starts_with("focus on ")) return "you focus on the " + action.substr(9) + ".";
  if (action.starts_with("use thermometer on ")) {
    return "the thermometer reads the " + action.substr(19) + ".";
  }
  if (action.starts_with("activate ")) {
    return "the " + action.substr(9) + " is now activated.";
  }
  if (action.starts_with("water ")) return "you water the " + action.substr(6) + ".";
  if (action.starts_with("connect ")) {
    return "the " + action.substr(8) + " is now connected.";
  }
  if (action.starts_with("move ")) return "you " + action + ".";
  if (action.starts_with("mix ")) return "you mix the " + action.substr(4) + ".";
  return "done.";
}

struct LabState {
  int type = 0;
  std::string instruction;
  std::vector<Stage> stages;
  std::size_t next_stage = 0;
  std::string room = "hallway";
  std::map<std::string, bool> door_open;  // key "a|b" with a < b
  std::vector<std::string> inventory;
  std::map<std::string, std::vector<std::string>> placed;  // pickup objects
};

std::string door_key(std::string_view a, std::string_view b) {
  return a < b ? std::string(a) + "|" + std::string(b)
               : std::string(b) + "|" + std::string(a);
}

class MiniLab final : public TextEnv {
 public:
  ResetResult reset(const EnvSpec& spec) override {
    if (spec.task_id < 0 || spec.task_id >= minilab_num_tasks()) {
      throw UnknownTask("MiniLab task " + std::to_string(spec.task_id));
    }
    spec_ = spec;
    step_counter_ = 0;
    done_ = false;
    success_ = false;
    score_ = 0.0;
    s_ = LabState{};
    s_.type = spec.task_id % 9;
    const std::size_t v = static_cast<std::size_t>(spec.task_id / 9) % kVariants;
    Rng rng(mix_seed(spec.seed, 0x6d696e696cULL + static_cast<std::uint64_t>(spec.task_id)));
    for (auto [a, b] : kDoors) s_.door_open[door_key(a, b)] = rng.uniform() < 0.5;
    build_stages(v, rng);
    ResetResult out;
    out.instruction = s_.instruction;
    out.observation = describe_room();
    out.admissible_actions = admissible_actions();
    return out;
  }

  StepOutcome step(std::string_view action_view) override {
    if (done_) throw EpisodeFinished("MiniLab episode already finished");
    const std::string action(action_view);
    ++step_counter_;
    StepOutcome out;
    const auto adm = admissible_actions();
    if (std::find(adm.begin(), adm.end(), action) == adm.end()) {
      out.observation = std::string(kNoKnownAction);
    } else {
      out.observation = apply(action);
    }
    score_ = score_of(s_.next_stage);
    success_ = s_.next_stage == s_.stages.size();
    done_ = success_ || step_counter_ >= spec_.max_steps;
    out.done = done_;
    out.success = success_;
    out.score = score_;
    if (!done_) out.admissible_actions = admissible_actions();
    return out;
  }

  std::string oracle_action() const override {
    if (done_) throw EpisodeFinished("MiniLab oracle called after done");
    if (s_.next_stage >= s_.stages.size()) throw NoSolution("MiniLab: no stage left");
    const Stage& st = s_.stages[s_.next_stage];
    if (st.room == s_.room) return st.action;
    const std::string next = next_room_towards(st.room);
    if (!s_.door_open.at(door_key(s_.room, next))) return "open door to " + next;
    return "go to " + next;
  }

  ThinkFacts facts() const override {
    ThinkFacts f;
    f.location = "the " + s_.room;
    if (s_.inventory.empty()) {
      f.holding = "nothing";
    } else {
      f.holding.clear();
      for (std::size_t i = 0; i < s_.inventory.size(); ++i) {
        if (i > 0) f.holding += " and ";
        f.holding += "the " + s_.inventory[i];
      }
    }
    if (done_) return f;
    f.oracle_action = oracle_action();
    const Stage& st = s_.stages[s_.next_stage];
    f.key_fact = "the next goal is to " + st.action + " in the " + st.room + ".";
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
    std::vector<std::string> out{"look around", "inventory", "wait"};
    for (auto [a, b] : kDoors) {
      std::string other;
      if (a == s_.room) other = b;
      else if (b == s_.room) other = a;
      else continue;
      if (s_.door_open.at(door_key(a, b))) out.push_back("go to " + other);
      else out.push_back("open door to " + other);
    }
    if (s_.next_stage < s_.stages.size()) {
      const Stage& st = s_.stages[s_.next_stage];
      if (st.room == s_.room && st.action != "wait") out.push_back(st.action);
    }
    return out;
  }

  std::unique_ptr<TextEnv> clone() const override {
    return std::make_unique<MiniLab>(*this);
  }

  EnvId id() const override { return EnvId::kMiniLab; }
  std::string category() const override {
    return std::string(kTypeNames[static_cast<std::size_t>(s_.type)]);
  }
  bool lists_actions() const override { return false; }

 private:
  static std::string pick(Rng& rng, std::initializer_list<std::string_view> rooms) {
    const auto i = rng.index(rooms.size());
    return std::string(*(rooms.begin() + static_cast<std::ptrdiff_t>(i)));
  }

  void add(const std::string& room, const std::string& action) {
    Stage st;
    st.room = room;
    st.action = action;
    st.response = response_for(action);
    if (action.starts_with("pick up ")) {
      st.pickup = action.substr(8);
      s_.placed[room].push_back(st.pickup);
    }
    s_.stages.push_back(std::move(st));
  }
  void add_waits(const std::string& room, int n) {
    for (int i = 0; i < n; ++i) add(room, "wait");
  }

  void build_stages(std::size_t v, Rng& rng) {
    const std::string liquid(kLiquids[v]);
    const std::string animal(kAnimals[v]);
    const std::string device(kDevices[v]);
    const std::string plant(kPlants[v]);
    const std::string color(kColors[v]);
    const std::string material(kMaterials[v]);
    const std::string metal(kMetals[v]);
    const std::string solid(kSolids[v]);
    switch (s_.type) {
      case 0: {
        s_.instruction = "your task is to find a living thing and move it to the " + color + " box.";
        const auto where = pick(rng, {"outside", "greenhouse"});
        const auto box = pick(rng, {"hallway", "workshop", "bedroom"});
        add(where, "focus on " + animal);
        add(where, "pick up " + animal);
        add(box, "move " + animal + " to " + color + " box");
        break;
      }
      case 1: {
        s_.instruction = "your task is to turn on the " + device + ".";
        const auto bat = pick(rng, {"workshop", "bedroom", "kitchen"});
        const auto dev = pick(rng, {"workshop", "studio"});
        add(bat, "pick up battery");
        add(dev, "connect battery to " + device);
        add(dev, "activate " + device);
        add(dev, "focus on " + device);
        break;
      }
      case 2: {
        s_.instruction = "your task is to grow a " + plant + " plant.";
        const auto seed_room = pick(rng, {"kitchen", "bedroom", "workshop"});
        add(seed_room, "pick up " + plant + " seed");
        add("greenhouse", "move " + plant + " seed to flower pot");
        add("greenhouse", "water flower pot");
        add_waits("greenhouse", 18);
        add("greenhouse", "focus on " + plant + " plant");
        break;
      }
      case 3: {
        s_.instruction = "your task is to measure the temperature of the " + liquid + ".";
        const auto therm = pick(rng, {"kitchen", "workshop", "bedroom"});
        const auto sub = pick(rng, {"kitchen", "bathroom", "studio"});
        add(therm, "pick up thermometer");
        add(sub, "focus on " + liquid);
        add(sub, "use thermometer on " + liquid);
        break;
      }
      case 4: {
        s_.instruction = "your task is to boil the " + liquid + ".";
        const auto pot_room = pick(rng, {"kitchen", "workshop", "bedroom"});
        const auto sub = pick(rng, {"kitchen", "bathroom"});
        add(pot_room, "pick up pot");
        add(sub, "move " + liquid + " to pot");
        add("kitchen", "move pot to stove");
        add("kitchen", "activate stove");
        add_waits("kitchen", 16);
        add("kitchen", "focus on steam");
        break;
      }
      case 5: {
        s_.instruction = "your task is to test if the " + material + " conducts electricity.";
        const auto bat = pick(rng, {"bedroom", "kitchen", "studio"});
        const auto mat = pick(rng, {"kitchen", "bedroom", "bathroom"});
        add(bat, "pick up battery");
        add(mat, "pick up " + material);
        add("workshop", "connect battery to wire");
        add("workshop", "connect wire to " + material);
        add("workshop", "connect " + material + " to lamp");
        add("workshop", "activate lamp");
        add_waits("workshop", 12);
        add("workshop", "focus on lamp");
        add("workshop", "move " + material + " to " + color + " box");
        add("workshop", "focus on " + color + " box");
        break;
      }
      case 6: {
        s_.instruction = "your task is to observe the life cycle of a " + plant + " plant.";
        const auto seed_room = pick(rng, {"kitchen", "bedroom", "workshop"});
        add(seed_room, "pick up " + plant + " seed");
        add("greenhouse", "move " + plant + " seed to flower pot");
        add("greenhouse", "water flower pot");
        add_waits("greenhouse", 15);
        add("greenhouse", "water flower pot");
        add_waits("greenhouse", 15);
        add("greenhouse", "focus on " + plant + " flower");
        add_waits("greenhouse", 15);
        add("greenhouse", "focus on " + plant + " fruit");
        break;
      }
      case 7: {
        s_.instruction = "your task is to melt the " + metal + " in the foundry.";
        const auto therm = pick(rng, {"kitchen", "workshop", "bedroom"});
        const auto met = pick(rng, {"workshop", "outside"});
        add(therm, "pick up thermometer");
        add(met, "pick up " + metal);
        add("foundry", "move " + metal + " to furnace");
        add("foundry", "activate furnace");
        add_waits("foundry", 46);
        add("foundry", "use thermometer on " + metal);
        add("foundry", "focus on liquid " + metal);
        break;
      }
      case 8: {
        s_.instruction = "your task is to measure the melting point of the " + solid + ".";
        const auto therm = pick(rng, {"workshop", "bedroom"});
        const auto sol = pick(rng, {"kitchen", "bathroom", "bedroom"});
        add(therm, "pick up thermometer");
        add(sol, "pick up " + solid);
        add("kitchen", "pick up pot");
        add("kitchen", "move " + solid + " to pot");
        add("kitchen", "move pot to stove");
        add("kitchen", "activate stove");
        for (int i = 0; i < 9; ++i) {
          add("kitchen", "use thermometer on " + solid);
          add_waits("kitchen", 4);
        }
        add("kitchen", "focus on liquid " + solid);
        break;
      }
      default:
        break;
    }
  }

  double score_of(std::size_t completed) const {
    const auto n = s_.stages.size();
    // Integer rubric: stage i is worth floor(100(i+1)/n) - floor(100 i/n).
    const auto points = (100 * completed) / n;
    return static_cast<double>(points) / 100.0;
  }

  std::string describe_room() const {
    std::string out = "this room is called the " + s_.room + ". in it, you see:";
    std::vector<std::string> things;
    for (auto t : scenery().at(s_.room)) things.emplace_back(t);
    if (auto it = s_.placed.find(s_.room); it != s_.placed.end()) {
      for (const auto& o : it->second) things.push_back(o);
    }
    for (std::size_t i = 0; i < things.size(); ++i) {
      out += (i == 0 ? " a " : ", a ") + things[i];
    }
    out += ". you also see:";
    bool first = true;
    for (auto [a, b] : kDoors) {
      std::string other;
      if (a == s_.room) other = b;
      else if (b == s_.room) other = a;
      else continue;
      out += first ? " " : ", ";
      first = false;
      out += "a door to the " + other + " that is " +
             (s_.door_open.at(door_key(a, b)) ? "open" : "closed");
    }
    out += ".";
    return out;
  }

  std::string apply(const std::string& action) {
    if (action == "look around") return describe_room();
    if (action == "inventory") {
      if (s_.inventory.empty()) return "your inventory is empty.";
      std::string out = "in your inventory, you see:";
      for (std::size_t i = 0; i < s_.inventory.size(); ++i) {
        out += (i == 0 ? " a " : ", a ") + s_.inventory[i];
      }
      return out + ".";
    }
    if (action.starts_with("open door to ")) {
      s_.door_open[door_key(s_.room, action.substr(13))] = true;
      return "the door is now open.";
    }
    if (action.starts_with("go to ")) {
      s_.room = action.substr(6);
      return "you move to the " + s_.room + ". " + describe_room();
    }
    if (s_.next_stage < s_.stages.size()) {
      const Stage& st = s_.stages[s_.next_stage];
      if (st.action == action && st.room == s_.room) {
        if (!st.pickup.empty()) {
          auto& here = s_.placed[s_.room];
          here.erase(std::find(here.begin(), here.end(), st.pickup));
          s_.inventory.push_back(st.pickup);
        }
        ++s_.next_stage;
        return st.response;
      }
    }
    return "time passes.";  // a wait outside a waiting stage
  }

  std::string next_room_towards(const std::string& goal) const {
    // Breadth-first search over doors, ignoring whether they are open.
    std::map<std::string, std::string> parent;
    std::deque<std::string> frontier{s_.room};
    parent[s_.room] = s_.room;
    while (!frontier.empty()) {
      const auto cur = frontier.front();
      frontier.pop_front();
      if (cur == goal) break;
      for (auto [a, b] : kDoors) {
        std::string nxt;
        if (a == cur) nxt = b;
        else if (b == cur) nxt = a;
        else continue;
        if (!parent.contains(nxt)) {
          parent[nxt] = cur;
          frontier.push_back(nxt);
        }
      }
    }
    std::string step = goal;
    while (parent.at(step) != s_.room) step = parent.at(step);
    return step;
  }

  LabState s_;
};

}  // namespace

int minilab_num_tasks() { return 9 * kVariants; }

std::unique_ptr<TextEnv> make_minilab() { return std::make_unique<MiniLab>(); }

std::vector<std::string> minilab_lexicon() {
  std::vector<std::string> words;
  auto add = [&](std::string_view text) {
    for (auto& t : lex(text)) words.push_back(std::move(t));
  };
  for (auto r : kRooms) add(r);
  for (const auto& [room, things] : scenery()) {
    for (auto t : things) add(t);
  }
  for (auto n : kTypeNames) add(n);
  for (const auto* arr : {&kLiquids, &kAnimals, &kDevices, &kPlants, &kColors,
                          &kMaterials, &kMetals, &kSolids}) {
    for (auto w : *arr) add(w);
  }
  add(kNoKnownAction);
  add("your task is to find a living thing and move it to the box. turn on grow plant");
  add("measure temperature of boil test if conducts electricity observe life cycle");
  add("melt in foundry melting point");
  add("pick up battery thermometer seed pot focus on use connect activate water");
  add("move wire lamp stove steam flower fruit liquid furnace wait look around inventory");
  add("time passes. you the to inventory. reads now activated connected. mix done.");
  add("this room is called in it, you see: a also door that open closed.");
  add("your inventory is empty. in your inventory, you see: the door is now open.");
  add("you move to the and nothing next goal");
  return words;
}

}  // namespace copolab::detail
