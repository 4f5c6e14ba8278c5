#include "eyedrive/harness/run_config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>
#include <variant>

#include "eyedrive/errors.hpp"

namespace eyedrive::harness {

namespace {

using json = nlohmann::json;
using CountRef = std::uint64_t& (*)(RunConfig&);
using RealRef = double& (*)(RunConfig&);
using TextRef = std::string& (*)(RunConfig&);

struct Field {
  std::string_view group;
  std::string_view name;
  std::variant<CountRef, RealRef, TextRef> ref;
  double min = 0.0;
  double max = 0.0;
};

constexpr double kAnySeed = static_cast<double>(std::numeric_limits<std::uint64_t>::max());

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"seeds", "corpus", CountRef{[](RunConfig& c) -> std::uint64_t& { return c.seeds.corpus; }}, 0, kAnySeed},
      {"seeds", "split", CountRef{[](RunConfig& c) -> std::uint64_t& { return c.seeds.split; }}, 0, kAnySeed},
      {"seeds", "net", CountRef{[](RunConfig& c) -> std::uint64_t& { return c.seeds.net; }}, 0, kAnySeed},
      {"seeds", "train", CountRef{[](RunConfig& c) -> std::uint64_t& { return c.seeds.train; }}, 0, kAnySeed},
      {"seeds", "world", CountRef{[](RunConfig& c) -> std::uint64_t& { return c.seeds.world; }}, 0, kAnySeed},
      {"data", "images", CountRef{[](RunConfig& c) -> std::size_t& { return c.images; }}, 5, 1e6},
      {"data", "extent", CountRef{[](RunConfig& c) -> std::size_t& { return c.extent; }}, 16, 512},
      {"data", "val_fraction", RealRef{[](RunConfig& c) -> double& { return c.val_fraction; }}, 0.01, 0.99},
      {"train", "epochs", CountRef{[](RunConfig& c) -> std::size_t& { return c.epochs; }}, 1, 1000},
      {"train", "batch_size", CountRef{[](RunConfig& c) -> std::size_t& { return c.batch_size; }}, 1, 4096},
      {"train", "learning_rate", RealRef{[](RunConfig& c) -> double& { return c.learning_rate; }}, 1e-6, 1},
      {"bench", "frames", CountRef{[](RunConfig& c) -> std::size_t& { return c.bench_frames; }}, 500, 1e7},
      {"paths", "data", TextRef{[](RunConfig& c) -> std::string& { return c.data_dir; }}, 0, 0},
      {"paths", "weights", TextRef{[](RunConfig& c) -> std::string& { return c.weights; }}, 0, 0},
      {"paths", "out", TextRef{[](RunConfig& c) -> std::string& { return c.out_dir; }}, 0, 0},
  };
  return table;
}

std::string dotted(const Field& f) { return std::string(f.group) + "." + std::string(f.name); }

const Field* find_field(std::string_view group, std::string_view name) {
  for (const auto& f : fields()) {
    if (f.group == group && f.name == name) return &f;
  }
  return nullptr;
}

void assign(RunConfig& c, const Field& f, const json& value) {
  const std::string key = dotted(f);
  std::visit(
      [&](auto ref) {
        using T = std::remove_reference_t<decltype(ref(c))>;
        if constexpr (std::is_same_v<T, std::uint64_t>) {
          if (!value.is_number_unsigned()) throw ConfigError(key + " must be a non-negative integer");
        } else if constexpr (std::is_same_v<T, double>) {
          if (!value.is_number()) throw ConfigError(key + " must be a number");
        } else {
          if (!value.is_string()) throw ConfigError(key + " must be a string");
        }
        ref(c) = value.get<T>();
      },
      f.ref);
}

json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Map: {
      json j = json::object();
      for (const auto& kv : node) j[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return j;
    }
    case YAML::NodeType::Sequence: {
      json j = json::array();
      for (const auto& item : node) j.push_back(yaml_to_json(item));
      return j;
    }
    case YAML::NodeType::Scalar: {
      const std::string& s = node.Scalar();
      if (node.Tag() == "!") return s;  // quoted
      if (s == "true") return true;
      if (s == "false") return false;
      const char* end = s.data() + s.size();
      std::uint64_t u = 0;
      if (auto r = std::from_chars(s.data(), end, u); r.ec == std::errc() && r.ptr == end) return u;
      std::int64_t i = 0;
      if (auto r = std::from_chars(s.data(), end, i); r.ec == std::errc() && r.ptr == end) return i;
      double d = 0.0;
      if (auto r = std::from_chars(s.data(), end, d); r.ec == std::errc() && r.ptr == end) return d;
      return s;
    }
    default:
      throw ConfigError("line " + std::to_string(node.Mark().line + 1) + ": empty value");
  }
}

}  // namespace

void RunConfig::reseed(std::uint64_t base) {
  seeds = {base, base + 1, base + 2, base + 3, base + 4};
}

std::filesystem::path RunConfig::weights_path() const {
  if (!weights.empty()) return weights;
  return std::filesystem::path(out_dir) / "weights.gznn";
}

void RunConfig::validate() const {
  auto& self = const_cast<RunConfig&>(*this);
  for (const auto& f : fields()) {
    std::visit(
        [&](auto ref) {
          using T = std::remove_reference_t<decltype(ref(self))>;
          if constexpr (std::is_same_v<T, std::string>) {
            if (f.name != "weights" && ref(self).empty()) throw ConfigError(dotted(f) + " must not be empty");
          } else {
            const auto v = static_cast<double>(ref(self));
            if (!(v >= f.min && v <= f.max)) {
              std::ostringstream msg;
              msg << dotted(f) << " = " << ref(self) << " is outside [" << f.min << ", " << f.max << "]";
              throw ConfigError(msg.str());
            }
          }
        },
        f.ref);
  }
  if (extent % 16 != 0) throw ConfigError("data.extent must be a multiple of 16");
  if (images < 5) throw ConfigError("data.images must cover all five classes");
  sim.validate();
}

json to_json(const RunConfig& c) {
  auto& self = const_cast<RunConfig&>(c);
  json j = json::object();
  for (const auto& f : fields()) {
    std::visit([&](auto ref) { j[std::string(f.group)][std::string(f.name)] = ref(self); }, f.ref);
  }
  j["sim"] = sim::to_json(c.sim);
  return j;
}

void apply_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a mapping");
  for (const auto& [group, body] : j.items()) {
    if (group == "sim") {
      sim::apply_json(c.sim, body);
      continue;
    }
    if (!body.is_object()) throw ConfigError("config section '" + group + "' must be a mapping");
    for (const auto& [name, value] : body.items()) {
      const Field* f = find_field(group, name);
      if (f == nullptr) throw ConfigError("unknown config key '" + group + "." + name + "'");
      assign(c, *f, value);
    }
  }
}

void set_field(RunConfig& c, std::string_view name, std::string_view text) {
  const auto dot = name.find('.');
  if (dot == std::string_view::npos) throw ConfigError("config key '" + std::string(name) + "' needs a section");
  const std::string_view group = name.substr(0, dot);
  const std::string_view key = name.substr(dot + 1);
  if (group == "sim") {
    sim::set_field(c.sim, key, text);
    return;
  }
  const Field* f = find_field(group, key);
  if (f == nullptr) throw ConfigError("unknown config key '" + std::string(name) + "'");
  std::visit(
      [&](auto ref) {
        using T = std::remove_reference_t<decltype(ref(c))>;
        if constexpr (std::is_same_v<T, std::string>) {
          ref(c) = std::string(text);
        } else {
          T v{};
          const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
          if (ec != std::errc() || ptr != text.data() + text.size()) {
            throw ConfigError(std::string(name) +
                              (std::is_same_v<T, double> ? " must be a number" : " must be a non-negative integer"));
          }
          ref(c) = v;
        }
      },
      f->ref);
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  YAML::Node root;
  try {
    root = YAML::Load(in);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("config " + path.string() + " line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (root.IsNull()) return base;
  try {
    apply_json(base, yaml_to_json(root));
  } catch (const ConfigError& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return base;
}

void write_run_config(const RunConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "run_config.json");
  out << to_json(c).dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (dir / "run_config.json").string());
}

void apply_overrides(RunConfig& c, const Overrides& overrides) {
  for (const auto& [name, text] : overrides) set_field(c, name, text);
}

}  // namespace eyedrive::harness
