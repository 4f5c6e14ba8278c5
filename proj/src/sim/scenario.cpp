#include "eyedrive/sim/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "eyedrive/errors.hpp"

namespace eyedrive::sim {

namespace {

[[noreturn]] void fail(const YAML::Node& at, const std::string& what) {
  throw ConfigError("scenario line " + std::to_string(at.Mark().line + 1) + ": " + what);
}

void expect_map(const YAML::Node& n, const std::string& what, std::initializer_list<std::string_view> allowed) {
  if (!n.IsMap()) fail(n, what + " must be a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      fail(kv.first, "unknown key '" + key + "' in " + what);
    }
  }
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& what) {
  if (!n.IsScalar()) fail(n, what + " must be a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(n, what + " has the wrong type");
  }
}

template <typename T>
T required(const YAML::Node& map, const char* key, const std::string& what) {
  const YAML::Node n = map[key];
  if (!n) fail(map, what + " needs '" + key + "'");
  return scalar<T>(n, what + "." + key);
}

double finite(const YAML::Node& map, const char* key, const std::string& what) {
  const double v = required<double>(map, key, what);
  if (!std::isfinite(v)) fail(map[key], what + "." + key + " must be finite");
  return v;
}

std::int64_t non_negative_ms(const YAML::Node& map, const char* key, const std::string& what) {
  const auto v = required<std::int64_t>(map, key, what);
  if (v < 0) fail(map[key], what + "." + key + " must be non-negative");
  return v;
}

const YAML::Node& sequence(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence()) fail(n, what + " must be a list");
  return n;
}

void parse_world(const YAML::Node& n, World& w) {
  expect_map(n, "world", {"bounds", "circles", "segments"});
  if (const auto b = n["bounds"]) {
    if (!b.IsSequence() || b.size() != 4) fail(b, "world.bounds must be [xmin, ymin, xmax, ymax]");
    w.bounds.min = {scalar<double>(b[0], "bound"), scalar<double>(b[1], "bound")};
    w.bounds.max = {scalar<double>(b[2], "bound"), scalar<double>(b[3], "bound")};
    if (!(w.bounds.max.x > w.bounds.min.x && w.bounds.max.y > w.bounds.min.y)) fail(b, "world.bounds are empty");
  }
  if (const auto cs = n["circles"]) {
    for (const auto& c : sequence(cs, "world.circles")) {
      expect_map(c, "circle", {"x", "y", "r"});
      Circle circle{{finite(c, "x", "circle"), finite(c, "y", "circle")}, finite(c, "r", "circle")};
      if (!(circle.radius > 0.0)) fail(c, "circle.r must be positive");
      w.circles.push_back(circle);
    }
  }
  if (const auto ss = n["segments"]) {
    for (const auto& s : sequence(ss, "world.segments")) {
      expect_map(s, "segment", {"x1", "y1", "x2", "y2"});
      Segment seg{{finite(s, "x1", "segment"), finite(s, "y1", "segment")},
                  {finite(s, "x2", "segment"), finite(s, "y2", "segment")}};
      if (seg.a == seg.b) fail(s, "segment has zero length");
      w.segments.push_back(seg);
    }
  }
}

}  // namespace

std::size_t Scenario::gaze_frames() const {
  std::size_t n = 0;
  for (const auto& r : gaze) n += r.frames;
  return n;
}

std::int64_t Scenario::end_ms(const SimConfig& config) const {
  if (duration_ms) return *duration_ms;
  std::int64_t last = 0;
  if (!gaze.empty()) {
    const auto frames = static_cast<std::int64_t>(gaze_frames());
    last = std::max(last, gaze_start_ms + (frames * config.frame_period_us() + 999) / 1000);
  }
  for (const auto& w : relay) last = std::max(last, w.t_ms);
  for (const auto& o : outages) last = std::max(last, o.to_ms);
  return last + 3000;
}

void Scenario::validate() const {
  world.validate(start.position());
  for (const auto& o : outages) {
    if (o.to_ms < o.from_ms) throw ConfigError("outage ends before it starts");
  }
  if (duration_ms && *duration_ms < 0) throw ConfigError("duration_ms must be non-negative");
}

SimConfig Scenario::configure(SimConfig base) const {
  for (const auto& [name, text] : config) set_field(base, name, text);
  base.validate();
  return base;
}

Scenario parse_scenario(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError("scenario line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  Scenario sc;
  if (!root || root.IsNull()) return sc;
  expect_map(root, "scenario", {"duration_ms", "world", "start", "gaze", "relay", "outages", "config"});

  if (const auto d = root["duration_ms"]) sc.duration_ms = non_negative_ms(root, "duration_ms", "scenario");
  if (const auto w = root["world"]) parse_world(w, sc.world);
  if (const auto s = root["start"]) {
    expect_map(s, "start", {"x", "y", "heading_deg"});
    if (s["x"]) sc.start.x = finite(s, "x", "start");
    if (s["y"]) sc.start.y = finite(s, "y", "start");
    if (s["heading_deg"]) sc.start.heading = wrap_angle(finite(s, "heading_deg", "start") * std::numbers::pi / 180.0);
  }
  if (const auto g = root["gaze"]) {
    expect_map(g, "gaze", {"start_ms", "runs"});
    if (g["start_ms"]) sc.gaze_start_ms = non_negative_ms(g, "start_ms", "gaze");
    if (const auto runs = g["runs"]) {
      for (const auto& r : sequence(runs, "gaze.runs")) {
        expect_map(r, "gaze run", {"class", "frames"});
        const auto name = required<std::string>(r, "class", "gaze run");
        const auto cls = gaze::parse_gaze_class(name);
        if (!cls) fail(r["class"], "unknown gaze class '" + name + "'");
        const auto frames = required<std::int64_t>(r, "frames", "gaze run");
        if (frames < 0) fail(r["frames"], "gaze run frames must be non-negative");
        sc.gaze.push_back({*cls, static_cast<std::size_t>(frames)});
      }
    }
  }
  if (const auto rs = root["relay"]) {
    for (const auto& w : sequence(rs, "relay")) {
      expect_map(w, "relay write", {"t_ms", "key", "value"});
      sc.relay.push_back({non_negative_ms(w, "t_ms", "relay write"), required<std::string>(w, "key", "relay write"),
                          required<std::string>(w, "value", "relay write")});
    }
    std::stable_sort(sc.relay.begin(), sc.relay.end(),
                     [](const ScriptedWrite& a, const ScriptedWrite& b) { return a.t_ms < b.t_ms; });
  }
  if (const auto os = root["outages"]) {
    for (const auto& o : sequence(os, "outages")) {
      expect_map(o, "outage", {"from_ms", "to_ms"});
      const Outage out{non_negative_ms(o, "from_ms", "outage"), non_negative_ms(o, "to_ms", "outage")};
      if (out.to_ms < out.from_ms) fail(o, "outage ends before it starts");
      sc.outages.push_back(out);
    }
  }
  if (const auto c = root["config"]) {
    if (!c.IsMap()) fail(c, "config must be a mapping");
    SimConfig probe;
    for (const auto& kv : c) {
      const auto name = kv.first.as<std::string>();
      const auto value = scalar<std::string>(kv.second, "config." + name);
      try {
        set_field(probe, name, value);
      } catch (const ConfigError& e) {
        fail(kv.first, e.what());
      }
      sc.config.emplace_back(name, value);
    }
  }
  try {
    sc.validate();
  } catch (const ConfigError& e) {
    fail(root, e.what());
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read scenario " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace eyedrive::sim
