#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "eyedrive/errors.hpp"
#include "eyedrive/relay/client.hpp"
#include "eyedrive/relay/gateway_codec.hpp"
#include "eyedrive/relay/protocol.hpp"
#include "eyedrive/relay/select.hpp"
#include "eyedrive/relay/server.hpp"
#include "eyedrive/relay/store.hpp"
#include "eyedrive/rng.hpp"
#include "json.hpp"

using namespace eyedrive;
using namespace eyedrive::relay;
using namespace std::chrono_literals;

namespace {

Request req(const std::string& line) {
  auto parsed = parse_request(line);
  REQUIRE(std::holds_alternative<Request>(parsed));
  return std::get<Request>(parsed);
}

std::string reject(const std::string& line) {
  auto parsed = parse_request(line);
  REQUIRE(std::holds_alternative<ProtocolError>(parsed));
  return std::get<ProtocolError>(parsed).reason;
}

template <typename Pred>
bool wait_for(Pred pred, std::chrono::milliseconds limit = 5s) {
  const auto deadline = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(5ms);
  }
  return pred();
}

struct Served {
  Store store;
  RelayServer server;
  explicit Served(ServerOptions opts = {}) : server(store, std::move(opts)) { server.start(); }
  ~Served() { server.stop(); }
  TcpClient client() { return TcpClient("127.0.0.1", server.port()); }
};

ServerOptions with_gateway() {
  ServerOptions o;
  o.gateway_port = 0;
  return o;
}

std::vector<RelayRecord> drain(Client& c, std::size_t n, std::chrono::milliseconds per_event = 5s) {
  std::vector<RelayRecord> out;
  while (out.size() < n) {
    auto e = c.next_event(per_event);
    if (!e) break;
    out.push_back(std::move(*e));
  }
  return out;
}

}  // namespace

TEST_CASE("request lines parse and format symmetrically") {
  CHECK(req("SET Signals Forward") == Request{Verb::kSet, "Signals", "Forward"});
  CHECK(req("SET note two words ") == Request{Verb::kSet, "note", "two words "});
  CHECK(req("SET k ") == Request{Verb::kSet, "k", ""});
  CHECK(req("GET Speed\r") == Request{Verb::kGet, "Speed", ""});
  CHECK(req("SUB telemetry/*") == Request{Verb::kSub, "telemetry/*", ""});
  CHECK(req("SUB *") == Request{Verb::kSub, "*", ""});
  for (const auto& r : {Request{Verb::kSet, "a", "b c"}, Request{Verb::kGet, "x/y", ""},
                        Request{Verb::kSub, "p*", ""}}) {
    CHECK(req(format_request(r)) == r);
  }
}

TEST_CASE("malformed request lines are rejected with a reason") {
  CHECK(reject("PUT a b") == "unknown verb");
  CHECK(reject("get a") == "unknown verb");
  CHECK(reject("") == "unknown verb");
  CHECK(reject("GET") == "missing key");
  CHECK(reject("SET") == "missing key");
  CHECK(reject("SET k") == "missing value");
  CHECK(reject("GET a b") == "unexpected trailing data");
  CHECK(reject("GET a*") == "invalid key");
  CHECK(reject("SUB a*b") == "invalid pattern");
  CHECK(reject("SET k " + std::string(257, 'v')) == "value too long");
  CHECK(reject("GET " + std::string(129, 'k')) == "invalid key");
  CHECK(reject(std::string(kMaxLineBytes + 1, 'x')) == "line too long");
  CHECK(reject("SET k a\rb") == "embedded line break");
  CHECK(std::holds_alternative<Request>(parse_request("SET k " + std::string(256, 'v'))));
}

TEST_CASE("reply lines round-trip") {
  const std::vector<Reply> replies = {Reply::ok(7),
                                      Reply::value_of({"Signals", "Left turn", 3, 0}),
                                      Reply::absent("Speed"),
                                      Reply::event({"telemetry/pose", "1 2 3", 42, 0}),
                                      Reply::error("invalid key")};
  for (const Reply& r : replies) {
    auto parsed = parse_reply(format_reply(r));
    REQUIRE(std::holds_alternative<Reply>(parsed));
    CHECK(std::get<Reply>(parsed) == r);
  }
  CHECK(format_reply(Reply::ok(5)) == "OK 5");
  CHECK(format_reply(Reply::value_of({"k", "v", 2, 0})) == "VALUE k 2 v");
  CHECK(format_reply(Reply::absent("k")) == "ABSENT k");
  CHECK(std::holds_alternative<ProtocolError>(parse_reply("OK x")));
  CHECK(std::holds_alternative<ProtocolError>(parse_reply("EVENT k")));
  CHECK(std::holds_alternative<ProtocolError>(parse_reply("HELLO")));
}

TEST_CASE("gateway messages carry op, key, value and seq") {
  auto parsed = parse_gateway_request(R"({"op":"SET","key":"Override","value":"1"})");
  REQUIRE(std::holds_alternative<Request>(parsed));
  CHECK(std::get<Request>(parsed) == Request{Verb::kSet, "Override", "1"});
  parsed = parse_gateway_request(R"({"op":"SUB","key":"telemetry/*"})");
  REQUIRE(std::holds_alternative<Request>(parsed));
  CHECK(std::get<Request>(parsed).verb == Verb::kSub);

  for (const char* bad : {"not json", "[]", R"({"op":"SET","key":"k"})", R"({"op":"DEL","key":"k"})",
                          R"({"op":"GET","key":7})", R"({"op":"GET","key":"a b"})"}) {
    INFO(bad);
    CHECK(std::holds_alternative<ProtocolError>(parse_gateway_request(bad)));
  }

  const auto j = nlohmann::json::parse(format_gateway_reply(Reply::event({"Speed", "200", 9, 0})));
  CHECK(j == nlohmann::json{{"op", "EVENT"}, {"key", "Speed"}, {"value", "200"}, {"seq", 9}});
  const auto e = nlohmann::json::parse(format_gateway_reply(Reply::error("read-only key")));
  CHECK(e.size() == 4);
  CHECK(e["op"] == "ERR");
  CHECK(e["value"] == "read-only key");

  for (const Reply& r : {Reply::ok(1), Reply::absent("x"), Reply::value_of({"a", "b c", 4, 0})}) {
    auto back = parse_gateway_reply(format_gateway_reply(r));
    REQUIRE(std::holds_alternative<Reply>(back));
    CHECK(std::get<Reply>(back) == r);
  }
  auto rq = parse_gateway_request(format_gateway_request({Verb::kSet, "k", "v w"}));
  REQUIRE(std::holds_alternative<Request>(rq));
  CHECK(std::get<Request>(rq) == Request{Verb::kSet, "k", "v w"});
}

TEST_CASE("store gives read-your-write and per-key seq") {
  std::int64_t now = 100;
  Store store([&] { return now; });
  CHECK_FALSE(store.get("Signals"));
  const auto s1 = store.set("Signals", "Left");
  now = 250;
  const auto s2 = store.set("Signals", "Right");
  CHECK(s1 == 1);
  CHECK(s2 == s1 + 1);
  CHECK(store.set("Speed", "90") == 1);
  const auto rec = store.get("Signals");
  REQUIRE(rec);
  CHECK(*rec == RelayRecord{"Signals", "Right", 2, 250});
  CHECK(store.key_count() == 2);
  CHECK(store.snapshot().size() == 2);
  CHECK_THROWS_AS(store.set("", "x"), InputError);
  CHECK_THROWS_AS(store.set("a b", "x"), InputError);
  CHECK_THROWS_AS(store.set("k", "line\nbreak"), InputError);
  CHECK_THROWS_AS(store.set("k", std::string(257, 'v')), InputError);
  CHECK(store.get("Signals")->seq == 2);
}

TEST_CASE("store subscriptions match keys and prefixes") {
  Store store([] { return 0; });
  std::vector<RelayRecord> exact, prefix, untouched;
  store.subscribe("Signals", [&](const RelayRecord& r) { exact.push_back(r); });
  const auto id = store.subscribe("telemetry/*", [&](const RelayRecord& r) { prefix.push_back(r); });
  store.subscribe("Never", [&](const RelayRecord& r) { untouched.push_back(r); });
  CHECK_FALSE(store.add_pattern(id, "telemetry/*"));
  CHECK(store.add_pattern(id, "Speed"));
  CHECK_THROWS_AS(store.add_pattern(999, "x"), StateError);
  CHECK_THROWS_AS(store.add_pattern(id, "a*b"), InputError);

  store.set("Signals", "Left");
  store.set("telemetry/pose", "0 0 0");
  store.set("Speed", "10");
  store.set("Signals", "Stop");
  store.set("telemetryx", "no");
  CHECK(exact.size() == 2);
  CHECK(exact[1] == RelayRecord{"Signals", "Stop", 2, 0});
  REQUIRE(prefix.size() == 2);
  CHECK(prefix[0].key == "telemetry/pose");
  CHECK(prefix[1].key == "Speed");
  CHECK(untouched.empty());

  store.close_subscription(id);
  store.set("Speed", "11");
  CHECK(prefix.size() == 2);
}

TEST_CASE("store log holds one JSON line per write") {
  const auto path = std::filesystem::temp_directory_path() / "eyedrive_relay_log_test.jsonl";
  std::filesystem::remove(path);
  {
    Store store([] { return 5; });
    store.open_log(path);
    store.set("Signals", "Forward");
    store.set("Signals", "Stop");
  }
  std::ifstream in(path);
  std::vector<nlohmann::json> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(nlohmann::json::parse(l));
  REQUIRE(lines.size() == 2);
  CHECK(lines[1]["key"] == "Signals");
  CHECK(lines[1]["value"] == "Stop");
  CHECK(lines[1]["seq"] == 2);
  CHECK(lines[1]["t"] == 5);
  std::filesystem::remove(path);

  Store store;
  CHECK_THROWS_AS(store.open_log("/nonexistent-dir/relay.log"), IoError);
}

TEST_CASE("select_command precedence and speed rules") {
  auto pick = [](std::map<std::string, std::string, std::less<>> kv) {
    return select_command([&](std::string_view k) -> std::optional<std::string> {
      auto it = kv.find(k);
      if (it == kv.end()) return std::nullopt;
      return it->second;
    });
  };
  CHECK(pick({{"Override", "0"}, {"Signals", "Forward"}}) == Selection{Command::kForward, 128, {}});
  CHECK(pick({{"Signals", "Forward"}}) == Selection{Command::kForward, 128, {}});
  CHECK(pick({{"Override", "1"}, {"ManualSignal", "Stop"}, {"Signals", "Forward"}}) ==
        Selection{Command::kStop, 0, {}});
  CHECK(pick({{"Override", "1"}, {"ManualSignal", "Left"}, {"Speed", "90"}}) ==
        Selection{Command::kLeft, 90, {}});
  CHECK(pick({{"Override", "1"}, {"Signals", "Forward"}}) == Selection{Command::kStop, 0, {}});
  CHECK(pick({}) == Selection{Command::kStop, 0, {}});
  CHECK(pick({{"Signals", "Stop"}, {"Speed", "200"}}) == Selection{Command::kStop, 0, {}});
  CHECK(pick({{"Signals", "Start"}, {"Speed", "0"}}) == Selection{Command::kStart, 0, {}});

  CHECK(pick({{"Signals", "Forward"}, {"Speed", "300"}}) == Selection{Command::kForward, 255, {}});
  CHECK(pick({{"Signals", "Forward"}, {"Speed", "-5"}}) == Selection{Command::kForward, 0, {}});
  CHECK(pick({{"Signals", "Right"}, {"Speed", "0255"}}) == Selection{Command::kRight, 255, {}});

  const auto bad_speed = pick({{"Signals", "Forward"}, {"Speed", "fast"}});
  CHECK(bad_speed.command == Command::kStop);
  CHECK(bad_speed.diagnostic.has_value());
  const auto bad_flag = pick({{"Override", "yes"}, {"Signals", "Forward"}});
  CHECK(bad_flag.command == Command::kStop);
  CHECK(bad_flag.diagnostic.has_value());
  const auto bad_cmd = pick({{"Signals", "forward"}});
  CHECK(bad_cmd.command == Command::kStop);
  CHECK(bad_cmd.diagnostic.has_value());

  CHECK(parse_speed("0") == 0);
  CHECK(parse_speed("255") == 255);
  CHECK(parse_speed("99999999999999999999") == 255);
  CHECK_FALSE(parse_speed(""));
  CHECK_FALSE(parse_speed("-"));
  CHECK_FALSE(parse_speed(" 5"));
  CHECK_FALSE(parse_speed("5.0"));
  CHECK_FALSE(parse_speed("0x10"));
}

TEST_CASE("fuzzed select_command never moves on garbage") {
  const std::vector<std::string> names = {"Stop", "Left", "Right", "Start", "Forward"};
  const std::vector<std::string> moving = {"Left", "Right", "Start", "Forward"};
  Rng rng(0x5e1ec7);
  auto garbage = [&]() -> std::string {
    switch (rng.below(6)) {
      case 0: return "";
      case 1: {
        std::string s(1 + rng.below(12), ' ');
        for (char& ch : s) ch = static_cast<char>(rng.below(256));
        return s;
      }
      case 2: {  // near miss of a command name
        std::string s = names[rng.below(names.size())];
        const auto pos = rng.below(s.size());
        if (rng.below(2) == 0) {
          s[pos] = static_cast<char>(s[pos] ^ 0x20);
        } else {
          s.insert(pos + rng.below(2), 1, " \t_x"[rng.below(4)]);
        }
        return s;
      }
      case 3: return std::to_string(static_cast<int>(rng.below(7)));
      case 4: return "1";
      default: return names[rng.below(names.size())];
    }
  };

  std::size_t moves = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::map<std::string, std::optional<std::string>, std::less<>> kv;
    for (auto k : {keys::kOverride, keys::kSignals, keys::kManualSignal, keys::kSpeed}) {
      kv[std::string(k)] = rng.below(4) == 0 ? std::nullopt : std::optional(garbage());
    }
    const auto sel = select_command([&](std::string_view k) { return kv.find(k)->second; });

    // Oracle: the bot may move only if the flag is clean and the selected key
    // holds the exact name of a moving command.
    const auto& flag = kv["Override"];
    const bool flag_ok = !flag || *flag == "0" || *flag == "1";
    const auto& src = (flag && *flag == "1") ? kv["ManualSignal"] : kv["Signals"];
    const bool src_moving = src && std::find(moving.begin(), moving.end(), *src) != moving.end();
    INFO("trial " << trial);
    if (is_moving(sel.command)) {
      ++moves;
      CHECK(flag_ok);
      CHECK(src_moving);
      CHECK(names[static_cast<std::size_t>(sel.command) - 1] == *src);
    } else {
      CHECK((!flag_ok || !src_moving || sel.diagnostic.has_value()));
    }
    if (sel.command == Command::kStop) CHECK(sel.speed == 0);
    if (sel.diagnostic) CHECK(sel.command == Command::kStop);
  }
  CHECK(moves > 100);
}

TEST_CASE("tcp server gives read-your-write and replies in order") {
  Served s;
  auto c = s.client();
  CHECK_FALSE(c.get("Signals"));
  const auto seq = c.set("Signals", "Left");
  CHECK(seq == 1);
  CHECK(c.set("Signals", "Right") == seq + 1);
  const auto rec = c.get("Signals");
  REQUIRE(rec);
  CHECK(rec->value == "Right");
  CHECK(rec->seq == 2);
  CHECK(s.store.get("Signals")->seq == 2);

  c.send_raw("FROB x");
  CHECK(c.read_line(2s) == "ERR unknown verb");
  c.send_raw("GET a b");
  CHECK(c.read_line(2s) == "ERR unexpected trailing data");
  CHECK(c.get("Signals")->value == "Right");
  CHECK_THROWS_AS(c.set("bad*key", "x"), InputError);
}

TEST_CASE("tcp server resynchronises after an overlong line") {
  Served s;
  auto c = s.client();
  c.send_raw("SET k " + std::string(5000, 'x'));
  CHECK(c.read_line(2s) == "ERR line too long");
  c.send_raw("SET k ok");
  CHECK(c.read_line(2s) == "OK 1");
  CHECK_FALSE(c.read_line(100ms));
}

TEST_CASE("scripted three-client interleaving keeps subscribers ordered and gap-free") {
  Served s;
  auto sub_a = s.client();
  auto sub_b = s.client();
  sub_a.subscribe("Signals");
  sub_b.subscribe("Signals");
  auto quiet = s.client();
  quiet.subscribe("Untouched");

  std::vector<TcpClient> writers;
  for (int i = 0; i < 3; ++i) writers.push_back(s.client());
  Rng rng(33);
  std::map<std::uint64_t, std::string> acked;
  const std::vector<std::string> values = {"Left", "Right", "Forward", "Stop", "Start"};
  std::vector<std::uint64_t> last_ack(3, 0);
  for (int step = 0; step < 300; ++step) {
    const std::size_t w = rng.below(3);
    const std::string v = values[rng.below(values.size())] + "#" + std::to_string(step);
    if (rng.below(4) == 0) {
      const auto got = writers[w].get("Signals");
      REQUIRE(got);
      CHECK(got->seq >= last_ack[w]);
      continue;
    }
    const auto seq = writers[w].set("Signals", v);
    CHECK(acked.emplace(seq, v).second);
    CHECK(seq > last_ack[w]);
    last_ack[w] = seq;
  }
  // Acks from all writers cover 1..N with no gaps.
  const std::uint64_t n = acked.size();
  REQUIRE(acked.rbegin()->first == n);

  const auto ev_a = drain(sub_a, n);
  const auto ev_b = drain(sub_b, n);
  REQUIRE(ev_a.size() == n);
  REQUIRE(ev_b.size() == n);
  for (std::uint64_t i = 0; i < n; ++i) {
    CHECK(ev_a[i].seq == i + 1);
    CHECK(ev_a[i].value == acked[i + 1]);
    CHECK(ev_b[i] == ev_a[i]);
  }
  CHECK_FALSE(sub_a.next_event(100ms));
  CHECK_FALSE(quiet.next_event(100ms));
  for (auto& w : writers) CHECK(w.get("Signals")->seq == n);
  CHECK(writers[0].get("Signals")->value == acked[n]);
}

TEST_CASE("concurrent writers are linearised per key") {
  Served s;
  auto sub = s.client();
  sub.subscribe("*");
  constexpr int kWriters = 3;
  constexpr int kOps = 400;
  std::mutex m;
  std::map<std::string, std::map<std::uint64_t, std::string>> acked;
  std::atomic<int> violations{0};
  std::vector<std::thread> threads;
  for (int w = 0; w < kWriters; ++w) {
    threads.emplace_back([&, w] {
      auto c = s.client();
      Rng rng(derive_seed(77, static_cast<std::uint64_t>(w)));
      std::map<std::string, std::uint64_t> last;
      for (int i = 0; i < kOps; ++i) {
        const std::string key = "k" + std::to_string(rng.below(3));
        const std::string value = std::to_string(w) + ":" + std::to_string(i);
        const auto seq = c.set(key, value);
        if (seq <= last[key]) ++violations;
        last[key] = seq;
        const auto got = c.get(key);
        if (!got || got->seq < seq) ++violations;
        std::lock_guard lock(m);
        acked[key][seq] = value;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(violations == 0);

  const auto events = drain(sub, kWriters * kOps);
  REQUIRE(events.size() == static_cast<std::size_t>(kWriters * kOps));
  std::map<std::string, std::uint64_t> next;
  for (const auto& e : events) {
    CHECK(e.seq == ++next[e.key]);
    CHECK(acked[e.key][e.seq] == e.value);
  }
  for (const auto& [key, by_seq] : acked) {
    CHECK(by_seq.size() == by_seq.rbegin()->first);
    CHECK(s.store.get(key)->value == by_seq.rbegin()->second);
  }
}

TEST_CASE("server survives a hundred connections and ten thousand mixed operations") {
  Served s;
  std::vector<TcpClient> clients;
  for (int i = 0; i < 100; ++i) clients.push_back(s.client());
  CHECK(wait_for([&] { return s.server.connection_count() == 100; }));
  for (int i = 0; i < 10; ++i) clients[static_cast<std::size_t>(i)].subscribe("soak/" + std::to_string(i));

  Rng rng(2024);
  std::map<std::string, std::uint64_t> expected_seq;
  std::map<std::string, std::string> expected_value;
  for (int op = 0; op < 10000; ++op) {
    auto& c = clients[rng.below(clients.size())];
    const std::string key = "soak/" + std::to_string(rng.below(20));
    if (rng.below(2) == 0) {
      const std::string value = std::to_string(op);
      const auto seq = c.set(key, value);
      REQUIRE(seq == ++expected_seq[key]);
      expected_value[key] = value;
    } else {
      const auto got = c.get(key);
      if (expected_seq.count(key) == 0) {
        CHECK_FALSE(got);
      } else {
        REQUIRE(got);
        CHECK(got->seq == expected_seq[key]);
        CHECK(got->value == expected_value[key]);
      }
    }
  }
  for (int i = 0; i < 10; ++i) {
    const std::string key = "soak/" + std::to_string(i);
    auto& c = clients[static_cast<std::size_t>(i)];
    // Events seen while waiting for replies are queued; drain the rest.
    const auto events = drain(c, expected_seq[key], 2s);
    REQUIRE(events.size() == expected_seq[key]);
    for (std::size_t j = 0; j < events.size(); ++j) CHECK(events[j].seq == j + 1);
  }
  clients.clear();
  CHECK(wait_for([&] { return s.server.connection_count() == 0; }));
}

TEST_CASE("a subscriber that stops reading is disconnected") {
  ServerOptions opts;
  opts.max_backlog = 4096;
  Served s(opts);
  auto lazy = s.client();
  lazy.subscribe("flood");
  auto active = s.client();
  CHECK(wait_for([&] { return s.server.connection_count() == 2; }));
  const std::string big(250, 'z');
  for (int i = 0; i < 200000 && s.server.connection_count() == 2; ++i) s.store.set("flood", big);
  CHECK(wait_for([&] { return s.server.connection_count() == 1; }));
  CHECK(active.set("after", "1") == 1);
}

TEST_CASE("server lifecycle") {
  Store store;
  RelayServer a(store, {});
  a.start();
  ServerOptions taken;
  taken.port = a.port();
  CHECK_THROWS_AS(RelayServer(store, taken), IoError);
  CHECK_FALSE(a.gateway_port());
  a.stop();
  a.stop();
  CHECK_THROWS_AS(TcpClient("127.0.0.1", a.port(), 500ms), IoError);
}

TEST_CASE("gateway speaks the same verbs as JSON") {
  Served s(with_gateway());
  REQUIRE(s.server.gateway_port());
  GatewayClient ui("127.0.0.1", *s.server.gateway_port());
  auto tcp = s.client();

  CHECK_FALSE(ui.get("Override"));
  CHECK(ui.set("Override", "1") == 1);
  CHECK(tcp.get("Override")->value == "1");
  CHECK(tcp.set("ManualSignal", "Stop") == 1);
  CHECK(ui.get("ManualSignal")->value == "Stop");

  ui.subscribe("telemetry/*");
  s.store.set("telemetry/pose", "1.000 2.000 90.0");
  s.store.set("telemetry/mode", "Forward");
  const auto events = drain(ui, 2);
  REQUIRE(events.size() == 2);
  CHECK(events[0] == RelayRecord{"telemetry/pose", "1.000 2.000 90.0", 1, 0});
  CHECK(events[1].key == "telemetry/mode");

  CHECK_THROWS_WITH_AS(ui.set("telemetry/pose", "0 0 0"), doctest::Contains("read-only key"),
                       InputError);
  CHECK(s.store.get("telemetry/pose")->seq == 1);
  CHECK(tcp.set("telemetry/pose", "0 0 0") == 2);
  const auto echo = ui.next_event(2s);
  REQUIRE(echo);
  CHECK(echo->seq == 2);

  ui.send_text("{broken");
  const auto raw = ui.read_text(2s);
  REQUIRE(raw);
  const auto j = nlohmann::json::parse(*raw);
  CHECK(j["op"] == "ERR");
  CHECK(j.contains("key"));
  CHECK(j.contains("seq"));
}
