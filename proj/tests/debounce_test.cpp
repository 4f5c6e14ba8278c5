#include <optional>
#include <set>
#include <vector>

#include "doctest.h"
#include "eyedrive/control/debounce.hpp"
#include "eyedrive/errors.hpp"
#include "eyedrive/rng.hpp"

using namespace eyedrive;
using namespace eyedrive::control;
using gaze::GazeClass;

namespace {

std::vector<std::optional<Command>> run(Debouncer& d, const std::vector<GazeClass>& stream) {
  std::vector<std::optional<Command>> out;
  for (GazeClass c : stream) out.push_back(d.push(c));
  return out;
}

// Streams built from runs of random length, so long runs are common.
std::vector<GazeClass> random_stream(Rng& rng, std::size_t max_run) {
  std::vector<GazeClass> s;
  const std::size_t runs = 1 + rng.below(12);
  for (std::size_t r = 0; r < runs; ++r) {
    const GazeClass c = gaze::class_at(rng.below(5));
    const std::size_t len = 1 + rng.below(max_run);
    s.insert(s.end(), len, c);
  }
  return s;
}

// Reference: walk maximal runs; a run of length >= n emits its command unless
// it equals the previous emission.
std::vector<std::optional<Command>> reference(const std::vector<GazeClass>& s, std::size_t n) {
  std::vector<std::optional<Command>> out(s.size());
  std::optional<Command> last;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    if (j - i >= n && last != map_class(s[i])) {
      out[i + n - 1] = map_class(s[i]);
      last = map_class(s[i]);
    }
    i = j;
  }
  return out;
}

}  // namespace

TEST_CASE("class to command table") {
  CHECK(map_class(GazeClass::kDown) == Command::kStop);
  CHECK(map_class(GazeClass::kLeft) == Command::kLeft);
  CHECK(map_class(GazeClass::kRight) == Command::kRight);
  CHECK(map_class(GazeClass::kUp) == Command::kStart);
  CHECK(map_class(GazeClass::kStraight) == Command::kForward);
  std::set<Command> image;
  for (GazeClass c : gaze::kAllClasses) image.insert(map_class(c));
  CHECK(image.size() == 5);
}

TEST_CASE("command names round trip") {
  for (Command c : kAllCommands) CHECK(parse_command(name_of(c)) == c);
  CHECK_FALSE(parse_command("stop").has_value());
  CHECK_FALSE(parse_command("").has_value());
  CHECK_FALSE(parse_command("Forward ").has_value());
  CHECK(static_cast<int>(Command::kStop) == 1);
  CHECK(static_cast<int>(Command::kForward) == 5);
}

TEST_CASE("thirty Lefts emit on the thirtieth push") {
  Debouncer d;
  CHECK(d.n_frames() == 30);
  for (int i = 1; i < 30; ++i) CHECK_FALSE(d.push(GazeClass::kLeft).has_value());
  CHECK(d.push(GazeClass::kLeft) == Command::kLeft);
  for (int i = 0; i < 100; ++i) CHECK_FALSE(d.push(GazeClass::kLeft).has_value());
  CHECK(d.count() == 130);
}

TEST_CASE("alternating classes never emit") {
  Debouncer d(2);
  for (int i = 0; i < 1000; ++i) {
    CHECK_FALSE(d.push(i % 2 ? GazeClass::kUp : GazeClass::kDown).has_value());
    CHECK(d.count() == 1);
  }
}

TEST_CASE("blink rejection with the 20-frame preset") {
  Debouncer d(kBlinkPresetFrames);
  std::vector<GazeClass> s(25, GazeClass::kStraight);
  for (int rep = 0; rep < 50; ++rep) {
    s.insert(s.end(), 19, GazeClass::kDown);
    s.push_back(GazeClass::kStraight);
  }
  for (const auto& e : run(d, s)) CHECK(e != Command::kStop);
  CHECK(d.last_emitted() == Command::kForward);
}

TEST_CASE("duplicate suppression needs an intervening command") {
  Debouncer d(3);
  const std::vector<GazeClass> s = {GazeClass::kLeft, GazeClass::kLeft, GazeClass::kLeft,
                                    GazeClass::kUp,   GazeClass::kLeft, GazeClass::kLeft,
                                    GazeClass::kLeft, GazeClass::kDown, GazeClass::kDown,
                                    GazeClass::kDown, GazeClass::kLeft, GazeClass::kLeft,
                                    GazeClass::kLeft};
  const auto out = run(d, s);
  CHECK(out[2] == Command::kLeft);
  CHECK_FALSE(out[6].has_value());
  CHECK(out[9] == Command::kStop);
  CHECK(out[12] == Command::kLeft);
}

TEST_CASE("zero frame threshold is rejected and reset clears state") {
  CHECK_THROWS_AS(Debouncer(0), ConfigError);
  Debouncer d(1);
  CHECK(d.push(GazeClass::kUp) == Command::kStart);
  CHECK_FALSE(d.push(GazeClass::kUp).has_value());
  d.reset();
  CHECK_FALSE(d.candidate().has_value());
  CHECK(d.push(GazeClass::kUp) == Command::kStart);
}

TEST_CASE("random streams: emissions need n identical frames") {
  Rng rng(2024);
  std::size_t emissions = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    const auto stream = random_stream(rng, 2 * n);
    Debouncer d(n);
    const auto out = run(d, stream);
    REQUIRE(out == reference(stream, n));

    std::optional<Command> last;
    std::size_t run_start = 0;
    bool emitted_in_run = false;
    for (std::size_t i = 0; i < stream.size(); ++i) {
      if (i > 0 && stream[i] != stream[i - 1]) {
        run_start = i;
        emitted_in_run = false;
      }
      if (!out[i]) continue;
      ++emissions;
      REQUIRE(i + 1 >= n);
      for (std::size_t j = i + 1 - n; j <= i; ++j) REQUIRE(stream[j] == stream[i]);
      REQUIRE(i - run_start + 1 == n);
      REQUIRE_FALSE(emitted_in_run);
      emitted_in_run = true;
      REQUIRE(out[i] != last);
      last = out[i];
    }

    Debouncer again(n);
    REQUIRE(run(again, stream) == out);
  }
  CHECK(emissions > 10000);
}
