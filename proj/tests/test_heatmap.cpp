#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "mpnet/common.hpp"
#include "mpnet/heatmap.hpp"
#include "mpnet/rng.hpp"

using namespace mp;

namespace {

float dense_at(const DenseHeatmap& d, int day, int hour, int channel) {
  return d[(static_cast<std::int64_t>(day) * 24 + hour) * d.shape[2] + channel];
}

SparseHeatmap random_heatmap(Rng& rng, int num_channels, int max_cells) {
  std::set<std::tuple<int, int, int>> keys;
  const int n = 1 + static_cast<int>(rng.uniform01() * max_cells);
  for (int i = 0; i < n; ++i)
    keys.insert({static_cast<int>(rng.uniform01() * 365), static_cast<int>(rng.uniform01() * 24),
                 static_cast<int>(rng.uniform01() * num_channels)});
  SparseHeatmap h;
  h.num_channels = num_channels;
  for (const auto& [d, hr, c] : keys) {
    float v = static_cast<float>(rng.lognormal(3.0, 2.0));
    if (rng.uniform01() < 0.2) v = static_cast<float>(rng.uniform(-5.0, 5.0));
    if (v == 0.0f) v = 1.0f;
    h.cells.push_back({d, hr, c, v});
  }
  return h;
}

}  // namespace

TEST_SUITE_BEGIN("heatmap");

TEST_CASE("two-cell example parses and reserializes canonically") {
  const std::string text = "2, 10, 28: 5000; 100, 20, 25: 6000";
  SparseHeatmap h = parse_sparse(text, 29);
  REQUIRE(h.cells.size() == 2);
  CHECK(h.cells[0].day == 2);
  CHECK(h.cells[0].hour == 10);
  CHECK(h.cells[0].channel == 28);
  CHECK(h.cells[0].value == 5000.0f);
  CHECK(h.cells[1].day == 100);
  CHECK(h.cells[1].hour == 20);
  CHECK(h.cells[1].channel == 25);
  CHECK(h.cells[1].value == 6000.0f);
  CHECK(serialize_sparse(h) == text);
}

TEST_CASE("whitespace and separators are flexible") {
  SparseHeatmap canonical = parse_sparse("2, 10, 28: 5000; 100, 20, 25: 6000", 29);
  CHECK(parse_sparse("2,10,28:5000;100,20,25:6000", 29) == canonical);
  CHECK(parse_sparse("  2 , 10 , 28 : 5000 ; 100 , 20 , 25 : 6000 ; ", 29) == canonical);
  CHECK(parse_sparse("\t2,10,28:5000\t;100,20,25:6000", 29) == canonical);
}

TEST_CASE("empty input is an empty heatmap") {
  CHECK(parse_sparse("", 4).cells.empty());
  CHECK(parse_sparse("   ", 4).cells.empty());
  CHECK(serialize_sparse(SparseHeatmap{4, {}}) == "");
}

TEST_CASE("duplicate keys are summed in key order") {
  SparseHeatmap h = parse_sparse("3,4,1: 2.5; 0,0,0: 1; 3,4,1: 1.5", 2);
  REQUIRE(h.cells.size() == 2);
  CHECK(h.cells[0].day == 0);
  CHECK(h.cells[0].value == 1.0f);
  CHECK(h.cells[1].day == 3);
  CHECK(h.cells[1].value == 4.0f);
}

TEST_CASE("parse rejects malformed or out-of-range input") {
  auto code_of = [](const std::string& text, int channels) {
    try {
      parse_sparse(text, channels);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc{};
  };
  CHECK(code_of("365, 0, 0: 1", 4) == Errc::parse);   // day too large
  CHECK(code_of("-1, 0, 0: 1", 4) == Errc::parse);    // negative day
  CHECK(code_of("0, 24, 0: 1", 4) == Errc::parse);    // hour too large
  CHECK(code_of("0, 0, 4: 1", 4) == Errc::parse);     // channel >= C
  CHECK(code_of("0, 0, 0", 4) == Errc::parse);        // missing value
  CHECK(code_of("0; 0, 0: 1", 4) == Errc::parse);     // wrong separator
  CHECK(code_of("0, 0, 0: 1e99", 4) == Errc::parse);  // beyond float range
  CHECK(code_of("0, 0, 0: abc", 4) == Errc::parse);
  CHECK_THROWS_AS(parse_sparse("0,0,0:1", 0), Error);  // invalid channel count

  // the byte offset in the message points at the offending token
  try {
    parse_sparse("0, 0, 0: 1; 365, 0, 0: 2", 4);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("byte 12") != std::string::npos);
  }
}

TEST_CASE("serialize/parse round trip is exact over random heatmaps") {
  Rng rng(2024);
  for (int rep = 0; rep < 1000; ++rep) {
    const int channels = 1 + static_cast<int>(rng.uniform01() * 32);
    SparseHeatmap h = random_heatmap(rng, channels, 40);
    SparseHeatmap back = parse_sparse(serialize_sparse(h), channels);
    REQUIRE(back.cells.size() == h.cells.size());
    CHECK(back == h);
  }
}

TEST_CASE("normalized sorts, merges and drops zeros") {
  SparseHeatmap h;
  h.num_channels = 3;
  h.cells = {{5, 2, 1, 3.0f}, {1, 1, 0, 2.0f}, {5, 2, 1, -3.0f}, {0, 0, 2, 4.0f}};
  SparseHeatmap n = normalized(h);
  REQUIRE(n.cells.size() == 2);
  CHECK(n.cells[0].day == 0);
  CHECK(n.cells[0].value == 4.0f);
  CHECK(n.cells[1].day == 1);
  CHECK(n.cells[1].value == 2.0f);
}

TEST_CASE("densify places cells and sparsify inverts it") {
  SparseHeatmap h = parse_sparse("2, 10, 1: 7.5; 364, 23, 0: 1.25", 2);
  DenseHeatmap d = densify(h);
  REQUIRE(d.shape == std::vector<int>{365, 24, 2});
  CHECK(dense_at(d, 2, 10, 1) == 7.5f);
  CHECK(dense_at(d, 364, 23, 0) == 1.25f);
  double sum = 0;
  for (std::int64_t i = 0; i < d.numel(); ++i) sum += d.data[static_cast<std::size_t>(i)];
  CHECK(sum == 8.75);
  CHECK(sparsify(d, 0.0f) == h);
  // eps filters small magnitudes
  SparseHeatmap big = sparsify(d, 2.0f);
  REQUIRE(big.cells.size() == 1);
  CHECK(big.cells[0].value == 7.5f);

  SparseHeatmap bad;
  bad.num_channels = 2;
  bad.cells = {{0, 0, 2, 1.0f}};
  CHECK_THROWS_AS(densify(bad), Error);
}

TEST_CASE("encode_events maps genres to channels with amount and count extractors") {
  ChannelSpec spec;
  spec.num_channels = 3;
  spec.rules = {{0, "beauty", Extractor::amount},
                {1, "books", Extractor::count},
                {2, "", Extractor::count}};  // catch-all event counter

  std::vector<EventRecord> events;
  events.push_back({1, 1200.0, 10, 9, "beauty/makeup/lipstick"});
  events.push_back({1, 800.0, 10, 9, "beauty/skincare"});
  events.push_back({1, 450.0, 40, 20, "books/manga"});
  events.push_back({1, 999.0, 40, 20, "booksmith"});  // prefix must stop at segment

  SparseHeatmap h = encode_events(events, spec);
  // channel 0: prices summed; channel 1: one count; channel 2: every event
  CHECK(dense_at(densify(h), 10, 9, 0) == 2000.0f);
  CHECK(dense_at(densify(h), 40, 20, 1) == 1.0f);
  CHECK(dense_at(densify(h), 10, 9, 2) == 2.0f);
  CHECK(dense_at(densify(h), 40, 20, 2) == 2.0f);
}

TEST_CASE("encode_events worked example round trips through the codec") {
  ChannelSpec spec;
  spec.num_channels = 29;
  spec.rules = {{28, "beauty", Extractor::amount}, {25, "sports", Extractor::amount}};
  std::vector<EventRecord> events;
  events.push_back({7, 5000.0, 2, 10, "beauty/makeup"});
  events.push_back({7, 6000.0, 100, 20, "sports/outdoor"});
  CHECK(serialize_sparse(encode_events(events, spec)) == "2, 10, 28: 5000; 100, 20, 25: 6000");
}

TEST_CASE("encode_events stats vs strict mode") {
  ChannelSpec spec;
  spec.num_channels = 1;
  spec.rules = {{0, "beauty", Extractor::amount}};
  std::vector<EventRecord> events;
  events.push_back({1, 10.0, 400, 9, "beauty"});  // bad day
  events.push_back({1, 20.0, 10, 9, "garden"});   // no rule matches
  events.push_back({1, 30.0, 10, 9, "beauty"});

  CHECK_THROWS_AS(encode_events(events, spec), Error);  // strict: bad time is fatal

  EncodeStats st;
  SparseHeatmap h = encode_events(events, spec, &st);
  CHECK(st.rejected == 1);
  CHECK(st.unmatched == 1);
  CHECK(st.matched == 1);
  REQUIRE(h.cells.size() == 1);
  CHECK(h.cells[0].value == 30.0f);
}

TEST_CASE("channel spec json round trip and validation") {
  ChannelSpec spec;
  spec.num_channels = 2;
  spec.rules = {{0, "beauty", Extractor::amount}, {1, "", Extractor::count}};
  spec.transforms = {CellTransform::log1p, CellTransform::identity};
  ChannelSpec back = ChannelSpec::from_json_text(spec.to_json_text());
  CHECK(back.num_channels == 2);
  REQUIRE(back.rules.size() == 2);
  CHECK(back.rules[0].genre_prefix == "beauty");
  CHECK(back.rules[0].extractor == Extractor::amount);
  CHECK(back.rules[1].extractor == Extractor::count);
  REQUIRE(back.transforms.size() == 2);
  CHECK(back.transforms[0] == CellTransform::log1p);

  ChannelSpec bad = spec;
  bad.rules[0].channel = 5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = spec;
  bad.rules.clear();
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(ChannelSpec::from_json_text("{"), Error);
  CHECK_THROWS_AS(ChannelSpec::from_json_text(R"({"num_channels":1,"rules":[{"channel":0,"genre_prefix":"","extractor":"median"}]})"),
                  Error);
}

TEST_CASE("multi-user sparse file round trip") {
  Rng rng(5);
  std::vector<UserHeatmap> users;
  for (int i = 0; i < 20; ++i) users.push_back({1000 + i, random_heatmap(rng, 6, 25)});
  users.push_back({2000, SparseHeatmap{6, {}}});  // empty heatmap line

  const std::string path = "test_heat_rt.heat";
  write_sparse_file(path, users);
  std::vector<UserHeatmap> back = read_sparse_file(path, 6);
  REQUIRE(back.size() == users.size());
  for (std::size_t i = 0; i < users.size(); ++i) {
    CHECK(back[i].user_id == users[i].user_id);
    CHECK(back[i].heatmap == normalized(users[i].heatmap));
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_sparse_file("no_such_file.heat", 6), Error);
}

TEST_CASE("dense binary file round trip and corruption detection") {
  Rng rng(9);
  std::vector<DenseHeatmap> maps;
  for (int i = 0; i < 3; ++i) maps.push_back(densify(random_heatmap(rng, 2, 30)));
  const std::string path = "test_dense_rt.bin";
  write_dense_file(path, maps);
  std::vector<DenseHeatmap> back = read_dense_file(path);
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[static_cast<std::size_t>(i)].shape == maps[static_cast<std::size_t>(i)].shape);
    CHECK(back[static_cast<std::size_t>(i)].data == maps[static_cast<std::size_t>(i)].data);
  }
  // truncating mid-block must be rejected
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
  }
  CHECK_THROWS_AS(read_dense_file(path), Error);
  std::remove(path.c_str());
}

TEST_SUITE_END();
