// Copyright 2026 The appsim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "appsim/analysis.hpp"
#include "support/oracles.hpp"

namespace appsim {
namespace {

using Set = std::set<std::string>;

const std::filesystem::path kConfig = APPSIM_CONFIG_DIR;

ConfigList dangerous() { return ConfigList::load(kConfig / "dangerous_permissions.txt"); }
ConfigList adlibs() { return ConfigList::load(kConfig / "ad_libraries.txt"); }

TEST(ConfigLists, DefaultSizes) {
  EXPECT_EQ(dangerous().size(), kDefaultDangerousPermissions);
  EXPECT_EQ(adlibs().size(), kDefaultAdLibraries);
  EXPECT_TRUE(dangerous().contains("android.permission.CAMERA"));
  EXPECT_EQ(dangerous().digest(), sha256_file(kConfig / "dangerous_permissions.txt"));
}

TEST(ConfigLists, NoListedPrefixShadowsAnother) {
  const auto& e = adlibs().entries();
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (std::size_t j = 0; j < e.size(); ++j) {
      if (i != j) EXPECT_FALSE(package_matches(e[i], e[j])) << e[i] << " under " << e[j];
    }
  }
}

TEST(ConfigLists, ParseSkipsCommentsAndBlanks) {
  auto l = ConfigList::parse("# header\n\n  b  \na\r\na\n");
  EXPECT_EQ(l.entries(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(l.digest(), ConfigList({"b", "a"}).digest());
  EXPECT_THROW(ConfigList::load(kConfig / "missing.txt"), Error);
}

TEST(PermissionDifference, Examples) {
  auto d = dangerous();
  const std::string cam = "android.permission.CAMERA", sms = "android.permission.READ_SMS";
  EXPECT_EQ(permission_difference({cam, sms}, {cam}, d), 1);
  EXPECT_EQ(permission_difference({cam, sms}, {cam, sms}, d), 0);
  Set all(d.entries().begin(), d.entries().end());
  EXPECT_EQ(permission_difference({}, all, d), -26);
  EXPECT_EQ(permission_difference(all, {}, d), 26);
  EXPECT_EQ(permission_difference({"android.permission.INTERNET"}, {}, d), 0);
}

TEST(PermissionDifference, AntisymmetricAndBounded) {
  auto d = dangerous();
  std::vector<std::string> pool(d.entries().begin(), d.entries().end());
  pool.push_back("android.permission.INTERNET");
  pool.push_back("com.example.CUSTOM");
  std::mt19937_64 rng(1);
  auto random_set = [&] {
    Set s;
    for (const auto& p : pool) {
      if (rng() % 3 == 0) s.insert(p);
    }
    return s;
  };
  for (int t = 0; t < 1000; ++t) {
    auto a = random_set(), b = random_set();
    int ab = permission_difference(a, b, d);
    EXPECT_EQ(ab, -permission_difference(b, a, d));
    EXPECT_LE(std::abs(ab), 26);
  }
}

TEST(AdlibDifference, Examples) {
  ConfigList list({"com.ads.a", "com.ads.b", "com.ads.c", "com.flurry", "com.mopub"});
  EXPECT_EQ(adlib_difference({"com.ads.a", "com.ads.b", "com.ads.c", "com.flurry.android", "com.mopub"}, {}, list), 5);
  EXPECT_EQ(adlib_difference({"com.ads.a"}, {"com.ads.a"}, list), 0);
  EXPECT_EQ(adlib_difference({"com.ads.a"}, {"com.ads.b", "com.ads.c"}, list), -1);
  EXPECT_EQ(adlib_difference({"com.flurryx"}, {}, list), 0);
  // Two packages under one entry count once.
  EXPECT_EQ(adlib_difference({"com.flurry.a", "com.flurry.b"}, {}, list), 1);
}

TEST(AdlibDifference, AntisymmetricAndBounded) {
  auto list = adlibs();
  std::mt19937_64 rng(2);
  const auto& e = list.entries();
  for (int t = 0; t < 300; ++t) {
    Set a, b;
    for (const auto& p : e) {
      if (rng() % 4 == 0) a.insert(p + ".sdk");
      if (rng() % 4 == 0) b.insert(p);
    }
    int ab = adlib_difference(a, b, list);
    EXPECT_EQ(ab, -adlib_difference(b, a, list));
    EXPECT_LE(std::abs(ab), static_cast<int>(list.size()));
  }
  Set everything;
  for (const auto& p : e) everything.insert(p);
  EXPECT_EQ(adlib_difference(everything, {}, list), 124);
}

CandidatePair pair(std::string orig, std::string cand, double d, std::optional<int> flags = {}) {
  return CandidatePair{std::move(orig), std::move(cand), d, 0, 0, flags};
}

TEST(AvFlags, Examples) {
  std::vector<CandidatePair> pairs = {pair("o", "a", 1), pair("o", "b", 1), pair("o", "c", 1)};
  Verdicts v{{"a", 6}, {"b", 3}, {"c", 0}};
  std::vector<int> th{2, 5};
  auto s = av_flag_summary(pairs, v, th);
  EXPECT_EQ(s.by_threshold[2].apps, 2u);
  EXPECT_EQ(s.by_threshold[5].apps, 1u);
  EXPECT_EQ(s.unscanned_pairs, 0u);

  auto none = av_flag_summary(pairs, {}, th);
  EXPECT_EQ(none.unscanned_pairs, 3u);
  EXPECT_EQ(none.unscanned_apps, 3u);
  EXPECT_EQ(none.by_threshold[2].pairs, 0u);

  std::vector<CandidatePair> one = {pair("o", "a", 1)};
  std::vector<int> t1{1};
  EXPECT_EQ(av_flag_summary(one, Verdicts{{"a", 1}}, t1).by_threshold[1].pairs, 1u);
  std::vector<int> bad{0};
  EXPECT_THROW(av_flag_summary(one, {}, bad), Error);
}

TEST(AvFlags, MonotoneInThreshold) {
  std::mt19937_64 rng(3);
  std::vector<CandidatePair> pairs;
  Verdicts v;
  for (int i = 0; i < 300; ++i) {
    std::string c = "c" + std::to_string(rng() % 120);
    pairs.push_back(pair("o" + std::to_string(i % 7), c, 1.0, rng() % 5 ? std::optional<int>(rng() % 12) : std::nullopt));
    if (rng() % 6 == 0) v[c] = static_cast<int>(rng() % 12);
  }
  std::vector<int> th{1, 2, 3, 5, 8, 11, 12};
  auto s = av_flag_summary(pairs, v, th);
  for (std::size_t i = 1; i < th.size(); ++i) {
    EXPECT_LE(s.by_threshold[th[i]].pairs, s.by_threshold[th[i - 1]].pairs);
    EXPECT_LE(s.by_threshold[th[i]].apps, s.by_threshold[th[i - 1]].apps);
  }
}

TEST(Cumulative, Examples) {
  using Series = std::vector<std::pair<double, std::size_t>>;
  std::vector<double> v{2, 1, 3, 2};
  EXPECT_EQ(cumulative_distribution(v), (Series{{1, 1}, {2, 3}, {3, 4}}));
  std::vector<double> one{4.5};
  EXPECT_EQ(cumulative_distribution(one), (Series{{4.5, 1}}));
  EXPECT_THROW(cumulative_distribution(std::vector<double>{}), Error);

  std::mt19937_64 rng(4);
  auto big = testing::random_vector(rng, 5000, 0, 10);
  std::vector<double> d(big.begin(), big.end());
  auto full = cumulative_distribution(d);
  auto down = cumulative_distribution(d, 50);
  EXPECT_EQ(down.size(), 50u);
  EXPECT_EQ(down.front(), full.front());
  EXPECT_EQ(down.back().second, 5000u);
  for (std::size_t i = 1; i < down.size(); ++i) {
    EXPECT_LT(down[i - 1].first, down[i].first);
    EXPECT_LE(down[i - 1].second, down[i].second);
  }
  std::ostringstream csv;
  write_series_csv(down, csv);
  EXPECT_EQ(csv.str().substr(0, 25), "distance,cumulative_count");
}

TEST(Report, CsvLayout) {
  ReportContext ctx{"p-digest", "a-digest"};
  std::ostringstream empty;
  emit_report({}, ReportFormat::kCsv, ctx, empty);
  EXPECT_EQ(empty.str(), "# appsim-candidates-v1\n# dangerous_permissions_sha256=p-digest\n"
                         "# ad_libraries_sha256=a-digest\n" +
                             std::string(kReportColumns) + "\n");

  std::ostringstream two;
  emit_report({pair("b", "x", 0.5, 3), pair("a", "y,z", 1.25)}, ReportFormat::kCsv, ctx, two);
  std::istringstream lines(two.str());
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) {
    if (line[0] != '#') rows.push_back(line);
  }
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1], "a,\"y,z\",1.25,0,0,");
  EXPECT_EQ(rows[2], "b,x,0.5,0,0,3");
}

TEST(Report, NdjsonRoundTripsAndIsOrdered) {
  std::vector<CandidatePair> pairs = {pair("b", "q", 2.0, 1), pair("a", "z", 2.0), pair("a", "y", 2.0),
                                      pair("a", "x", 0.1, 7)};
  pairs[0].permission_difference = -3;
  pairs[0].adlib_difference = 4;
  std::ostringstream out;
  emit_report(pairs, ReportFormat::kNdjson, {}, out);
  std::istringstream in(out.str());
  auto back = read_candidates(in, "mem");
  ASSERT_EQ(back.size(), 4u);
  EXPECT_EQ(back[0], pairs[3]);
  EXPECT_EQ(back[1], pairs[2]);
  EXPECT_EQ(back[2], pairs[1]);
  EXPECT_EQ(back[3], pairs[0]);
  EXPECT_THROW(parse_report_format("xml"), Error);
}

TEST(Verdicts, Parse) {
  auto v = parse_verdicts(nlohmann::json::parse(R"({"a": 3, "b": 0})"));
  EXPECT_EQ(v.at("a"), 3);
  EXPECT_THROW(parse_verdicts(nlohmann::json::parse(R"({"a": "x"})")), Error);
  EXPECT_THROW(parse_verdicts(nlohmann::json::parse("[1]")), Error);
}

}  // namespace
}  // namespace appsim
