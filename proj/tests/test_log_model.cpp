#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "ctxrank/log_model.hpp"
#include "support.hpp"

using namespace ctxrank;
using namespace ctxrank::testing;

namespace {

/// One session, one query over docs 100..109, clicks given as (time, url).
Labels label_single(std::int64_t next_action_time, std::vector<std::pair<std::int64_t, ItemId>> clicks,
                    bool trailing_query = true) {
  std::string log = meta_line(1, 1, 7) + query_line(1, 0, 0, 5, {1, 2});
  for (auto [t, url] : clicks) log += click_line(1, t, 0, url);
  if (trailing_query) log += query_line(1, next_action_time, 1, 6, {3});
  auto sessions = labeled_sessions(log);
  return *sessions.at(0).impressions.at(0).labels;
}

}  // namespace

TEST(Parse, MetadataLayouts) {
  const auto four = std::get<SessionMeta>(parse_line("1\tM\t3\t100", 1));
  EXPECT_EQ(four.session_id, 1);
  EXPECT_EQ(four.day, 3);
  EXPECT_EQ(four.user_id, 100);
  const auto five = std::get<SessionMeta>(parse_line("1\t5\tM\t3\t100", 1));
  EXPECT_EQ(five, four);
}

TEST(Parse, QueryAndClick) {
  const auto q = std::get<QueryAction>(parse_line(query_line(4, 12, 2, 77, {9, 8}, 200, true), 3));
  EXPECT_EQ(q.session_id, 4);
  EXPECT_EQ(q.time_passed, 12);
  EXPECT_EQ(q.serp_id, 2);
  EXPECT_TRUE(q.is_test);
  EXPECT_EQ(q.query_id, 77);
  EXPECT_EQ(q.terms, (std::vector<TermId>{9, 8}));
  EXPECT_EQ(q.results[0].url_id, 200);
  EXPECT_EQ(q.results[9].domain_id, 20);
  const auto c = std::get<ClickAction>(parse_line("4\t30\tC\t2\t205", 4));
  EXPECT_EQ(c.url_id, 205);
  EXPECT_EQ(c.time_passed, 30);
}

TEST(Parse, FormatRoundTrip) {
  const std::string text = meta_line(1, 2, 3) + query_line(1, 0, 0, 5, {1, 2}) + click_line(1, 9, 0, 104);
  const auto records = parse_log(text);
  std::ostringstream out;
  write_log(out, records);
  EXPECT_EQ(out.str(), text);
}

TEST(Parse, WrongResultCountIsDataError) {
  EXPECT_THROW(parse_line("1\t0\tQ\t0\t5\t1\t100,10\t101,10", 1), DataError);
}

TEST(Parse, MalformedLinesReportLineNumber) {
  try {
    parse_log(meta_line(1, 1, 1) + "1\t0\tX\t0\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_line("a\tM\t1\t1", 1), ParseError);
}

TEST(Sessionize, MetaAndOneQuery) {
  const auto sessions = sessionize(parse_log(meta_line(1, 1, 7) + query_line(1, 0, 0, 5, {1})));
  ASSERT_EQ(sessions.size(), 1u);
  ASSERT_EQ(sessions[0].impressions.size(), 1u);
  EXPECT_TRUE(sessions[0].impressions[0].clicks.empty());
}

TEST(Sessionize, ClickOnUnknownSerp) {
  EXPECT_THROW(sessionize(parse_log(meta_line(1, 1, 7) + query_line(1, 0, 0, 5, {1}) + click_line(1, 5, 3, 100))),
               DataError);
}

TEST(Sessionize, ClickOnUnlistedUrl) {
  EXPECT_THROW(sessionize(parse_log(meta_line(1, 1, 7) + query_line(1, 0, 0, 5, {1}) + click_line(1, 5, 0, 999))),
               DataError);
}

TEST(Sessionize, ActionWithoutMetadata) {
  EXPECT_THROW(sessionize(parse_log(query_line(1, 0, 0, 5, {1}))), DataError);
}

TEST(Sessionize, ImpressionsAndClicksOrderedByTime) {
  const std::string log = meta_line(1, 1, 7) + query_line(1, 50, 1, 6, {2}, 200) + query_line(1, 0, 0, 5, {1}) +
                          click_line(1, 30, 0, 103) + click_line(1, 10, 0, 101);
  const auto sessions = sessionize(parse_log(log));
  const auto& imps = sessions.at(0).impressions;
  ASSERT_EQ(imps.size(), 2u);
  EXPECT_EQ(imps[0].serp_id, 0);
  EXPECT_EQ(imps[0].clicks.at(0).url_id, 101);
  EXPECT_EQ(imps[0].clicks.at(1).url_id, 103);
}

TEST(Labels, DwellBoundaries) {
  // Click on 101 at t=10; a later click on 109 closes the session so 101 is
  // not the last click.
  auto dwell_grade = [](std::int64_t next) {
    return label_single(0, {{10, 101}, {next, 109}}, false)[1];
  };
  EXPECT_EQ(dwell_grade(59), Grade::R0);
  EXPECT_EQ(dwell_grade(60), Grade::R1);
  EXPECT_EQ(dwell_grade(409), Grade::R1);
  EXPECT_EQ(dwell_grade(410), Grade::R2);
}

TEST(Labels, NextActionMayBeAQuery) {
  // Click at 10, query at 59, click at 500: dwell of the first click is 49.
  const auto labels = label_single(59, {{10, 101}, {500, 102}});
  EXPECT_EQ(labels[1], Grade::R0);
  EXPECT_EQ(labels[2], Grade::R2);
}

TEST(Labels, LastClickIsR2) {
  const auto labels = label_single(0, {{10, 104}}, false);
  EXPECT_EQ(labels[4], Grade::R2);
  EXPECT_EQ(labels[0], Grade::NoClick);
}

TEST(Labels, LastClickIsTheLatestClickEvenWithLaterQuery) {
  // The click at 10 is followed by a query at 20 (dwell 10 -> R0), but it is
  // still the session's last click.
  const auto labels = label_single(20, {{10, 104}});
  EXPECT_EQ(labels[4], Grade::R2);
}

TEST(Labels, MultiClickTakesBestDwell) {
  // 102 clicked twice: dwell 5 then dwell 100; 109 closes the session.
  const auto labels = label_single(0, {{10, 102}, {15, 103}, {20, 102}, {120, 109}}, false);
  EXPECT_EQ(labels[2], Grade::R1);
  EXPECT_EQ(labels[3], Grade::R0);
  EXPECT_EQ(labels[9], Grade::R2);
}

TEST(Labels, ZeroClickImpression) {
  const auto labels = label_single(100, {});
  for (auto g : labels) EXPECT_EQ(g, Grade::NoClick);
}

TEST(Labels, GainMapping) {
  EXPECT_EQ(gain(Grade::NoClick), 0);
  EXPECT_EQ(gain(Grade::R0), 0);
  EXPECT_EQ(gain(Grade::R1), 1);
  EXPECT_EQ(gain(Grade::R2), 2);
}

TEST(Labels, GeneratedLogProperties) {
  auto sessions = generated_sessions(small_config(60));
  for (const auto& s : sessions) {
    int last_click_r2 = 0;
    std::int64_t last_time = -1;
    const Impression* last_imp = nullptr;
    ItemId last_url = -1;
    for (const auto& imp : s.impressions) {
      ASSERT_TRUE(imp.labels.has_value());
      std::array<int, 4> counts{};
      for (auto g : *imp.labels) counts[static_cast<std::size_t>(g)]++;
      EXPECT_EQ(counts[0] + counts[1] + counts[2] + counts[3], 10);
      for (const auto& c : imp.clicks) {
        if (c.time_passed >= last_time) {
          last_time = c.time_passed;
          last_imp = &imp;
          last_url = c.url_id;
        }
      }
    }
    if (last_imp) {
      last_click_r2 = (*last_imp->labels)[static_cast<std::size_t>(last_imp->position_of(last_url))] == Grade::R2;
      EXPECT_EQ(last_click_r2, 1);
    }
  }
  // Idempotent.
  auto again = sessions;
  label_sessions(again);
  EXPECT_EQ(again, sessions);
}

TEST(Labels, IndependentOfOtherSessions) {
  const std::string a = meta_line(1, 1, 7) + query_line(1, 0, 0, 5, {1}) + click_line(1, 10, 0, 101) +
                        query_line(1, 200, 1, 6, {2});
  const std::string b = meta_line(2, 1, 8) + query_line(2, 0, 0, 5, {1}) + click_line(2, 10, 0, 101);
  const auto alone = labeled_sessions(a);
  const auto both = labeled_sessions(a + b);
  EXPECT_EQ(alone.at(0), both.at(0));
}

TEST(SessionCache, RoundTrip) {
  const auto sessions = generated_sessions(small_config(20));
  const auto path = std::filesystem::temp_directory_path() / "ctxrank_sessions_test.bin";
  save_sessions(path, sessions);
  EXPECT_EQ(load_sessions(path), sessions);
  std::filesystem::remove(path);
}

TEST(Records, ToRecordsInvertsSessionize) {
  const auto text = generate_text(small_config(10));
  const auto records = parse_log(text);
  const auto sessions = sessionize(records);
  EXPECT_EQ(sessionize(to_records(sessions)), sessions);
}
