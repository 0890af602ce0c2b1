#include "ctxrank/score_file.hpp"

#include <ostream>
#include <tuple>

#include "ctxrank/io.hpp"

namespace ctxrank {

namespace {
constexpr std::string_view kScoreHeader = "role,user_id,session_id,serp_id,query_id,doc_id,base_rank,gain,score";
}

void write_scores(const std::filesystem::path& path, std::span<const ScoreRow> rows) {
  io::atomic_write(path, [&](std::ostream& out) {
    out << kScoreHeader << '\n';
    for (const auto& r : rows) {
      out << role_name(r.role) << ',' << r.user_id << ',' << r.session_id << ',' << r.serp_id << ',' << r.query_id
          << ',' << r.doc_id << ',' << r.base_rank << ',';
      if (r.gain) out << *r.gain;
      out << ',' << io::format_double(r.score) << '\n';
    }
  });
}

std::vector<ScoreRow> read_scores(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  std::vector<ScoreRow> rows;
  std::size_t line_no = 0;
  for (auto line : io::split(text, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kScoreHeader) throw ParseError(1, path.string() + ": unexpected score file header");
      continue;
    }
    const auto f = io::split(line, ',');
    if (f.size() != 9) throw ParseError(line_no, path.string() + ": expected 9 columns");
    try {
      ScoreRow r;
      r.role = parse_role(f[0]);
      r.user_id = io::parse_int(f[1], "user_id");
      r.session_id = io::parse_int(f[2], "session_id");
      r.serp_id = io::parse_int(f[3], "serp_id");
      r.query_id = io::parse_int(f[4], "query_id");
      r.doc_id = io::parse_int(f[5], "doc_id");
      r.base_rank = static_cast<int>(io::parse_int(f[6], "base_rank"));
      if (!f[7].empty()) r.gain = static_cast<int>(io::parse_int(f[7], "gain"));
      r.score = io::parse_double(f[8], "score");
      rows.push_back(r);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line_no, path.string() + ": " + e.what());
    }
  }
  return rows;
}

std::vector<std::size_t> target_offsets(std::span<const ScoreRow> rows) {
  return group_offsets(rows, [](const ScoreRow& r) { return std::tuple(r.role, r.user_id, r.session_id, r.serp_id); });
}

}  // namespace ctxrank
