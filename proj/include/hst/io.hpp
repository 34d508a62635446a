#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "hst/error.hpp"
#include "hst/types.hpp"

namespace hst {

// Shortest decimal representation that reloads to the exact same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view token, const std::string& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  require(ec == std::errc() && ptr == token.data() + token.size(), ErrorCode::parse,
          where + ": cannot parse number '" + std::string(token) + "'");
  require(std::isfinite(v), ErrorCode::not_finite, where + ": non-finite value");
  return v;
}

inline long long parse_int(std::string_view token, const std::string& where) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  require(ec == std::errc() && ptr == token.data() + token.size(), ErrorCode::parse,
          where + ": cannot parse integer '" + std::string(token) + "'");
  return v;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "cannot open " + path.string());
  return in;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot write " + path.string());
  return out;
}

// ---------------------------------------------------------------------------
// Matrix files: "dims\t<rows>\t<cols>" header, then rows of tab-separated
// shortest-round-trip decimals.

inline void save_matrix(const Matrix& m, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "dims\t" << m.rows() << '\t' << m.cols() << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << '\t';
      out << format_double(row[c]);
    }
    out << '\n';
  }
  require(out.good(), ErrorCode::io, "write failed for " + path.string());
}

inline Matrix load_matrix(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::parse,
          path.string() + ": empty file");
  auto header = split_tabs(line);
  require(header.size() == 3 && header[0] == "dims", ErrorCode::parse,
          path.string() + ":1: expected 'dims\\t<rows>\\t<cols>' header");
  const long long rows = parse_int(header[1], path.string() + ":1");
  const long long cols = parse_int(header[2], path.string() + ":1");
  require(rows >= 1 && cols >= 1, ErrorCode::shape,
          path.string() + ": matrix must have at least one row and column");

  Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  for (long long r = 0; r < rows; ++r) {
    const std::string where = path.string() + ":" + std::to_string(r + 2);
    require(static_cast<bool>(std::getline(in, line)), ErrorCode::shape,
            where + ": expected " + std::to_string(rows) + " rows, file ends early");
    auto cells = split_tabs(line);
    require(static_cast<long long>(cells.size()) == cols, ErrorCode::shape,
            where + ": expected " + std::to_string(cols) + " columns, got " +
                std::to_string(cells.size()));
    for (long long c = 0; c < cols; ++c)
      m(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
          parse_double(cells[static_cast<std::size_t>(c)], where);
  }
  while (std::getline(in, line))
    require(line.empty(), ErrorCode::shape,
            path.string() + ": more rows than the header declares");
  return m;
}

inline VisualSequence load_visual_sequence(const std::filesystem::path& path) {
  VisualSequence seq;
  seq.video_id = path.stem().string();
  seq.frames = load_matrix(path);
  return seq;
}

inline void save_visual_sequence(const VisualSequence& seq,
                                 const std::filesystem::path& path) {
  save_matrix(seq.frames, path);
}

inline LogitMatrix load_logits(const std::filesystem::path& path) {
  LogitMatrix m{load_matrix(path)};
  require(m.scores.cols() >= 2, ErrorCode::shape,
          path.string() + ": logits need at least one class plus the blank column");
  return m;
}

inline void save_logits(const LogitMatrix& m, const std::filesystem::path& path) {
  save_matrix(m.scores, path);
}

inline void check_logit_classes(const LogitMatrix& m, int num_classes,
                                const std::string& where) {
  require(m.num_classes() == num_classes, ErrorCode::shape,
          where + ": logit matrix has " + std::to_string(m.num_classes()) +
              " classes, expected " + std::to_string(num_classes));
}

// ---------------------------------------------------------------------------
// Gloss sequence files: one line of space-separated gloss ids.

inline GlossSequence load_gloss_sequence(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  std::string line;
  std::getline(in, line);
  GlossSequence seq;
  std::istringstream tokens(line);
  std::string tok;
  while (tokens >> tok)
    seq.labels.push_back(static_cast<int>(parse_int(tok, path.string())));
  for (int y : seq.labels)
    require(y >= 0, ErrorCode::validation, path.string() + ": negative gloss id");
  return seq;
}

inline void save_gloss_sequence(const GlossSequence& seq,
                                const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (std::size_t i = 0; i < seq.labels.size(); ++i) {
    if (i) out << ' ';
    out << seq.labels[i];
  }
  out << '\n';
}

// ---------------------------------------------------------------------------
// Description corpus: JSON Lines, one statement object per line.

inline DescriptionCorpus load_description_corpus(const std::filesystem::path& path) {
  auto in = open_for_read(path);

  struct Raw {
    SubactionStatement statement;
    std::string gloss_text;
    int line = 0;
  };
  std::vector<Raw> raw;
  std::set<std::int64_t> seen_statement_ids;
  std::set<std::pair<int, int>> seen_slots;

  std::string line;
  int line_no = 0;
  int dimension = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::parse, where + ": " + e.what());
    }

    Raw r;
    r.line = line_no;
    try {
      r.statement.statement_id = j.at("statement_id").get<std::int64_t>();
      r.statement.gloss_id = j.at("gloss_id").get<int>();
      r.gloss_text = j.at("gloss_text").get<std::string>();
      r.statement.position = j.at("position").get<int>();
      r.statement.text = j.at("text").get<std::string>();
      r.statement.embedding = j.at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::parse, where + ": " + e.what());
    }

    require(r.statement.gloss_id >= 0, ErrorCode::validation, where + ": negative gloss_id");
    require(r.statement.position >= 0, ErrorCode::validation, where + ": negative position");
    require(!r.statement.embedding.empty(), ErrorCode::dimension_mismatch,
            where + ": empty embedding");
    for (double x : r.statement.embedding)
      require(std::isfinite(x), ErrorCode::not_finite, where + ": non-finite embedding value");

    if (dimension == 0) {
      dimension = static_cast<int>(r.statement.embedding.size());
    } else {
      require(static_cast<int>(r.statement.embedding.size()) == dimension,
              ErrorCode::dimension_mismatch,
              where + ": embedding dimension " + std::to_string(r.statement.embedding.size()) +
                  " differs from " + std::to_string(dimension));
    }

    require(seen_statement_ids.insert(r.statement.statement_id).second, ErrorCode::duplicate,
            where + ": duplicate statement_id " + std::to_string(r.statement.statement_id));
    require(seen_slots.insert({r.statement.gloss_id, r.statement.position}).second,
            ErrorCode::duplicate,
            where + ": duplicate (gloss_id, position) = (" +
                std::to_string(r.statement.gloss_id) + ", " +
                std::to_string(r.statement.position) + ")");
    raw.push_back(std::move(r));
  }
  require(!raw.empty(), ErrorCode::empty_input, path.string() + ": no statements");

  // Group by gloss preserving file order; positions must equal per-gloss file
  // order so that loading never reorders statements.
  std::map<int, GlossEntry> by_gloss;
  for (const auto& r : raw) {
    auto [it, inserted] = by_gloss.try_emplace(r.statement.gloss_id);
    GlossEntry& g = it->second;
    if (inserted) {
      g.gloss_id = r.statement.gloss_id;
      g.gloss_text = r.gloss_text;
    } else {
      require(g.gloss_text == r.gloss_text, ErrorCode::validation,
              path.string() + ":" + std::to_string(r.line) + ": gloss_text '" + r.gloss_text +
                  "' disagrees with earlier '" + g.gloss_text + "'");
    }
    require(r.statement.position == static_cast<int>(g.statements.size()), ErrorCode::validation,
            path.string() + ":" + std::to_string(r.line) + ": statement position " +
                std::to_string(r.statement.position) + " out of order, expected " +
                std::to_string(g.statements.size()));
    g.statements.push_back(r.statement);
  }

  DescriptionCorpus corpus;
  corpus.dimension = dimension;
  int expected_id = 0;
  for (auto& [id, entry] : by_gloss) {
    require(id == expected_id, ErrorCode::validation,
            path.string() + ": gloss ids must form 0..N-1, missing id " +
                std::to_string(expected_id));
    ++expected_id;
    corpus.glosses.push_back(std::move(entry));
  }
  return corpus;
}

inline void save_description_corpus(const DescriptionCorpus& corpus,
                                    const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (const auto& g : corpus.glosses) {
    for (const auto& s : g.statements) {
      nlohmann::ordered_json j;
      j["statement_id"] = s.statement_id;
      j["gloss_id"] = s.gloss_id;
      j["gloss_text"] = g.gloss_text;
      j["position"] = s.position;
      j["text"] = s.text;
      j["embedding"] = s.embedding;
      out << j.dump() << '\n';
    }
  }
  require(out.good(), ErrorCode::io, "write failed for " + path.string());
}

}  // namespace hst
