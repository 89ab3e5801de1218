#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fmlab/core/error.hpp"
#include "fmlab/io/config.hpp"

namespace fmlab::io {

/// Tab-separated table with a header row. Lines starting with '#' are comments;
/// they are kept in order ahead of the header when written.
struct Table {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw IoError("table has no column '" + name + "'");
  }
};

inline std::string to_tsv(const Table& t) {
  std::string out;
  for (const auto& c : t.comments) out += "# " + c + "\n";
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].find_first_of("\t\n") != std::string::npos) throw IoError("TSV cell contains a tab or newline");
      out += (i ? "\t" : "") + cells[i];
    }
    out += "\n";
  };
  line(t.header);
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw IoError("TSV row width differs from header");
    line(r);
  }
  return out;
}

inline void write_tsv(const std::string& path, const Table& t) {
  const std::string text = to_tsv(t);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

inline Table parse_tsv(const std::string& text, const std::string& origin = "<string>") {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      t.comments.push_back(trim(line.substr(1)));
      continue;
    }
    auto cells = split(line, '\t');
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
    } else {
      if (cells.size() != t.header.size()) {
        throw IoError(origin + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(cells));
    }
  }
  if (!have_header) throw IoError(origin + ": missing header row");
  return t;
}

inline Table read_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_tsv(ss.str(), path);
}

}  // namespace fmlab::io
