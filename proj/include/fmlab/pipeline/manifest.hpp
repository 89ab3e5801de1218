#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fmlab/core/error.hpp"
#include "fmlab/io/tsv.hpp"

namespace fmlab::pipeline {

namespace fs = std::filesystem;

enum class Strategy { real, mask_gen, propagated, background_injected };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::real: return "real";
    case Strategy::mask_gen: return "A_mask_gen";
    case Strategy::propagated: return "B_propagated";
    case Strategy::background_injected: return "C_background_injected";
  }
  return "real";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "real") return Strategy::real;
  if (s == "A_mask_gen") return Strategy::mask_gen;
  if (s == "B_propagated") return Strategy::propagated;
  if (s == "C_background_injected") return Strategy::background_injected;
  throw IoError("unknown strategy tag '" + s + "'");
}

/// Split column value; "none" until cmd split has run.
inline constexpr const char* kNoSplit = "none";

struct ManifestRecord {
  std::string image_path;  // relative to the manifest directory
  std::string mask_path;
  int coverage_class = 0;
  Strategy strategy = Strategy::real;
  std::string split = kNoSplit;
  std::uint64_t seed = 0;
  std::string provenance;

  bool operator==(const ManifestRecord&) const = default;
};

struct Manifest {
  std::vector<std::string> comments;
  std::vector<ManifestRecord> records;
};

inline const std::vector<std::string>& manifest_columns() {
  static const std::vector<std::string> cols{"image_path", "mask_path", "coverage_class", "strategy",
                                             "split",      "seed",      "provenance"};
  return cols;
}

inline void save_manifest(const std::string& path, const Manifest& m) {
  io::Table t;
  t.comments = m.comments;
  t.header = manifest_columns();
  for (const auto& r : m.records) {
    t.rows.push_back({r.image_path, r.mask_path, std::to_string(r.coverage_class), to_string(r.strategy), r.split,
                      std::to_string(r.seed), r.provenance.empty() ? "-" : r.provenance});
  }
  io::write_tsv(path, t);
}

inline Manifest load_manifest(const std::string& path) {
  const io::Table t = io::read_tsv(path);
  if (t.header != manifest_columns()) throw IoError(path + ": unexpected manifest columns");
  Manifest m;
  m.comments = t.comments;
  for (const auto& row : t.rows) {
    ManifestRecord r;
    r.image_path = row[0];
    r.mask_path = row[1];
    try {
      r.coverage_class = std::stoi(row[2]);
      r.seed = std::stoull(row[5]);
    } catch (const std::exception&) {
      throw IoError(path + ": malformed coverage_class or seed");
    }
    r.strategy = parse_strategy(row[3]);
    r.split = row[4];
    r.provenance = row[6] == "-" ? "" : row[6];
    m.records.push_back(std::move(r));
  }
  return m;
}

/// Every referenced file exists under `base`, no file is referenced twice, and split
/// tags are train/val/test/none.
inline std::vector<std::string> manifest_problems(const Manifest& m, const fs::path& base) {
  std::vector<std::string> problems;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    for (const std::string* p : {&r.image_path, &r.mask_path}) {
      if (!fs::exists(base / *p)) problems.push_back("record " + std::to_string(i) + ": missing file " + *p);
      if (!seen.insert(*p).second) problems.push_back("record " + std::to_string(i) + ": file referenced twice " + *p);
    }
    if (r.split != "train" && r.split != "val" && r.split != "test" && r.split != kNoSplit) {
      problems.push_back("record " + std::to_string(i) + ": bad split tag " + r.split);
    }
  }
  return problems;
}

}  // namespace fmlab::pipeline
