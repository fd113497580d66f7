#pragma once

// Dataset index. Text format, UTF-8, one record per line:
//
//   #manifest-v1
//   path <TAB> label <TAB> split <TAB> condition <TAB> source_path
//
// Lines starting with '#' are comments. split is train|validation|test,
// condition is clean|snr20|snr10|snr0, and source_path names the clean
// recording a corrupted record was derived from ("-" for clean records).
// Relative paths resolve against the manifest's directory.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "onemax/binary_io.hpp"
#include "onemax/error.hpp"

namespace onemax {

enum class Split { Train, Validation, Test };
enum class Condition { Clean, Snr20, Snr10, Snr0 };

inline constexpr std::array<Condition, 4> kAllConditions = {Condition::Clean, Condition::Snr20, Condition::Snr10,
                                                            Condition::Snr0};

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

inline std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::Clean: return "clean";
    case Condition::Snr20: return "snr20";
    case Condition::Snr10: return "snr10";
    case Condition::Snr0: return "snr0";
  }
  return "?";
}

// Table-style column header, e.g. "20dB".
inline std::string_view condition_heading(Condition c) {
  switch (c) {
    case Condition::Clean: return "clean";
    case Condition::Snr20: return "20dB";
    case Condition::Snr10: return "10dB";
    case Condition::Snr0: return "0dB";
  }
  return "?";
}

inline double snr_db(Condition c) {
  switch (c) {
    case Condition::Snr20: return 20.0;
    case Condition::Snr10: return 10.0;
    case Condition::Snr0: return 0.0;
    case Condition::Clean: break;
  }
  throw InvalidArgument("snr_db: clean condition has no SNR");
}

inline std::size_t condition_index(Condition c) { return static_cast<std::size_t>(c); }

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  throw FormatError("unknown split '" + std::string(s) + "'");
}

inline Condition parse_condition(std::string_view s) {
  for (Condition c : kAllConditions)
    if (s == to_string(c)) return c;
  throw FormatError("unknown condition '" + std::string(s) + "'");
}

struct ManifestRecord {
  std::string path;
  std::string label;
  Split split = Split::Train;
  Condition condition = Condition::Clean;
  std::string source_path = "-";
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::vector<ManifestRecord> records, std::filesystem::path base_dir = {})
      : records_(std::move(records)), base_dir_(std::move(base_dir)) {
    std::set<std::pair<std::string, Condition>> seen;
    std::set<std::string> labels;
    for (const auto& r : records_) {
      if (r.path.empty()) throw FormatError("manifest: empty path");
      if (r.label.empty()) throw FormatError("manifest: empty label for " + r.path);
      if (!seen.emplace(r.path, r.condition).second)
        throw FormatError("manifest: duplicate record " + r.path + " (" + std::string(to_string(r.condition)) + ")");
      labels.insert(r.label);
    }
    labels_.assign(labels.begin(), labels.end());
  }

  const std::vector<ManifestRecord>& records() const { return records_; }
  // Sorted unique labels; a label's position is its class index.
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t n_classes() const { return labels_.size(); }
  const std::filesystem::path& base_dir() const { return base_dir_; }

  std::size_t class_index(std::string_view label) const {
    auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
    if (it == labels_.end() || *it != label) throw InvalidArgument("manifest: unknown label '" + std::string(label) + "'");
    return static_cast<std::size_t>(it - labels_.begin());
  }

  std::filesystem::path resolve(const std::string& path) const {
    std::filesystem::path p(path);
    return p.is_absolute() ? p : base_dir_ / p;
  }

  std::size_t count(Split split, Condition cond = Condition::Clean) const {
    return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [&](const auto& r) {
      return r.split == split && r.condition == cond;
    }));
  }

  std::string to_text() const {
    std::string out = "#manifest-v1\n";
    for (const auto& r : records_) {
      out += r.path + '\t' + r.label + '\t' + std::string(to_string(r.split)) + '\t' +
             std::string(to_string(r.condition)) + '\t' + r.source_path + '\n';
    }
    return out;
  }

  static Manifest parse(std::string_view text, std::filesystem::path base_dir = {}) {
    std::vector<ManifestRecord> records;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line[0] == '#') {
        if (line == "#manifest-v1") header = true;
        continue;
      }
      std::vector<std::string> fields;
      std::size_t start = 0;
      while (true) {
        const auto tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
      }
      if (fields.size() != 5)
        throw FormatError("manifest line " + std::to_string(lineno) + ": expected 5 tab-separated fields, found " +
                          std::to_string(fields.size()));
      try {
        records.push_back({fields[0], fields[1], parse_split(fields[2]), parse_condition(fields[3]), fields[4]});
      } catch (const FormatError& e) {
        throw FormatError("manifest line " + std::to_string(lineno) + ": " + e.what());
      }
      if (records.back().condition != Condition::Clean && records.back().source_path == "-")
        throw FormatError("manifest line " + std::to_string(lineno) + ": corrupted record without source_path");
    }
    if (!header) throw FormatError("manifest: missing #manifest-v1 header");
    return Manifest(std::move(records), std::move(base_dir));
  }

  static Manifest load(const std::filesystem::path& path) {
    const auto text = read_file_bytes(path);
    try {
      return parse(text, path.parent_path());
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }

  void save(const std::filesystem::path& path) const { write_file_bytes(path, to_text()); }

 private:
  std::vector<ManifestRecord> records_;
  std::vector<std::string> labels_;
  std::filesystem::path base_dir_;
};

}  // namespace onemax
