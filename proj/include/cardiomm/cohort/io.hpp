#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cardiomm/cohort/types.hpp"
#include "cardiomm/core/binary_io.hpp"
#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"

#include <nlohmann/json.hpp>

namespace cardiomm {

inline constexpr int kCohortFormatVersion = 1;

namespace io_detail {

inline void write_array(std::ostream& os, const MatF& m) {
  write_f32_le(os, m.data(), static_cast<std::size_t>(m.size()));
}

inline MatF read_array(const std::filesystem::path& path, Index rows, Index cols) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open array file " + path.string());
  const auto expected = static_cast<std::uintmax_t>(rows) *
                        static_cast<std::uintmax_t>(cols) * 4;
  const auto actual = std::filesystem::file_size(path);
  if (actual != expected)
    throw IoError("array file " + path.string() + " holds " +
                  std::to_string(actual) + " bytes, expected " +
                  std::to_string(expected));
  MatF m(rows, cols);
  read_f32_le(is, m.data(), static_cast<std::size_t>(m.size()));
  if (!is) throw IoError("short read on " + path.string());
  return m;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

inline void check_csv_safe(const std::string& s) {
  check_arg(s.find(',') == std::string::npos && s.find('\n') == std::string::npos,
            "cohort io: cell text may not contain commas or newlines: '" + s + "'");
}

inline nlohmann::json schema_to_json(const FeatureSchema& s) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : s.features) {
    nlohmann::json jf{{"name", f.name},
                      {"kind", f.kind == FeatureKind::categorical
                                   ? "categorical"
                                   : "continuous"}};
    if (f.kind == FeatureKind::categorical)
      jf["vocabulary"] = f.vocabulary;
    else {
      jf["min"] = f.min;
      jf["max"] = f.max;
    }
    features.push_back(jf);
  }
  return nlohmann::json{{"id", s.id}, {"features", features}};
}

inline FeatureSchema schema_from_json(const nlohmann::json& j) {
  FeatureSchema s;
  s.id = j.at("id").get<std::string>();
  for (const auto& jf : j.at("features")) {
    FeatureSchema::Feature f;
    f.name = jf.at("name").get<std::string>();
    std::string kind = jf.at("kind").get<std::string>();
    check_arg(kind == "categorical" || kind == "continuous",
              "cohort io: unknown feature kind '" + kind + "'");
    if (kind == "categorical") {
      f.kind = FeatureKind::categorical;
      f.vocabulary = jf.at("vocabulary").get<std::vector<std::string>>();
    } else {
      f.kind = FeatureKind::continuous;
      f.min = jf.at("min").get<double>();
      f.max = jf.at("max").get<double>();
    }
    s.features.push_back(std::move(f));
  }
  validate(s);
  return s;
}

}  // namespace io_detail

/// Writes `manifest.json`, per-subject `ecg/*.bin` and `cmr/*.bin` arrays of
/// little-endian float32, and `tabular.csv` / `labels.csv` tables. Returns
/// the manifest. Arrays round-trip bit-exactly; text fields exactly.
inline nlohmann::json save_cohort(const Cohort& cohort,
                                  const std::filesystem::path& dir) {
  check_arg(!cohort.samples.empty(), "save_cohort: empty cohort");
  namespace fs = std::filesystem;
  fs::create_directories(dir / "ecg");
  fs::create_directories(dir / "cmr");

  const auto& first = cohort.samples.front();
  const Index c = first.ecg.samples.rows(), t = first.ecg.samples.cols();
  const Index h = first.cmr.height, w = first.cmr.width;

  nlohmann::json manifest{
      {"format_version", kCohortFormatVersion},
      {"n_subjects", cohort.samples.size()},
      {"sampling_rate", first.ecg.sampling_rate},
      {"ecg_shape", {c, t}},
      {"cmr_shape", {3, h, w}},
      {"tasks", cohort.tasks},
      {"schema", io_detail::schema_to_json(cohort.schema)},
  };
  std::vector<std::string> subjects;

  std::ofstream tab(dir / "tabular.csv");
  std::ofstream lab(dir / "labels.csv");
  if (!tab || !lab) throw IoError("save_cohort: cannot write tables under " + dir.string());
  tab << "subject_id";
  for (const auto& f : cohort.schema.features) {
    io_detail::check_csv_safe(f.name);
    tab << ',' << f.name;
  }
  tab << '\n';
  lab << "subject_id";
  for (const auto& task : cohort.tasks) lab << ',' << task;
  lab << '\n';

  for (const auto& s : cohort.samples) {
    validate(s, cohort.schema);
    check_arg(s.ecg.samples.rows() == c && s.ecg.samples.cols() == t &&
                  s.cmr.height == h && s.cmr.width == w,
              "save_cohort: sample '" + s.subject_id() +
                  "' does not match the cohort's array shapes");
    subjects.push_back(s.subject_id());

    std::ofstream ecg_os(dir / "ecg" / (s.subject_id() + ".bin"), std::ios::binary);
    if (!ecg_os) throw IoError("save_cohort: cannot write ECG array for " + s.subject_id());
    io_detail::write_array(ecg_os, s.ecg.samples);

    std::ofstream cmr_os(dir / "cmr" / (s.subject_id() + ".bin"), std::ios::binary);
    if (!cmr_os) throw IoError("save_cohort: cannot write CMR array for " + s.subject_id());
    io_detail::write_array(cmr_os, s.cmr.phases);

    tab << s.subject_id();
    for (const auto& cell : s.tabular.values) {
      io_detail::check_csv_safe(cell);
      tab << ',' << cell;
    }
    tab << '\n';

    lab << s.subject_id();
    for (const auto& task : cohort.tasks) lab << ',' << s.labels.at(task);
    lab << '\n';
  }

  manifest["subjects"] = subjects;
  std::ofstream mf(dir / "manifest.json");
  if (!mf) throw IoError("save_cohort: cannot write manifest under " + dir.string());
  mf << manifest.dump(2) << '\n';
  return manifest;
}

inline Cohort load_cohort(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw DependencyError("load_cohort: no manifest.json under " + dir.string());
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_cohort: malformed manifest: " + std::string(e.what()));
  }

  const int version = manifest.at("format_version").get<int>();
  if (version != kCohortFormatVersion)
    throw IoError("load_cohort: unsupported format version " +
                  std::to_string(version) + ", expected " +
                  std::to_string(kCohortFormatVersion));

  Cohort cohort;
  cohort.schema = io_detail::schema_from_json(manifest.at("schema"));
  cohort.tasks = manifest.at("tasks").get<std::vector<std::string>>();
  const auto subjects = manifest.at("subjects").get<std::vector<std::string>>();
  const double fs_hz = manifest.at("sampling_rate").get<double>();
  const auto ecg_shape = manifest.at("ecg_shape").get<std::vector<Index>>();
  const auto cmr_shape = manifest.at("cmr_shape").get<std::vector<Index>>();
  check_arg(ecg_shape.size() == 2 && cmr_shape.size() == 3 && cmr_shape[0] == 3,
            "load_cohort: malformed shape entries in manifest");

  std::map<std::string, std::vector<std::string>> tab_rows;
  {
    std::ifstream tab(dir / "tabular.csv");
    if (!tab) throw IoError("load_cohort: missing tabular.csv");
    std::string line;
    std::getline(tab, line);  // header
    while (std::getline(tab, line)) {
      if (line.empty()) continue;
      auto cells = io_detail::split_csv_line(line);
      check_arg(cells.size() == cohort.schema.features.size() + 1,
                "load_cohort: bad tabular.csv row for '" + cells[0] + "'");
      tab_rows[cells[0]] = {cells.begin() + 1, cells.end()};
    }
  }
  std::map<std::string, std::map<std::string, int>> label_rows;
  {
    std::ifstream lab(dir / "labels.csv");
    if (!lab) throw IoError("load_cohort: missing labels.csv");
    std::string line;
    std::getline(lab, line);
    auto header = io_detail::split_csv_line(line);
    while (std::getline(lab, line)) {
      if (line.empty()) continue;
      auto cells = io_detail::split_csv_line(line);
      check_arg(cells.size() == header.size(),
                "load_cohort: bad labels.csv row for '" + cells[0] + "'");
      for (std::size_t k = 1; k < cells.size(); ++k)
        label_rows[cells[0]][header[k]] = std::stoi(cells[k]);
    }
  }

  for (const auto& sid : subjects) {
    PairedSample s;
    s.ecg.subject_id = sid;
    s.ecg.sampling_rate = fs_hz;
    s.ecg.samples =
        io_detail::read_array(dir / "ecg" / (sid + ".bin"), ecg_shape[0], ecg_shape[1]);
    s.cmr.subject_id = sid;
    s.cmr.height = cmr_shape[1];
    s.cmr.width = cmr_shape[2];
    s.cmr.phases = io_detail::read_array(dir / "cmr" / (sid + ".bin"), 3,
                                         cmr_shape[1] * cmr_shape[2]);
    auto tab_it = tab_rows.find(sid);
    check_arg(tab_it != tab_rows.end(),
              "load_cohort: subject '" + sid + "' missing from tabular.csv");
    s.tabular.subject_id = sid;
    s.tabular.schema_id = cohort.schema.id;
    s.tabular.values = tab_it->second;
    auto lab_it = label_rows.find(sid);
    check_arg(lab_it != label_rows.end(),
              "load_cohort: subject '" + sid + "' missing from labels.csv");
    s.labels = lab_it->second;
    validate(s, cohort.schema);
    cohort.samples.push_back(std::move(s));
  }
  return cohort;
}

}  // namespace cardiomm
