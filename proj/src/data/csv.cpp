#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "cxr/dataset.hpp"
#include "cxr/error.hpp"

namespace cxr {
namespace {

constexpr const char* kPathColumn = "Path";
constexpr const char* kPatientColumn = "PatientID";
constexpr const char* kDiagnosisColumn = "Diagnosis";

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string patient_from_path(const std::string& path) {
  static const std::regex pattern("(patient[0-9]+)");
  std::smatch m;
  if (std::regex_search(path, m, pattern)) return m[1];
  return {};
}

std::optional<std::optional<bool>> parse_diagnosis(std::string cell) {
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r')) cell.pop_back();
  while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
  if (cell.empty()) return std::optional<bool>{};
  if (cell == "1" || cell == "1.0") return std::optional<bool>{true};
  if (cell == "0" || cell == "0.0") return std::optional<bool>{false};
  return std::nullopt;
}

}  // namespace

std::vector<std::string> split_csv_record(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::vector<MarkCounts> count_marks(const std::vector<Study>& studies) {
  std::vector<MarkCounts> counts(kFindingCount);
  for (const auto& s : studies)
    for (std::size_t f = 0; f < kFindingCount; ++f) counts[f].add(s.marks[f]);
  return counts;
}

CsvLoadResult load_csv(const std::filesystem::path& labels, const std::filesystem::path& image_root,
                       const FindingCatalog& catalog, const CsvOptions& options) {
  std::ifstream in(labels);
  if (!in) throw DataError("cannot open label table " + labels.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(labels.string() + ": empty label table");
  const auto header = split_csv_record(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;

  const auto require = [&](const std::string& name) {
    const auto it = column.find(name);
    if (it == column.end())
      throw DataError(labels.string() + ": header is missing column '" + name + "'");
    return it->second;
  };
  const std::size_t path_col = require(kPathColumn);
  std::optional<std::size_t> patient_col, diagnosis_col;
  if (auto it = column.find(kPatientColumn); it != column.end()) patient_col = it->second;
  if (auto it = column.find(kDiagnosisColumn); it != column.end()) diagnosis_col = it->second;
  std::array<std::size_t, kFindingCount> finding_col{};
  for (std::size_t f = 0; f < catalog.size(); ++f) finding_col[f] = require(catalog.name(f));

  if ((options.target_height == 0) != (options.target_width == 0))
    throw UsageError("target resolution needs both height and width");

  CsvLoadResult result;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    try {
      const auto cells = split_csv_record(line);
      if (cells.size() != header.size())
        throw DataError("expected " + std::to_string(header.size()) + " cells, got " +
                        std::to_string(cells.size()));
      Study s;
      s.id = cells[path_col];
      if (s.id.empty()) throw DataError("empty Path cell");
      s.patient_id = patient_col ? cells[*patient_col] : patient_from_path(s.id);
      if (s.patient_id.empty()) throw DataError("no patient identifier for '" + s.id + "'");
      for (std::size_t f = 0; f < kFindingCount; ++f) {
        const auto mark = mark_from_cell(cells[finding_col[f]]);
        if (!mark)
          throw DataError("column '" + catalog.name(f) + "': unparseable cell '" +
                          cells[finding_col[f]] + "'");
        s.marks[f] = *mark;
      }
      if (diagnosis_col) {
        const auto d = parse_diagnosis(cells[*diagnosis_col]);
        if (!d) throw DataError("unparseable Diagnosis cell '" + cells[*diagnosis_col] + "'");
        s.diagnosis = *d;
      }
      const auto image_path = image_root / s.id;
      if (!std::filesystem::exists(image_path))
        throw DataError("missing image file " + image_path.string());
      s.image = read_image(image_path);
      if (options.target_height != 0)
        s.image = resize(s.image, options.target_height, options.target_width, options.resample);
      if (s.image.height < kMinImageExtent || s.image.width < kMinImageExtent)
        throw DataError("image " + image_path.string() + " is smaller than 8x8");
      result.studies.push_back(std::move(s));
    } catch (const DataError& e) {
      const std::string msg = labels.string() + " row " + std::to_string(row) + ": " + e.what();
      if (options.strict) throw DataError(msg);
      result.diagnostics.push_back(msg);
    }
  }
  return result;
}

std::string format_csv(const std::vector<Study>& studies, const FindingCatalog& catalog) {
  std::ostringstream out;
  out << kPathColumn << ',' << kPatientColumn;
  for (const auto& name : catalog.names()) out << ',' << quote_if_needed(name);
  out << ',' << kDiagnosisColumn << '\n';
  for (const auto& s : studies) {
    out << quote_if_needed(s.id) << ',' << quote_if_needed(s.patient_id);
    for (LabelMark m : s.marks) out << ',' << mark_to_cell(m);
    out << ',';
    if (s.diagnosis) out << (*s.diagnosis ? '1' : '0');
    out << '\n';
  }
  return out.str();
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Study>& studies,
                   const FindingCatalog& catalog) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& s : studies) {
    const auto path = dir / s.id;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw DataError("cannot create " + path.parent_path().string() + ": " + ec.message());
    write_image(path, s.image);
  }
  std::ofstream out(dir / "labels.csv", std::ios::binary);
  if (!out) throw DataError("cannot write " + (dir / "labels.csv").string());
  out << format_csv(studies, catalog);
}

}  // namespace cxr
