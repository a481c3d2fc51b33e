#pragma once
// Studies, label-table ingestion, patient-level splits, synthetic data.
//
// Label CSV (header required, extra columns ignored):
//   Path        image path relative to the image root (PGM P5 or PNG)
//   PatientID   opaque patient identifier; when the column is absent the
//               first "patient<digits>" component of Path is used
//   <finding>   one column per catalog finding; 1.0 = P, 0.0 = N,
//               -1.0 = U, empty = blank
//   Diagnosis   optional; 1 / 0 / empty

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cxr/image.hpp"
#include "cxr/labels.hpp"

namespace cxr {

using MarkArray = std::array<LabelMark, kFindingCount>;

inline constexpr std::size_t kMinImageExtent = 8;

struct Study {
  std::string id;  // the Path cell; unique within a dataset
  std::string patient_id;
  Image image;
  MarkArray marks{};
  std::optional<bool> diagnosis;
};

std::vector<MarkCounts> count_marks(const std::vector<Study>& studies);

// ---- CSV ---------------------------------------------------------------

struct CsvOptions {
  bool strict = true;
  // 0 keeps each image at its stored resolution.
  std::size_t target_height = 0;
  std::size_t target_width = 0;
  Resample resample = Resample::Bilinear;
};

struct CsvLoadResult {
  std::vector<Study> studies;  // CSV row order
  // "row N: ..." for every skipped row (lenient mode).
  std::vector<std::string> diagnostics;
};

// Strict mode throws DataError at the first bad row; lenient mode skips it.
CsvLoadResult load_csv(const std::filesystem::path& labels, const std::filesystem::path& image_root,
                       const FindingCatalog& catalog, const CsvOptions& options = {});

std::string format_csv(const std::vector<Study>& studies, const FindingCatalog& catalog);

// Writes <dir>/labels.csv and each study's image at <dir>/<study.id>.
void write_dataset(const std::filesystem::path& dir, const std::vector<Study>& studies,
                   const FindingCatalog& catalog);

// Splits one CSV record (RFC 4180 quoting).
std::vector<std::string> split_csv_record(const std::string& line);

// ---- splits ------------------------------------------------------------

enum class SplitMode { Patient, LeakyImage };

struct SplitPlan {
  SplitMode mode = SplitMode::Patient;
  std::uint64_t seed = 0;
  double ratio = 0.7;
  // Patient ids (Patient mode) or study ids (LeakyImage mode), sorted.
  std::vector<std::string> train;
  std::vector<std::string> test;

  bool operator==(const SplitPlan&) const = default;

  bool in_train(const Study& s) const;
  bool in_test(const Study& s) const;

  std::string to_text() const;
  static SplitPlan parse(std::string_view text);
};

// Train count = round(ratio * patients), halves rounded toward train.
SplitPlan patient_split(const std::vector<Study>& studies, double ratio, std::uint64_t seed);
// Ablation only: ignores patient grouping.
SplitPlan leaky_image_split(const std::vector<Study>& studies, double ratio, std::uint64_t seed);

std::vector<Study> select_train(const std::vector<Study>& studies, const SplitPlan& plan);
std::vector<Study> select_test(const std::vector<Study>& studies, const SplitPlan& plan);
std::vector<std::string> patients_of(const std::vector<Study>& studies);

// ---- diagnosis rules ---------------------------------------------------

// Boolean expression over findings: AND, OR, NOT (also &&, ||, !), parens.
// Findings are written as finding_<index>, "Quoted Name", or the name with
// spaces replaced by underscores (case-insensitive).
class Rule {
 public:
  static Rule parse(std::string_view text, const FindingCatalog& catalog);

  bool evaluate(const std::array<bool, kFindingCount>& truths) const;
  // Sorted, unique.
  std::vector<std::size_t> findings() const;
  const std::string& text() const { return text_; }

  struct Node {
    enum class Op { Finding, Not, And, Or } op = Op::Finding;
    std::size_t finding = 0;
    std::size_t lhs = 0;
    std::size_t rhs = 0;
  };

 private:
  bool eval(std::size_t node, const std::array<bool, kFindingCount>& truths) const;
  std::string text_;
  std::vector<Node> nodes_;
  std::size_t root_ = 0;
};

// ---- synthetic generator -----------------------------------------------

enum class MotifKind { Blob, Ring, Bar, Cross, Box, Checker };

std::string_view motif_kind_name(MotifKind kind);

struct MotifSpec {
  MotifKind kind = MotifKind::Blob;
  double x = 0.5;            // center, fraction of width
  double y = 0.5;            // center, fraction of height
  double size = 0.1;         // radius / half-length, fraction of image extent
  double orientation = 0.0;  // degrees, bars and crosses
  double thickness = 1.5;    // pixels, strokes
  double intensity = 1.0;
  double jitter = 0.0;       // max center offset, fraction of image extent
  double prior = 0.3;        // probability the finding is present

  bool operator==(const MotifSpec&) const = default;
};

// Key-value text, sections in brackets, '#' comments:
//
//   [synth]
//   image_size = 32         # square images, >= 8
//   samples = 2000
//   seed = 42
//   noise = 0.1             # Gaussian sigma, in [0,1)
//   uncertain_rate = 0.0    # per-mark probability of becoming U
//   blank_rate = 0.0        # per-mark probability of becoming blank
//   studies_per_patient = 3 # each patient gets 1..n studies
//   prior = 0.3             # default prior for every motif
//   rule = Edema AND NOT Pneumothorax
//
//   [motif.<index or finding name>]
//   kind = blob|ring|bar|cross|box|checker
//   x, y, size, orientation, thickness, intensity, jitter, prior
//
// Motifs not mentioned keep the built-in layout: a 4x4 grid of distinct
// shapes, one cell per finding.
struct SynthSpec {
  std::size_t image_size = 32;
  std::size_t samples = 100;
  std::uint64_t seed = 1;
  double noise = 0.0;
  double uncertain_rate = 0.0;
  double blank_rate = 0.0;
  std::size_t studies_per_patient = 1;
  std::string rule;
  std::array<MotifSpec, kFindingCount> motifs = default_layout();

  static std::array<MotifSpec, kFindingCount> default_layout(double prior = 0.3);
  static SynthSpec parse(std::string_view text, const FindingCatalog& catalog);
  std::string to_text(const FindingCatalog& catalog) const;
  void validate(const FindingCatalog& catalog) const;

  bool operator==(const SynthSpec&) const = default;
};

struct SyntheticData {
  std::vector<Study> studies;
  std::vector<std::array<bool, kFindingCount>> truths;
  // Motif centers actually used, in pixels (x, y), per study and finding.
  std::vector<std::array<std::pair<double, double>, kFindingCount>> centers;
};

SyntheticData generate_synthetic(const SynthSpec& spec, const FindingCatalog& catalog);

// Intensity of one motif at a pixel given its center in pixels, in [0,1].
double motif_coverage(const MotifSpec& motif, std::size_t image_size, double cx, double cy,
                      double px, double py);

}  // namespace cxr
