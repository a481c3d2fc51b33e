#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "cxr/dataset.hpp"
#include "cxr/error.hpp"
#include "cxr/kvfile.hpp"
#include "cxr/rng.hpp"

namespace cxr {
namespace {

std::optional<MotifKind> kind_from(std::string_view s) {
  if (s == "blob") return MotifKind::Blob;
  if (s == "ring") return MotifKind::Ring;
  if (s == "bar") return MotifKind::Bar;
  if (s == "cross") return MotifKind::Cross;
  if (s == "box") return MotifKind::Box;
  if (s == "checker") return MotifKind::Checker;
  return std::nullopt;
}

bool on_bar(double u, double v, double half_len, double thickness) {
  return std::abs(u) <= half_len && std::abs(v) <= thickness / 2.0;
}

}  // namespace

std::string_view motif_kind_name(MotifKind kind) {
  switch (kind) {
    case MotifKind::Blob:
      return "blob";
    case MotifKind::Ring:
      return "ring";
    case MotifKind::Bar:
      return "bar";
    case MotifKind::Cross:
      return "cross";
    case MotifKind::Box:
      return "box";
    case MotifKind::Checker:
      return "checker";
  }
  return "?";
}

std::array<MotifSpec, kFindingCount> SynthSpec::default_layout(double prior) {
  // One 4x4 grid cell per finding; the shapes differ so that a translation
  // invariant detector can tell them apart.
  struct Shape {
    MotifKind kind;
    double size;
    double orientation;
  };
  static constexpr Shape shapes[kFindingCount] = {
      {MotifKind::Blob, 0.09, 0},   {MotifKind::Ring, 0.10, 0},    {MotifKind::Bar, 0.11, 0},
      {MotifKind::Bar, 0.11, 90},   {MotifKind::Bar, 0.11, 45},    {MotifKind::Bar, 0.11, 135},
      {MotifKind::Cross, 0.10, 0},  {MotifKind::Cross, 0.10, 45},  {MotifKind::Box, 0.09, 0},
      {MotifKind::Checker, 0.10, 0}, {MotifKind::Blob, 0.05, 0},   {MotifKind::Box, 0.06, 45},
      {MotifKind::Ring, 0.07, 0},   {MotifKind::Bar, 0.05, 0},
  };
  std::array<MotifSpec, kFindingCount> out{};
  for (std::size_t i = 0; i < kFindingCount; ++i) {
    MotifSpec m;
    m.kind = shapes[i].kind;
    m.size = shapes[i].size;
    m.orientation = shapes[i].orientation;
    m.x = (static_cast<double>(i % 4) + 0.5) / 4.0;
    m.y = (static_cast<double>(i / 4) + 0.5) / 4.0;
    m.thickness = m.kind == MotifKind::Checker ? 1.0 : 1.5;
    m.prior = prior;
    out[i] = m;
  }
  return out;
}

double motif_coverage(const MotifSpec& m, std::size_t image_size, double cx, double cy, double px,
                      double py) {
  const double extent = static_cast<double>(image_size);
  const double r = m.size * extent;
  const double dx = px - cx, dy = py - cy;
  const double theta = m.orientation * std::numbers::pi / 180.0;
  const double u = dx * std::cos(theta) + dy * std::sin(theta);
  const double v = -dx * std::sin(theta) + dy * std::cos(theta);
  bool hit = false;
  switch (m.kind) {
    case MotifKind::Blob:
      hit = std::hypot(dx, dy) <= r;
      break;
    case MotifKind::Ring:
      hit = std::abs(std::hypot(dx, dy) - r) <= m.thickness / 2.0;
      break;
    case MotifKind::Bar:
      hit = on_bar(u, v, r, m.thickness);
      break;
    case MotifKind::Cross:
      hit = on_bar(u, v, r, m.thickness) || on_bar(v, u, r, m.thickness);
      break;
    case MotifKind::Box:
      hit = std::abs(std::max(std::abs(u), std::abs(v)) - r) <= m.thickness / 2.0;
      break;
    case MotifKind::Checker: {
      if (std::abs(u) > r || std::abs(v) > r) break;
      const double cell = std::max(1.0, m.thickness);
      const auto iu = static_cast<long>(std::floor((u + r) / cell));
      const auto iv = static_cast<long>(std::floor((v + r) / cell));
      hit = ((iu + iv) % 2) == 0;
      break;
    }
  }
  return hit ? 1.0 : 0.0;
}

void SynthSpec::validate(const FindingCatalog& catalog) const {
  if (image_size < kMinImageExtent)
    throw DataError("synth: image_size must be at least 8, got " + std::to_string(image_size));
  if (samples == 0) throw DataError("synth: samples must be positive");
  if (!(noise >= 0.0 && noise < 1.0)) throw DataError("synth: noise must lie in [0,1)");
  if (!(uncertain_rate >= 0.0 && blank_rate >= 0.0 && uncertain_rate + blank_rate <= 1.0))
    throw DataError("synth: uncertain_rate and blank_rate must be non-negative and sum to <= 1");
  if (studies_per_patient == 0) throw DataError("synth: studies_per_patient must be positive");
  for (std::size_t i = 0; i < kFindingCount; ++i) {
    const MotifSpec& m = motifs[i];
    const auto where = [&] { return "synth: motif for '" + catalog.name(i) + "': "; };
    if (!(m.prior >= 0.0 && m.prior <= 1.0)) throw DataError(where() + "prior must lie in [0,1]");
    if (!(m.size > 0.0)) throw DataError(where() + "size must be positive");
    if (!(m.thickness > 0.0)) throw DataError(where() + "thickness must be positive");
    if (!(m.intensity > 0.0 && m.intensity <= 1.0))
      throw DataError(where() + "intensity must lie in (0,1]");
    if (!(m.jitter >= 0.0)) throw DataError(where() + "jitter must be non-negative");
  }
  if (!rule.empty()) Rule::parse(rule, catalog);
}

SynthSpec SynthSpec::parse(std::string_view text, const FindingCatalog& catalog) {
  const KeyValueFile kv = KeyValueFile::parse(text, "synth spec");
  SynthSpec spec;
  for (const auto& section : kv.sections()) {
    const bool is_motif = section.rfind("motif.", 0) == 0;
    if (section != "synth" && !is_motif)
      throw DataError("synth spec: unknown section [" + section + "]");
    for (const auto& key : kv.keys_in(section)) {
      static const std::vector<std::string> synth_keys = {
          "image_size", "samples",      "seed",  "noise", "uncertain_rate", "blank_rate",
          "studies_per_patient", "prior", "rule"};
      static const std::vector<std::string> motif_keys = {
          "kind", "x", "y", "size", "orientation", "thickness", "intensity", "jitter", "prior"};
      const std::string leaf = key.substr(section.size() + 1);
      const auto& allowed = is_motif ? motif_keys : synth_keys;
      if (std::find(allowed.begin(), allowed.end(), leaf) == allowed.end()) {
        throw DataError("synth spec line " + std::to_string(kv.line_of(key)) + ": unknown key '" +
                        key + "'");
      }
    }
  }

  spec.image_size = kv.get_uint("synth.image_size", spec.image_size);
  spec.samples = kv.get_uint("synth.samples", spec.samples);
  spec.seed = kv.get_uint("synth.seed", spec.seed);
  spec.noise = kv.get_double("synth.noise", spec.noise);
  spec.uncertain_rate = kv.get_double("synth.uncertain_rate", spec.uncertain_rate);
  spec.blank_rate = kv.get_double("synth.blank_rate", spec.blank_rate);
  spec.studies_per_patient = kv.get_uint("synth.studies_per_patient", spec.studies_per_patient);
  spec.rule = kv.get_or("synth.rule", "");
  spec.motifs = default_layout(kv.get_double("synth.prior", 0.3));

  for (const auto& section : kv.sections()) {
    if (section.rfind("motif.", 0) != 0) continue;
    const std::string ref = section.substr(6);
    std::optional<std::size_t> idx = catalog.index_of(ref);
    if (!idx && !ref.empty() && std::all_of(ref.begin(), ref.end(), ::isdigit)) {
      const std::size_t i = std::stoul(ref);
      if (i < kFindingCount) idx = i;
    }
    if (!idx) throw DataError("synth spec: [" + section + "] names no catalog finding");
    MotifSpec& m = spec.motifs[*idx];
    const std::string p = section + ".";
    if (auto k = kv.get(p + "kind")) {
      const auto kind = kind_from(*k);
      if (!kind) throw DataError("synth spec: " + p + "kind: unknown motif kind '" + *k + "'");
      m.kind = *kind;
    }
    m.x = kv.get_double(p + "x", m.x);
    m.y = kv.get_double(p + "y", m.y);
    m.size = kv.get_double(p + "size", m.size);
    m.orientation = kv.get_double(p + "orientation", m.orientation);
    m.thickness = kv.get_double(p + "thickness", m.thickness);
    m.intensity = kv.get_double(p + "intensity", m.intensity);
    m.jitter = kv.get_double(p + "jitter", m.jitter);
    m.prior = kv.get_double(p + "prior", m.prior);
  }
  spec.validate(catalog);
  return spec;
}

std::string SynthSpec::to_text(const FindingCatalog& catalog) const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "[synth]\n";
  out << "image_size = " << image_size << '\n';
  out << "samples = " << samples << '\n';
  out << "seed = " << seed << '\n';
  out << "noise = " << noise << '\n';
  out << "uncertain_rate = " << uncertain_rate << '\n';
  out << "blank_rate = " << blank_rate << '\n';
  out << "studies_per_patient = " << studies_per_patient << '\n';
  out << "rule = " << rule << '\n';
  for (std::size_t i = 0; i < kFindingCount; ++i) {
    const MotifSpec& m = motifs[i];
    out << "\n[motif." << catalog.name(i) << "]\n";
    out << "kind = " << motif_kind_name(m.kind) << '\n';
    out << "x = " << m.x << "\ny = " << m.y << "\nsize = " << m.size
        << "\norientation = " << m.orientation << "\nthickness = " << m.thickness
        << "\nintensity = " << m.intensity << "\njitter = " << m.jitter << "\nprior = " << m.prior
        << '\n';
  }
  return out.str();
}

SyntheticData generate_synthetic(const SynthSpec& spec, const FindingCatalog& catalog) {
  spec.validate(catalog);
  std::optional<Rule> rule;
  if (!spec.rule.empty()) rule = Rule::parse(spec.rule, catalog);

  Rng rng(spec.seed);
  const std::size_t s = spec.image_size;
  const double extent = static_cast<double>(s);
  SyntheticData out;
  out.studies.reserve(spec.samples);
  std::size_t patient = 0, remaining = 0;

  for (std::size_t n = 0; n < spec.samples; ++n) {
    if (remaining == 0) {
      ++patient;
      remaining = 1 + static_cast<std::size_t>(rng.below(spec.studies_per_patient));
    }
    --remaining;

    std::array<bool, kFindingCount> truth{};
    std::array<std::pair<double, double>, kFindingCount> centers{};
    for (std::size_t f = 0; f < kFindingCount; ++f) {
      const MotifSpec& m = spec.motifs[f];
      truth[f] = rng.bernoulli(m.prior);
      const double jx = rng.uniform(-1.0, 1.0) * m.jitter * extent;
      const double jy = rng.uniform(-1.0, 1.0) * m.jitter * extent;
      centers[f] = {m.x * extent + jx, m.y * extent + jy};
    }

    Image img(s, s, 0.0);
    for (std::size_t f = 0; f < kFindingCount; ++f) {
      if (!truth[f]) continue;
      const MotifSpec& m = spec.motifs[f];
      for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x) {
          const double c = motif_coverage(m, s, centers[f].first, centers[f].second,
                                          static_cast<double>(x) + 0.5,
                                          static_cast<double>(y) + 0.5);
          if (c > 0.0) img.at(y, x) = std::max(img.at(y, x), c * m.intensity);
        }
    }
    for (double& p : img.pixels) {
      if (spec.noise > 0.0) p += spec.noise * rng.normal();
      p = to_byte(p) / 255.0;
    }

    Study study;
    std::ostringstream id, pid;
    id << "images/s" << std::setw(5) << std::setfill('0') << n << ".pgm";
    pid << "patient" << std::setw(5) << std::setfill('0') << patient;
    study.id = id.str();
    study.patient_id = pid.str();
    study.image = std::move(img);
    for (std::size_t f = 0; f < kFindingCount; ++f) {
      const double u = rng.uniform();
      if (u < spec.blank_rate)
        study.marks[f] = LabelMark::Blank;
      else if (u < spec.blank_rate + spec.uncertain_rate)
        study.marks[f] = LabelMark::Uncertain;
      else
        study.marks[f] = truth[f] ? LabelMark::Positive : LabelMark::Negative;
    }
    if (rule) study.diagnosis = rule->evaluate(truth);

    out.studies.push_back(std::move(study));
    out.truths.push_back(truth);
    out.centers.push_back(centers);
  }
  return out;
}

}  // namespace cxr
