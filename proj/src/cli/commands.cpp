#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cxr/cli.hpp"
#include "cxr/dataset.hpp"
#include "cxr/dense_head.hpp"
#include "cxr/error.hpp"
#include "cxr/gradcam.hpp"
#include "cxr/metrics.hpp"

namespace cxr::cli {
namespace {

namespace fs = std::filesystem;

void log(const std::string& msg) { std::cerr << "[cxr] " << msg << '\n'; }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw DataError("cannot create output directory " + dir.string() +
                    (ec ? ": " + ec.message() : std::string()));
  const fs::path probe = dir / ".write_check";
  {
    std::ofstream out(probe);
    if (!out) throw DataError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string slug(std::string_view name) {
  std::string out;
  for (char c : name)
    out += std::isalnum(static_cast<unsigned char>(c))
               ? static_cast<char>(std::tolower(static_cast<unsigned char>(c)))
               : '_';
  return out;
}

FindingCatalog load_catalog(const RunConfig& cfg) {
  const std::string schema = cfg.get("data.schema");
  return schema.empty() ? FindingCatalog::default_catalog() : FindingCatalog::load(schema);
}

std::vector<Study> load_dataset(const RunConfig& cfg, const FindingCatalog& catalog) {
  const std::string dir = cfg.get("data.dir");
  std::string labels = cfg.get("data.labels");
  if (labels.empty()) {
    if (dir.empty()) throw UsageError("no dataset: set --data or data.dir");
    labels = (fs::path(dir) / "labels.csv").string();
  }
  const fs::path root = dir.empty() ? fs::path(labels).parent_path() : fs::path(dir);
  CsvOptions options;
  options.strict = cfg.get_bool("data.strict");
  options.target_height = options.target_width = cfg.get_size("data.image_size");
  auto loaded = load_csv(labels, root, catalog, options);
  for (const auto& d : loaded.diagnostics) log("skipped " + d);
  if (loaded.studies.empty()) throw DataError(labels + ": no usable studies");
  log("loaded " + std::to_string(loaded.studies.size()) + " studies from " + labels);
  return std::move(loaded.studies);
}

SplitPlan load_split(const fs::path& path) { return SplitPlan::parse(read_text(path)); }

fs::path default_split_path(const fs::path& model) { return model.parent_path() / "split.txt"; }

std::vector<int> diagnosis_labels(const std::vector<Study>& studies) {
  std::vector<int> labels;
  labels.reserve(studies.size());
  for (const Study& s : studies) {
    if (!s.diagnosis) throw DataError("study " + s.id + " has no diagnosis label");
    labels.push_back(*s.diagnosis ? 1 : 0);
  }
  return labels;
}

std::vector<Image> images_of(const std::vector<Study>& studies) {
  std::vector<Image> out;
  out.reserve(studies.size());
  for (const Study& s : studies) out.push_back(s.image);
  return out;
}

// Trained stage-two classifier as stored by train-diagnosis.
struct Head {
  std::string kind;
  std::optional<DecisionTree> tree;
  std::optional<DenseHead> dense;

  static Head load(const fs::path& dir) {
    Head h;
    std::istringstream in(read_text(dir / "head.txt"));
    std::string word;
    if (!(in >> word >> h.kind) || word != "kind" || (h.kind != "tree" && h.kind != "dense"))
      throw DataError((dir / "head.txt").string() + ": expected 'kind tree' or 'kind dense'");
    if (h.kind == "tree")
      h.tree = DecisionTree::parse(read_text(dir / "tree.txt"));
    else
      h.dense = DenseHead::load(dir / "head.params");
    return h;
  }

  double score(const FindingVector& v) const {
    return tree ? tree->predict(v).probability : dense->predict(v);
  }
};

// ---- subcommands -------------------------------------------------------

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;

  RunConfig resolve() const {
    const fs::path p(config);
    return RunConfig::resolve(config.empty() ? nullptr : &p, sets);
  }
};

void cmd_synth(RunConfig cfg, const fs::path& out) {
  const std::string spec_path = cfg.get("synth.spec");
  if (spec_path.empty()) throw UsageError("synth needs --spec or synth.spec");
  const FindingCatalog catalog = load_catalog(cfg);
  const std::string text = read_text(spec_path);
  SynthSpec spec;
  try {
    spec = SynthSpec::parse(text, catalog);
  } catch (const DataError& e) {
    throw DataError(spec_path + ": " + e.what());
  }
  prepare_dir(out);
  const SyntheticData data = generate_synthetic(spec, catalog);
  write_dataset(out, data.studies, catalog);
  write_text(out / "synth_spec.txt", text);
  std::ostringstream manifest;
  manifest << "generator cxr-synth 1\nseed " << spec.seed << "\nsamples " << data.studies.size()
           << "\npatients " << patients_of(data.studies).size() << "\nspec_fnv1a64 "
           << hex(fnv1a(text)) << '\n';
  write_text(out / "manifest.txt", manifest.str());
  cfg.set("synth.spec", (out / "synth_spec.txt").string());
  cfg.write_snapshot(out);
  log("wrote " + std::to_string(data.studies.size()) + " studies to " + out.string());
}

void cmd_train_findings(RunConfig cfg, const fs::path& out) {
  const FindingCatalog catalog = load_catalog(cfg);
  const std::vector<Study> studies = load_dataset(cfg, catalog);
  prepare_dir(out);

  const SplitPlan plan = cfg.get_bool("split.leaky")
                             ? leaky_image_split(studies, cfg.get_double("split.ratio"),
                                                 cfg.get_u64("split.seed"))
                             : patient_split(studies, cfg.get_double("split.ratio"),
                                             cfg.get_u64("split.seed"));
  if (plan.mode == SplitMode::LeakyImage)
    log("warning: leaky image-level split; held-out metrics will be optimistic");
  write_text(out / "split.txt", plan.to_text());
  const auto train = select_train(studies, plan);
  const auto held_out = select_test(studies, plan);
  log("split: " + std::to_string(train.size()) + " training and " +
      std::to_string(held_out.size()) + " held-out studies");

  const std::string spec_file = cfg.get("model.spec");
  const std::string spec_text =
      spec_file.empty()
          ? default_findings_spec_text(studies.front().image.height, studies.front().image.width)
          : read_text(spec_file);
  FindingsModel model(nn::ModelSpec::parse(spec_text), {cfg.get_u64("model.seed"), false});

  const TrainConfig tc = cfg.findings_train();
  const auto result = train_findings(model, train, tc, &held_out, [&](const EpochLog& e) {
    double lo = 1.0;
    std::size_t n = 0;
    for (const auto& a : e.validation_auc)
      if (a) lo = std::min(lo, *a), ++n;
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %zu/%zu loss %.6f min held-out AUC %.4f (%zu findings)",
                  e.epoch, tc.epochs, e.loss, n ? lo : 0.0, n);
    log(buf);
  });
  for (const auto& w : result.balance.warnings) log("warning: " + w);

  std::ostringstream weights;
  weights << "finding\tw_pos\tw_neg\n";
  for (std::size_t f = 0; f < catalog.size(); ++f)
    weights << catalog.name(f) << '\t' << g17(result.balance.weights[f].positive) << '\t'
            << g17(result.balance.weights[f].negative) << '\n';
  write_text(out / "class_weights.tsv", weights.str());
  write_text(out / "loss_trace.tsv", format_loss_trace(result.trace, catalog));
  model.save(out / "findings.model");
  cfg.write_snapshot(out);
  log("saved " + (out / "findings.model").string());
}

void cmd_train_diagnosis(RunConfig cfg, const fs::path& model_path, const fs::path& split_path,
                         const fs::path& out) {
  const std::string kind = cfg.get("head.kind");
  const FindingCatalog catalog = load_catalog(cfg);
  const FindingsModel model = freeze(FindingsModel::load(model_path));
  const std::vector<Study> studies = load_dataset(cfg, catalog);
  const SplitPlan plan = load_split(split_path);
  const auto train = select_train(studies, plan);
  if (train.empty()) throw DataError("no training studies match " + split_path.string());
  const auto labels = diagnosis_labels(train);
  prepare_dir(out);

  const auto features = model.predict_batch(images_of(train));
  if (kind == "tree") {
    SampleSet samples;
    samples.feature_count = kFindingCount;
    for (std::size_t i = 0; i < train.size(); ++i) samples.add(features[i], labels[i]);
    const DecisionTree tree = DecisionTree::fit(samples, cfg.tree_params());
    write_text(out / "tree.txt", tree.to_text());
    write_text(out / "tree.dot", tree.to_dot(catalog.names()));
    std::string used;
    for (std::size_t f : tree.split_features()) used += (used.empty() ? "" : ", ") + catalog.name(f);
    log("tree: " + std::to_string(tree.nodes().size()) + " nodes, depth " +
        std::to_string(tree.depth()) + ", splits on: " + (used.empty() ? "(none)" : used));
  } else {
    DenseHeadConfig hc;
    hc.train = cfg.head_train();
    hc.hidden = cfg.get_size("head.hidden");
    DenseFitResult fit;
    const DenseHead head = fit_dense_head(features, labels, hc, &fit);
    head.save(out / "head.params");
    if (!fit.epoch_loss.empty()) log("dense head final loss " + g17(fit.epoch_loss.back()));
  }
  write_text(out / "head.txt", "kind " + kind + "\n");
  cfg.write_snapshot(out);
  log("saved " + kind + " head to " + out.string());
}

void cmd_evaluate(RunConfig cfg, const fs::path& model_path, const fs::path& split_path,
                  const fs::path& head_dir, const std::string& subset, const fs::path& out) {
  const FindingCatalog catalog = load_catalog(cfg);
  const FindingsModel model = freeze(FindingsModel::load(model_path));
  const Head head = Head::load(head_dir);
  const std::vector<Study> studies = load_dataset(cfg, catalog);
  const SplitPlan plan = load_split(split_path);

  std::vector<Study> eval;
  if (subset == "train") {
    eval = select_train(studies, plan);
    log("evaluating on the TRAINING side (sanity check, not a held-out result)");
  } else {
    eval = subset == "test" ? select_test(studies, plan) : studies;
    const std::set<std::string> train_side(plan.train.begin(), plan.train.end());
    for (const Study& s : eval) {
      const std::string& key = plan.mode == SplitMode::Patient ? s.patient_id : s.id;
      if (train_side.count(key))
        throw DataError("patient overlap: " + key + " (study " + s.id +
                        ") is on the training side of " + split_path.string());
    }
  }
  if (eval.empty()) throw DataError("evaluation set is empty");
  const auto labels = diagnosis_labels(eval);
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size()))
    throw DataError(std::string("evaluation set has no ") + (pos == 0 ? "positive" : "negative") +
                    " diagnoses; sensitivity, specificity and AUC need both classes");
  prepare_dir(out);

  const auto features = model.predict_batch(images_of(eval));
  std::vector<double> scores;
  scores.reserve(eval.size());
  for (const auto& v : features) scores.push_back(head.score(v));

  const double fixed = cfg.get_double("eval.threshold");
  const OperatingPoint yj = youden_threshold(scores, labels);
  const std::vector<MetricRow> rows = {metric_row("fixed", scores, labels, fixed),
                                       metric_row("youden", scores, labels, yj.threshold)};
  std::string table = format_metric_table(rows);
  table += "\nfixed: threshold from eval.threshold\n"
           "youden: threshold maximizing sensitivity + specificity - 1 on this same set "
           "(optimistic)\n";
  write_text(out / "metrics.txt", table);
  write_text(out / "metrics.csv", format_metric_csv(rows));
  write_text(out / "roc.csv", format_roc_csv(roc_curve(scores, labels)));

  std::ostringstream preds;
  preds << "study,patient,diagnosis,score,predicted\n";
  for (std::size_t i = 0; i < eval.size(); ++i)
    preds << eval[i].id << ',' << eval[i].patient_id << ',' << labels[i] << ',' << g17(scores[i])
          << ',' << (scores[i] > fixed ? 1 : 0) << '\n';
  write_text(out / "predictions.csv", preds.str());

  const auto aucs = finding_aucs(features, eval);
  std::ostringstream fa;
  fa << "finding,auc\n";
  for (std::size_t f = 0; f < catalog.size(); ++f)
    fa << catalog.name(f) << ',' << (aucs[f] ? g17(*aucs[f]) : std::string()) << '\n';
  write_text(out / "findings_auc.csv", fa.str());
  cfg.write_snapshot(out);
  std::cerr << table;
}

void cmd_explain(RunConfig cfg, const fs::path& model_path, const fs::path& head_dir,
                 const std::string& study_id, const std::vector<std::string>& extra_findings,
                 const fs::path& out) {
  const FindingCatalog catalog = load_catalog(cfg);
  const FindingsModel model = freeze(FindingsModel::load(model_path));
  const std::vector<Study> studies = load_dataset(cfg, catalog);
  const auto it = std::find_if(studies.begin(), studies.end(),
                               [&](const Study& s) { return s.id == study_id; });
  if (it == studies.end()) throw DataError("unknown study id '" + study_id + "'");
  const Study& study = *it;

  std::vector<std::size_t> targets;
  for (const auto& name : extra_findings) {
    const auto idx = catalog.index_of(name);
    if (!idx) throw UsageError("unknown finding '" + name + "'");
    targets.push_back(*idx);
  }
  prepare_dir(out);

  GradCamOptions cam;
  cam.layer = cfg.get("explain.layer");
  cam.upsample =
      cfg.get("explain.upsample") == "nearest" ? Resample::Nearest : Resample::Bilinear;
  const double alpha = cfg.get_double("explain.alpha");

  const FindingVector v = model.predict(study.image);
  std::ostringstream fv;
  fv << "finding\tprobability\n";
  for (std::size_t f = 0; f < catalog.size(); ++f) fv << catalog.name(f) << '\t' << g17(v[f]) << '\n';
  write_text(out / "findings.tsv", fv.str());

  std::ostringstream summary;
  summary << "study " << study.id << "\npatient " << study.patient_id << '\n';
  if (study.diagnosis) summary << "label " << (*study.diagnosis ? "positive" : "negative") << '\n';

  const auto emit = [&](const std::string& name, const Image& heat) {
    if (std::all_of(heat.pixels.begin(), heat.pixels.end(), [](double v) { return v == 0.0; }))
      log("warning: heatmap " + name +
          " is all zero (no positive gradient-weighted evidence at the feature layer)");
    write_png(out / ("heatmap_" + name + ".png"), heat);
    write_png_rgb(out / ("overlay_" + name + ".png"), overlay(study.image, heat, alpha));
    summary << "heatmap " << name << '\n';
  };

  if (!head_dir.empty()) {
    const Head head = Head::load(head_dir);
    if (head.tree) {
      const TreePrediction p = head.tree->predict(v, &catalog.names());
      if (replay(*head.tree, p.path, v) != p.path.leaf)
        throw NumericError("decision path replay did not reach the reported leaf");
      write_text(out / "decision_path.txt", p.path.to_text());
      summary << "diagnosis " << (p.positive ? "positive" : "negative") << "\nprobability "
              << g17(p.probability) << '\n';
      for (const PathStep& s : p.path.steps) targets.push_back(s.feature);
    } else {
      const double p = head.dense->predict(v);
      summary << "diagnosis " << (p > cfg.get_double("eval.threshold") ? "positive" : "negative")
              << "\nprobability " << g17(p) << '\n';
      emit("diagnosis", grad_cam_diagnosis(model, *head.dense, study.image, cam));
    }
  }
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  if (targets.empty() && head_dir.empty())
    throw UsageError("explain needs --diagnosis or at least one --finding");
  for (std::size_t f : targets) emit(slug(catalog.name(f)), grad_cam_finding(model, study.image, f, cam));

  write_text(out / "explanation.txt", summary.str());
  cfg.write_snapshot(out);
  log("wrote explanation bundle to " + out.string());
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Two-step radiograph pipeline: findings from images, diagnosis from findings", "cxr"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("-c,--config", common.config, "run config file (sectioned key = value)");
  app.add_option("--set", common.sets, "override one config key: section.key=value")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  std::string data_dir;
  app.add_option("--data", data_dir, "dataset directory (data.dir)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic planted-rule dataset");
  std::string spec;
  synth->add_option("--spec", spec, "synthetic spec file (synth.spec)");
  synth->add_option("-o,--out", common.out, "output dataset directory")->required();

  auto* tf = app.add_subcommand("train-findings", "train the stage-one findings model");
  tf->add_option("-o,--out", common.out, "output directory")->required();

  auto* td = app.add_subcommand("train-diagnosis", "fit a diagnosis head on frozen findings");
  std::string model, split, head_kind, head_dir, subset = "test", study;
  std::vector<std::string> findings;
  td->add_option("--model", model, "findings model file")->required();
  td->add_option("--split", split, "split manifest (default: next to the model)");
  td->add_option("--head", head_kind, "tree or dense (head.kind)")
      ->check(CLI::IsMember({"tree", "dense"}));
  td->add_option("-o,--out", common.out, "output directory")->required();

  auto* ev = app.add_subcommand("evaluate", "report sensitivity, specificity, BA and AUC");
  ev->add_option("--model", model, "findings model file")->required();
  ev->add_option("--diagnosis", head_dir, "train-diagnosis output directory")->required();
  ev->add_option("--split", split, "split manifest (default: next to the model)");
  ev->add_option("--subset", subset, "test (default), train (sanity only) or all")
      ->check(CLI::IsMember({"test", "train", "all"}));
  ev->add_option("-o,--out", common.out, "output directory")->required();

  auto* ex = app.add_subcommand("explain", "Grad-CAM heatmaps and decision path for one study");
  ex->add_option("--model", model, "findings model file")->required();
  ex->add_option("--diagnosis", head_dir, "train-diagnosis output directory");
  ex->add_option("--study", study, "study id (the Path cell)")->required();
  ex->add_option("--finding", findings, "also explain this finding")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  ex->add_option("-o,--out", common.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    RunConfig cfg = common.resolve();
    if (!data_dir.empty()) cfg.set("data.dir", data_dir);
    if (!spec.empty()) cfg.set("synth.spec", spec);
    if (!head_kind.empty()) cfg.set("head.kind", head_kind);
    const fs::path out(common.out);
    const fs::path split_path = split.empty() ? default_split_path(model) : fs::path(split);
    if (synth->parsed())
      cmd_synth(cfg, out);
    else if (tf->parsed())
      cmd_train_findings(cfg, out);
    else if (td->parsed())
      cmd_train_diagnosis(cfg, model, split_path, out);
    else if (ev->parsed())
      cmd_evaluate(cfg, model, split_path, head_dir, subset, out);
    else
      cmd_explain(cfg, model, head_dir, study, findings, out);
  } catch (const std::exception& e) {
    std::cerr << "cxr: error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kOk;
}

}  // namespace cxr::cli
