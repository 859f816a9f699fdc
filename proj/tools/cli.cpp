#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "reidrank/dataset_combiner.hpp"
#include "reidrank/embedding_store.hpp"
#include "reidrank/error.hpp"
#include "reidrank/hcn.hpp"
#include "reidrank/kreciprocal.hpp"
#include "reidrank/metric_space.hpp"
#include "reidrank/parallel.hpp"
#include "reidrank/report_io.hpp"
#include "reidrank/retrieval_eval.hpp"
#include "reidrank/rng.hpp"

namespace reidrank::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr std::uint64_t kDefaultSeed = 20180101;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBadMagic:
    case ErrorCode::kUnsupportedVersion:
    case ErrorCode::kZeroDimension:
    case ErrorCode::kTruncated:
    case ErrorCode::kTrailingData:
    case ErrorCode::kNonFinite:
    case ErrorCode::kInvalidSet:
    case ErrorCode::kInvalidManifest:
    case ErrorCode::kNotSquare:
    case ErrorCode::kNotPsd:
    case ErrorCode::kUnknownLabel:
      return kExitMalformedInput;
    case ErrorCode::kDimensionMismatch:
      return kExitDimensionMismatch;
    case ErrorCode::kOutOfRange:
      return kExitParameterRange;
    case ErrorCode::kNoRelevant:
      return kExitNoRelevant;
    case ErrorCode::kDuplicateTag:
      return kExitDuplicateTag;
    case ErrorCode::kShapeMismatch:
      return kExitBadShape;
    case ErrorCode::kIo:
    case ErrorCode::kEmptyInput:
      return kExitUsage;
  }
  return kExitUsage;
}

struct MetricFlags {
  std::string metric = "euclid";
  std::string matrix_path;
};

struct RerankFlags {
  std::size_t k = RerankParams{}.k;
  double lambda = RerankParams{}.lambda;
  double overlap = RerankParams{}.expansion_overlap;
};

struct RunConfig {
  std::string probes;
  std::string gallery;
  std::string ranks;
  std::string input;
  std::string tag;
  std::vector<std::string> manifests;
  MetricFlags metric;
  RerankFlags rerank;
  std::string junk_filter = "on";
  std::size_t max_rank = 0;
  std::string out_dir = ".";
  std::uint64_t seed = kDefaultSeed;
  std::size_t height = 64;
  std::size_t width = 32;
  std::size_t channels = 256;
  std::size_t classes = 10;
  std::size_t cases = 100;
  double dropout_rate = 0.5;
};

void add_metric_flags(CLI::App* cmd, MetricFlags& flags) {
  cmd->add_option("--metric", flags.metric, "Distance: euclid or mahal")
      ->check(CLI::IsMember({"euclid", "mahal"}))
      ->capture_default_str();
  cmd->add_option("--mahal-matrix", flags.matrix_path, "REIM matrix file for --metric mahal");
}

MetricConfig load_metric(const MetricFlags& flags) {
  if (flags.metric == "euclid") return MetricConfig::euclidean();
  if (flags.matrix_path.empty()) {
    fail(ErrorCode::kIo, "--metric mahal requires --mahal-matrix PATH");
  }
  try {
    return MetricConfig::mahalanobis(read_matrix_file(flags.matrix_path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNotPsd || e.code() == ErrorCode::kNotSquare) {
      throw Error(e.code(), flags.matrix_path + ": " + e.what());
    }
    throw;
  }
}

void check_dimensions(const EmbeddingSet& probes, const EmbeddingSet& gallery,
                      const MetricConfig& metric) {
  if (probes.dimension != gallery.dimension) {
    fail(ErrorCode::kDimensionMismatch,
         "probe dimension " + std::to_string(probes.dimension) + " differs from gallery dimension " +
             std::to_string(gallery.dimension));
  }
  if (metric.matrix() && metric.matrix()->rows != probes.dimension) {
    fail(ErrorCode::kDimensionMismatch, "Mahalanobis matrix side " +
                                            std::to_string(metric.matrix()->rows) +
                                            " differs from embedding dimension " +
                                            std::to_string(probes.dimension));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  f << text;
  if (!f) fail(ErrorCode::kIo, "failed writing " + path.string());
}

template <typename Writer>
void write_stream(const fs::path& path, Writer&& writer) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  writer(f);
  if (!f) fail(ErrorCode::kIo, "failed writing " + path.string());
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

Json base_parameters(const std::string& command, const RunConfig& cfg) {
  Json p;
  p["command"] = command;
  p["seed"] = cfg.seed;
  return p;
}

void write_rank_outputs(const fs::path& dir, const std::string& stem,
                        const std::vector<RankList>& lists, const EmbeddingSet& probes,
                        const EmbeddingSet& gallery, const Json& params) {
  write_stream(dir / (stem + ".csv"),
               [&](std::ostream& os) { write_rank_csv(os, lists, probes, gallery); });
  write_text(dir / (stem + ".json"), rank_lists_json(lists, probes, gallery, params.dump()));
}

// --- ingest ---------------------------------------------------------------

EmbeddingSet parse_embedding_csv(const fs::path& path, const std::string& tag) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  EmbeddingSet set;
  set.dataset_tag = tag;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.rfind("record_id", 0) == 0 || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() < 4) {
      fail(ErrorCode::kInvalidSet, path.string() + ":" + std::to_string(line_no) +
                                       ": need record_id,person_label,camera_id and >= 1 value");
    }
    EmbeddingRecord rec;
    try {
      rec.record_id = static_cast<std::uint32_t>(std::stoul(fields[0]));
      rec.person_label = static_cast<std::uint32_t>(std::stoul(fields[1]));
      rec.camera_id = static_cast<std::uint16_t>(std::stoul(fields[2]));
      for (std::size_t i = 3; i < fields.size(); ++i) rec.vector.push_back(std::stof(fields[i]));
    } catch (const std::exception&) {
      fail(ErrorCode::kInvalidSet,
           path.string() + ":" + std::to_string(line_no) + ": unparsable field");
    }
    if (set.dimension == 0) set.dimension = static_cast<std::uint32_t>(rec.vector.size());
    set.records.push_back(std::move(rec));
  }
  if (set.records.empty()) fail(ErrorCode::kZeroDimension, path.string() + ": no records");
  if (auto violations = validate_set(set); !violations.empty()) {
    fail(ErrorCode::kInvalidSet, path.string() + ": " + violations.front().message);
  }
  return set;
}

int cmd_ingest(const RunConfig& cfg, std::ostream& out) {
  const fs::path input(cfg.input);
  const auto dir = prepare_out_dir(cfg.out_dir);
  const std::string stem = input.stem().string();
  EmbeddingSet set;
  if (input.extension() == ".csv") {
    set = parse_embedding_csv(input, cfg.tag.empty() ? stem : cfg.tag);
    write_set_file(set, dir / (stem + ".reid"));
  } else {
    set = read_set_file(input);
    if (!cfg.tag.empty() && cfg.tag != set.dataset_tag) {
      set.dataset_tag = cfg.tag;
      write_set_file(set, dir / (stem + ".reid"));
    }
  }
  write_text(dir / (stem + ".json"), manifest_sidecar_json(set));
  write_text(dir / (stem + ".manifest.json"), manifest_json(DatasetManifest::from_set(set)));
  out << "ingested " << set.size() << " records, dimension " << set.dimension << ", "
      << set.identity_count() << " identities (tag '" << set.dataset_tag << "')\n";
  return kExitOk;
}

// --- rank / rerank ---------------------------------------------------------

int cmd_rank(const RunConfig& cfg, std::ostream& out) {
  const auto probes = read_set_file(cfg.probes);
  const auto gallery = read_set_file(cfg.gallery);
  const auto metric = load_metric(cfg.metric);
  check_dimensions(probes, gallery, metric);

  const auto matrix = pairwise_matrix(probes, gallery, metric);
  const auto lists = initial_rank_lists(matrix);

  Json params = base_parameters("rank", cfg);
  params["metric"] = cfg.metric.metric;
  params["mahal_matrix"] = cfg.metric.matrix_path;
  params["probes"] = cfg.probes;
  params["gallery"] = cfg.gallery;

  const auto dir = prepare_out_dir(cfg.out_dir);
  write_rank_outputs(dir, "initial", lists, probes, gallery, params);
  write_text(dir / "params.json", params.dump(2) + "\n");
  out << "ranked " << probes.size() << " probes against " << gallery.size()
      << " gallery items\n";
  return kExitOk;
}

int cmd_rerank(const RunConfig& cfg, std::ostream& out) {
  const auto probes = read_set_file(cfg.probes);
  const auto gallery = read_set_file(cfg.gallery);
  const auto metric = load_metric(cfg.metric);
  check_dimensions(probes, gallery, metric);

  const RerankParams params{cfg.rerank.k, cfg.rerank.lambda, cfg.rerank.overlap};
  validate_params(params, gallery.size() + 1);
  const auto result = rerank(probes, gallery, metric, params);

  Json record = base_parameters("rerank", cfg);
  record["metric"] = cfg.metric.metric;
  record["mahal_matrix"] = cfg.metric.matrix_path;
  record["probes"] = cfg.probes;
  record["gallery"] = cfg.gallery;
  record["k"] = params.k;
  record["half_k"] = half_k(params.k);
  record["lambda"] = params.lambda;
  record["expansion_overlap"] = params.expansion_overlap;
  record["original_distance_normalization"] = "min-max per probe row";
  record["jaccard"] = "hard set";

  const auto dir = prepare_out_dir(cfg.out_dir);
  write_rank_outputs(dir, "initial", result.initial, probes, gallery, record);
  write_rank_outputs(dir, "reranked", result.reranked, probes, gallery, record);
  write_text(dir / "params.json", record.dump(2) + "\n");
  out << "re-ranked " << probes.size() << " probes against " << gallery.size()
      << " gallery items (k=" << params.k << ", lambda=" << params.lambda << ")\n";
  return kExitOk;
}

// --- eval -------------------------------------------------------------------

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  const auto probes = read_set_file(cfg.probes);
  const auto gallery = read_set_file(cfg.gallery);
  std::ifstream ranks_in(cfg.ranks);
  if (!ranks_in) fail(ErrorCode::kIo, "cannot open " + cfg.ranks);
  std::vector<RankList> lists;
  try {
    lists = read_rank_csv(ranks_in, probes, gallery);
  } catch (const Error& e) {
    throw Error(e.code(), cfg.ranks + ": " + e.what());
  }
  if (lists.empty()) fail(ErrorCode::kInvalidSet, cfg.ranks + ": no rank rows");

  const bool junk = cfg.junk_filter == "on";
  const auto all_truths = build_ground_truth(probes, gallery, junk);
  std::vector<GroundTruth> truths;
  truths.reserve(lists.size());
  for (const auto& l : lists) truths.push_back(all_truths[l.probe_index]);
  const auto report = evaluate(lists, truths, cfg.max_rank);

  Json params = base_parameters("eval", cfg);
  params["ranks"] = cfg.ranks;
  params["probes"] = cfg.probes;
  params["gallery"] = cfg.gallery;
  params["junk_filter"] = cfg.junk_filter;
  params["max_rank"] = report.cmc.size();

  EmbeddingSet listed;
  for (const auto& l : lists) listed.records.push_back(probes.records[l.probe_index]);

  const auto dir = prepare_out_dir(cfg.out_dir);
  write_text(dir / "report.json", eval_report_json(report, listed, params.dump()));
  write_stream(dir / "ap.csv", [&](std::ostream& os) { write_ap_csv(os, report, listed); });
  write_stream(dir / "cmc.dat", [&](std::ostream& os) { write_cmc_dat(os, report); });

  char line[128];
  std::snprintf(line, sizeof line, "probes %zu  rank-1 %.4f  mAP %.4f\n", report.probe_count,
                report.cmc.empty() ? 0.0 : report.cmc.front(), report.map);
  out << line;
  return kExitOk;
}

// --- merge -------------------------------------------------------------------

int cmd_merge(const RunConfig& cfg, std::ostream& out) {
  std::vector<DatasetManifest> manifests;
  for (const auto& path : cfg.manifests) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::kIo, "cannot open " + path);
    std::stringstream text;
    text << in.rdbuf();
    try {
      manifests.push_back(parse_manifest_json(text.str()));
    } catch (const Error& e) {
      throw Error(e.code(), path + ": " + e.what());
    }
  }
  const auto combined = merge_manifests(manifests);

  Json params = base_parameters("merge", cfg);
  params["manifests"] = cfg.manifests;

  const auto dir = prepare_out_dir(cfg.out_dir);
  write_text(dir / "combined.json", combined_manifest_json(combined, manifests, params.dump()));
  write_stream(dir / "mapping.csv", [&](std::ostream& os) { write_mapping_csv(os, combined); });
  out << "combined identities M = " << combined.identity_count
      << ", images N = " << combined.image_count << "\n";
  return kExitOk;
}

// --- hcn-demo ----------------------------------------------------------------

Json shape_row(const char* name, const hcn::FeatureMap& m) {
  return {{"name", name}, {"height", m.height()}, {"width", m.width()}, {"channels", m.channels()}};
}

int cmd_hcn_demo(const RunConfig& cfg, std::ostream& out) {
  constexpr double kThreshold = 1e-5;
  constexpr double kStep = 1e-6;
  if (cfg.classes < 2) fail(ErrorCode::kOutOfRange, "--classes must be at least 2");

  const auto pyramid = hcn::stub_backbone(cfg.height, cfg.width, cfg.channels, cfg.seed);
  const auto weights = hcn::MergeWeights::seeded(cfg.channels, cfg.classes, mix_seed(cfg.seed, 1));
  const hcn::DropoutSettings train{cfg.dropout_rate, hcn::Mode::kTrain, mix_seed(cfg.seed, 2)};
  const auto outputs = hcn::hcn_forward(pyramid, weights, train);
  const std::size_t label = 1 + static_cast<std::size_t>(mix_seed(cfg.seed, 3) % cfg.classes);

  Json shapes = Json::array();
  shapes.push_back(shape_row("R2", pyramid.r2));
  shapes.push_back(shape_row("R3", pyramid.r3));
  shapes.push_back(shape_row("R4", pyramid.r4));
  shapes.push_back(shape_row("R5", pyramid.r5));
  shapes.push_back(shape_row("C1", outputs.maps.c1));
  shapes.push_back(shape_row("C2", outputs.maps.c2));

  const double r5 = hcn::id_loss(outputs.r5_logits, label).loss;
  const double c1 = hcn::id_loss(outputs.c1_logits, label).loss;
  const double c2 = hcn::id_loss(outputs.c2_logits, label).loss;

  // Branch logits plus seeded random logit vectors.
  double worst = 0.0;
  for (const auto* z : {&outputs.r5_logits, &outputs.c1_logits, &outputs.c2_logits}) {
    worst = std::max(worst, hcn::gradient_check(*z, label, kStep));
  }
  SeededRng rng(mix_seed(cfg.seed, 4));
  std::vector<double> z(cfg.classes);
  for (std::size_t c = 0; c < cfg.cases; ++c) {
    for (double& v : z) v = rng.uniform(-3.0, 3.0);
    const std::size_t y = 1 + static_cast<std::size_t>(rng.below(cfg.classes));
    worst = std::max(worst, hcn::gradient_check(z, y, kStep));
  }
  const bool passed = worst < kThreshold;

  Json params = base_parameters("hcn-demo", cfg);
  params["height"] = cfg.height;
  params["width"] = cfg.width;
  params["base_channels"] = cfg.channels;
  params["classes"] = cfg.classes;
  params["dropout_rate"] = cfg.dropout_rate;
  params["cases"] = cfg.cases;

  Json report;
  report["parameters"] = params;
  report["shapes"] = shapes;
  report["label"] = label;
  report["branch_losses"] = {{"R5", r5}, {"C1", c1}, {"C2", c2}, {"total", r5 + c1 + c2}};
  report["r5_feature_dimension"] = outputs.r5_feature.size();
  report["gradient_check"] = {{"cases", cfg.cases + 3},
                              {"step", kStep},
                              {"max_relative_error", worst},
                              {"threshold", kThreshold},
                              {"passed", passed}};
  const std::string text = report.dump(2) + "\n";
  out << text;
  if (cfg.out_dir != ".") {
    write_text(prepare_out_dir(cfg.out_dir) / "hcn_report.json", text);
  }
  return passed ? kExitOk : kExitGradientCheck;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"reidrank: re-identification ranking, k-reciprocal re-ranking and evaluation"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&cfg](CLI::App* cmd) {
    cmd->add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "Seed for every random draw")->capture_default_str();
  };

  auto* ingest = app.add_subcommand("ingest", "Validate or convert an embedding file");
  ingest->add_option("input", cfg.input, "Embedding file (.reid binary or .csv)")->required();
  ingest->add_option("--tag", cfg.tag, "Dataset tag (defaults to the file stem for CSV)");
  add_common(ingest);

  auto* rank = app.add_subcommand("rank", "Initial ranking by pairwise distance");
  rank->add_option("--probes", cfg.probes, "Probe embedding file")->required();
  rank->add_option("--gallery", cfg.gallery, "Gallery embedding file")->required();
  add_metric_flags(rank, cfg.metric);
  add_common(rank);

  auto* rr = app.add_subcommand("rerank", "k-reciprocal re-ranking with Jaccard blending");
  rr->add_option("--probes", cfg.probes, "Probe embedding file")->required();
  rr->add_option("--gallery", cfg.gallery, "Gallery embedding file")->required();
  add_metric_flags(rr, cfg.metric);
  rr->add_option("--k", cfg.rerank.k, "Neighborhood size")->capture_default_str();
  rr->add_option("--lambda", cfg.rerank.lambda, "Weight of the original distance")
      ->capture_default_str();
  rr->add_option("--overlap", cfg.rerank.overlap, "Inclusion threshold for half-k expansion")
      ->capture_default_str();
  add_common(rr);

  auto* ev = app.add_subcommand("eval", "CMC and mAP of a rank-list CSV");
  ev->add_option("--ranks", cfg.ranks, "Rank CSV from rank or rerank")->required();
  ev->add_option("--probes", cfg.probes, "Probe embedding file")->required();
  ev->add_option("--gallery", cfg.gallery, "Gallery embedding file")->required();
  ev->add_option("--junk-filter", cfg.junk_filter, "Drop same-camera matches")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  ev->add_option("--max-rank", cfg.max_rank, "CMC length (0 = full list)")->capture_default_str();
  add_common(ev);

  auto* merge = app.add_subcommand("merge", "Merge dataset manifests into one label space");
  merge->add_option("manifests", cfg.manifests, "Manifest JSON files")->required();
  add_common(merge);

  auto* demo = app.add_subcommand("hcn-demo", "Hierarchical cross merge shapes and loss check");
  demo->add_option("--height", cfg.height, "R2 height")->capture_default_str();
  demo->add_option("--width", cfg.width, "R2 width")->capture_default_str();
  demo->add_option("--channels", cfg.channels, "R2 channel count")->capture_default_str();
  demo->add_option("--classes", cfg.classes, "Identity count M")->capture_default_str();
  demo->add_option("--cases", cfg.cases, "Random gradient-check cases")->capture_default_str();
  demo->add_option("--dropout", cfg.dropout_rate, "Dropout rate in train mode")
      ->capture_default_str();
  add_common(demo);

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("reidrank");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest) return cmd_ingest(cfg, out);
    if (*rank) return cmd_rank(cfg, out);
    if (*rr) return cmd_rerank(cfg, out);
    if (*ev) return cmd_eval(cfg, out);
    if (*merge) return cmd_merge(cfg, out);
    if (*demo) return cmd_hcn_demo(cfg, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace reidrank::cli
