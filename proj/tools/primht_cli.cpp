// primht: recognize geometric primitives in point clouds, generate labelled
// synthetic scenes, score results and associate segments.
#include "primht/association.hpp"
#include "primht/benchkit.hpp"
#include "primht/hough.hpp"
#include "primht/io.hpp"
#include "primht/serialize.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace primht;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitGate = 3;
constexpr int kExitCap = 4;

std::vector<FamilyId> parse_families(const std::string& csv) {
  std::vector<FamilyId> out;
  std::string item;
  std::stringstream ss(csv);
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto fam = family_from_string(item);
    if (!fam) {
      std::string known;
      for (const FamilyId f : kAllFamilies) {
        if (!known.empty()) known += ", ";
        known += to_string(f);
      }
      throw InvalidInput("unknown family '" + item + "' (known: " + known + ")");
    }
    out.push_back(*fam);
  }
  if (out.empty()) throw InvalidInput("--families: no family given");
  return out;
}

struct RecognizeArgs {
  std::string input;
  std::string output = "segmentation.json";
  std::string ply;
  std::string config_path;
  std::string families;
  bool noisy = false;
  bool quiet = false;
  // Flag overrides (negative = not set) applied after the config file.
  double eps_fraction = -1.0, mfe_accept = -1.0, persistence = -1.0;
  long seed = -1;
  int workers = 0;
};

int cmd_recognize(const RecognizeArgs& args) {
  PipelineConfig config = args.noisy ? PipelineConfig::noisy() : PipelineConfig{};
  if (!args.config_path.empty()) config_merge_json(config, load_json(args.config_path));
  if (!args.families.empty()) config.families = parse_families(args.families);
  if (args.eps_fraction >= 0.0) config.eps_fraction = args.eps_fraction;
  if (args.mfe_accept >= 0.0) config.mfe_accept = args.mfe_accept;
  if (args.persistence >= 0.0) config.hough.persistence_fraction = args.persistence;
  if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
  if (args.workers > 0) config.workers = args.workers;

  const PointCloud cloud = read_cloud(args.input);
  std::ostream* log = args.quiet ? nullptr : &std::cerr;
  const RecognitionResult result = run_pipeline(cloud, config, log);
  save_json(segmentation_to_json(result), args.output);

  if (!args.ply.empty()) {
    std::vector<long> labels(static_cast<std::size_t>(cloud.size()), -1);
    for (const auto& seg : result.segments) {
      if (seg.merged_into >= 0) continue;
      for (const Index i : seg.point_indices) labels[static_cast<std::size_t>(i)] = seg.id;
    }
    std::vector<std::array<std::uint8_t, 3>> colors;
    colors.reserve(labels.size());
    for (const long l : labels) colors.push_back(segment_color(l));
    write_ply_colored(args.ply, cloud, colors);
  }
  if (!args.quiet) {
    std::cerr << "wrote " << args.output << " (" << result.segments.size() << " segments, "
              << result.unsegmented.size() << " unsegmented points)\n";
  }
  return kExitOk;
}

int cmd_generate(const std::string& spec_path, const std::string& out_base, bool quiet) {
  const SceneSpec spec = scene_from_json(load_json(spec_path));
  const auto [cloud, gt] = generate(spec);
  const std::string xyz = out_base + ".xyz";
  const std::string ply = out_base + ".ply";
  const std::string gtj = out_base + ".gt.json";
  write_xyz(xyz, cloud);
  std::vector<std::array<std::uint8_t, 3>> colors;
  colors.reserve(gt.labels.size());
  for (const int l : gt.labels) colors.push_back(segment_color(l));
  write_ply_colored(ply, cloud, colors);
  save_json(ground_truth_to_json(gt), gtj);
  if (!quiet) {
    std::cerr << "seed " << spec.seed << ": wrote " << xyz << ", " << ply << ", " << gtj
              << " (" << cloud.size() << " points)\n";
  }
  return kExitOk;
}

int cmd_evaluate(const std::string& result_path, const std::string& gt_path,
                 const std::string& out_path, const std::string& gates, bool table) {
  const RecognitionResult result = segmentation_from_json(load_json(result_path));
  const GroundTruth gt = ground_truth_from_json(load_json(gt_path));
  const MetricsReport report = score(result, gt);
  if (!out_path.empty()) save_json(metrics_to_json(report), out_path);
  if (table) std::cout << format_metrics(report);

  if (!gates.empty()) {
    std::map<std::string, double> aggregate = {{"dsc", report.dsc}, {"ppv", report.ppv},
                                               {"tpr", report.tpr}, {"npv", report.npv},
                                               {"tnr", report.tnr}, {"acc", report.acc}};
    std::string item;
    std::stringstream ss(gates);
    bool failed = false;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw InvalidInput("--gate: expected name=value");
      const std::string name = item.substr(0, eq);
      const double threshold = std::stod(item.substr(eq + 1));
      const auto it = aggregate.find(name);
      if (it == aggregate.end()) throw InvalidInput("--gate: unknown metric '" + name + "'");
      if (it->second < threshold) {
        std::cerr << "gate failed: " << name << " = " << it->second << " < " << threshold
                  << '\n';
        failed = true;
      }
    }
    if (failed) return kExitGate;
  }
  return kExitOk;
}

int cmd_associate(const std::string& result_path, const std::string& out_path,
                  const std::string& mode_name, double cut, const std::string& cloud_path,
                  int workers) {
  Json doc = load_json(result_path);
  const RecognitionResult result = segmentation_from_json(doc);
  AssociationConfig config;
  const auto mode = relation_mode_from_string(mode_name);
  if (!mode) {
    throw InvalidInput("unknown mode '" + mode_name +
                       "' (known: radius, rototranslation, translation, same-surface)");
  }
  config.mode = *mode;
  config.cut = cut;
  config.reference_diagonal = result.input_diagonal > 0.0 ? result.input_diagonal : 1.0;
  config.eps = result.config.eps_fraction * config.reference_diagonal;
  config.workers = workers > 0 ? workers : 1;

  PointCloud cloud;
  const PointCloud* cloud_ptr = nullptr;
  if (!cloud_path.empty()) {
    cloud = read_cloud(cloud_path);
    cloud_ptr = &cloud;
  }
  // Union records from a previous association run would double up: drop them
  // and clear stale links so re-association is idempotent.
  std::vector<SegmentRecord> segments;
  for (const auto& seg : result.segments) {
    if (!seg.merged_from.empty()) continue;
    segments.push_back(seg);
    segments.back().merged_into = -1;
  }
  const AssociationResult assoc = associate(std::move(segments), config, cloud_ptr);
  attach_association(doc, assoc, config);
  save_json(doc, out_path.empty() ? result_path : out_path);
  return kExitOk;
}

int cmd_dump_accumulator(const std::string& input, const std::string& family_name,
                         const std::string& out_path) {
  const auto fam = family_from_string(family_name);
  if (!fam) throw InvalidInput("unknown family '" + family_name + "'");
  const PointCloud cloud = read_cloud(input);
  const HoughConfig config;
  const ParameterRegion region = init_region(*fam, cloud.bounds(), config);
  const Accumulator acc = vote(cloud.points, *fam, region, config);
  dump_accumulator(acc, out_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"primht: Hough-transform recognition of geometric primitives in point clouds"};
  app.require_subcommand(1);

  RecognizeArgs rec;
  auto* recognize = app.add_subcommand("recognize", "Segment a cloud into primitives");
  recognize->add_option("input", rec.input, "Input cloud (.xyz or .ply)")->required();
  recognize->add_option("-o,--output", rec.output, "Segmentation JSON path");
  recognize->add_option("--ply", rec.ply, "Optional colored PLY of the segmentation");
  recognize->add_option("--config", rec.config_path, "Config JSON (flags override it)");
  recognize->add_option("--families", rec.families, "Comma-separated family names");
  recognize->add_option("--eps-fraction", rec.eps_fraction, "Assignment band fraction");
  recognize->add_option("--mfe", rec.mfe_accept, "MFE acceptance threshold");
  recognize->add_option("--persistence", rec.persistence, "Peak persistence fraction");
  recognize->add_option("--seed", rec.seed, "RNG seed");
  recognize->add_option("--workers", rec.workers, "Worker thread count");
  recognize->add_flag("--noisy", rec.noisy, "Start from the noisy-input preset");
  recognize->add_flag("-q,--quiet", rec.quiet, "Suppress progress logging");

  std::string gen_spec, gen_out = "scene";
  bool gen_quiet = false;
  auto* gen = app.add_subcommand("generate", "Sample a labelled synthetic scene");
  gen->add_option("spec", gen_spec, "SceneSpec JSON")->required();
  gen->add_option("-o,--output", gen_out, "Output base path (writes .xyz/.ply/.gt.json)");
  gen->add_flag("-q,--quiet", gen_quiet, "Suppress logging");

  std::string eval_result, eval_gt, eval_out, eval_gates;
  bool eval_table = false;
  auto* eval = app.add_subcommand("evaluate", "Score a segmentation against ground truth");
  eval->add_option("result", eval_result, "Segmentation JSON")->required();
  eval->add_option("gt", eval_gt, "Ground-truth JSON")->required();
  eval->add_option("-o,--output", eval_out, "Metrics JSON path");
  eval->add_option("--gate", eval_gates, "Fail (exit 3) when aggregates drop below name=value,...");
  eval->add_flag("--table", eval_table, "Print an aligned metrics table");

  std::string as_result, as_out, as_mode = "translation", as_cloud;
  double as_cut = 1.0;
  int as_workers = 1;
  auto* assoc = app.add_subcommand("associate", "Group related segments");
  assoc->add_option("result", as_result, "Segmentation JSON")->required();
  assoc->add_option("-o,--output", as_out, "Output JSON (defaults to in-place)");
  assoc->add_option("--mode", as_mode, "radius | rototranslation | translation | same-surface");
  assoc->add_option("--cut", as_cut, "Dendrogram cut on normalized dissimilarity");
  assoc->add_option("--cloud", as_cloud, "Cloud file enabling same-surface merging");
  assoc->add_option("--workers", as_workers, "Worker thread count");

  std::string dump_input, dump_family, dump_out = "accumulator.bin";
  auto* dump = app.add_subcommand("dump-accumulator", "Write one family's raw accumulator");
  dump->add_option("input", dump_input, "Input cloud")->required();
  dump->add_option("--family", dump_family, "Family name")->required();
  dump->add_option("-o,--output", dump_out, "Output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (recognize->parsed()) return cmd_recognize(rec);
    if (gen->parsed()) return cmd_generate(gen_spec, gen_out, gen_quiet);
    if (eval->parsed()) return cmd_evaluate(eval_result, eval_gt, eval_out, eval_gates, eval_table);
    if (assoc->parsed())
      return cmd_associate(as_result, as_out, as_mode, as_cut, as_cloud, as_workers);
    if (dump->parsed()) return cmd_dump_accumulator(dump_input, dump_family, dump_out);
  } catch (const CapExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCap;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}
