#include "primht/serialize.hpp"

#include <fstream>

namespace primht {
namespace {

Json transform_to_json(const SimilarityTransform& t) {
  const auto m = t.to_row_major();
  return Json(m);
}

SimilarityTransform transform_from_json(const Json& doc) {
  std::array<double, 16> m{};
  if (!doc.is_array() || doc.size() != 16) {
    throw InvalidInput("transform: expected 16 row-major values");
  }
  for (std::size_t i = 0; i < 16; ++i) m[i] = doc[i].get<double>();
  return SimilarityTransform::from_row_major(m);
}

Json vec3_to_json(const Vec3& v) { return Json({v.x(), v.y(), v.z()}); }

FamilyId family_from_json(const Json& doc) {
  const auto fam = family_from_string(doc.get<std::string>());
  if (!fam) throw InvalidInput("unknown family: " + doc.get<std::string>());
  return *fam;
}

}  // namespace

Json instance_to_json(const PrimitiveInstance& inst) {
  Json doc;
  doc["family"] = to_string(inst.family);
  doc["params"] = std::vector<double>(inst.params.data(), inst.params.data() + inst.params.size());
  doc["pose"] = transform_to_json(inst.pose);
  doc["helix_n"] = inst.helix_n;
  return doc;
}

PrimitiveInstance instance_from_json(const Json& doc) {
  PrimitiveInstance inst;
  inst.family = family_from_json(doc.at("family"));
  const auto params = doc.at("params").get<std::vector<double>>();
  inst.params = Eigen::Map<const Eigen::VectorXd>(params.data(),
                                                  static_cast<Eigen::Index>(params.size()));
  if (doc.contains("pose")) inst.pose = transform_from_json(doc.at("pose"));
  inst.helix_n = doc.value("helix_n", 1);
  return inst;
}

Json config_to_json(const PipelineConfig& config) {
  Json doc;
  std::vector<std::string> fams;
  for (const FamilyId f : config.families) fams.push_back(to_string(f));
  doc["families"] = fams;
  doc["eps_fraction"] = config.eps_fraction;
  doc["mfe_accept"] = config.mfe_accept;
  doc["knn_normals"] = config.knn_normals;
  doc["dbscan_min_pts"] = config.dbscan_min_pts;
  doc["dbscan_radius_factor"] = config.dbscan_radius_factor;
  doc["sparsity_factor"] = config.sparsity_factor;
  doc["max_iterations"] = config.max_iterations;
  doc["seed"] = config.seed;
  doc["workers"] = config.workers;
  doc["helix_n_values"] = config.helix_n_values;
  doc["max_candidates_per_family"] = config.max_candidates_per_family;
  doc["persistence_fraction"] = config.hough.persistence_fraction;
  doc["cells_low_dim"] = config.hough.cells_low_dim;
  doc["cells_3d"] = config.hough.cells_3d;
  doc["cells_4d"] = config.hough.cells_4d;
  doc["max_cells"] = config.hough.max_cells;
  doc["samples_periodic"] = config.hough.ht.samples_periodic;
  doc["samples_bounded"] = config.hough.ht.samples_bounded;
  return doc;
}

void config_merge_json(PipelineConfig& config, const Json& doc) {
  if (!doc.is_object()) throw InvalidInput("config: expected a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "families") {
      config.families.clear();
      for (const auto& f : value) config.families.push_back(family_from_json(f));
    } else if (key == "eps_fraction") {
      config.eps_fraction = value.get<double>();
    } else if (key == "mfe_accept") {
      config.mfe_accept = value.get<double>();
    } else if (key == "knn_normals") {
      config.knn_normals = value.get<int>();
    } else if (key == "dbscan_min_pts") {
      config.dbscan_min_pts = value.get<int>();
    } else if (key == "dbscan_radius_factor") {
      config.dbscan_radius_factor = value.get<double>();
    } else if (key == "sparsity_factor") {
      config.sparsity_factor = value.get<double>();
    } else if (key == "max_iterations") {
      config.max_iterations = value.get<int>();
    } else if (key == "seed") {
      config.seed = value.get<std::uint64_t>();
    } else if (key == "workers") {
      config.workers = value.get<int>();
    } else if (key == "helix_n_values") {
      config.helix_n_values = value.get<std::vector<int>>();
    } else if (key == "max_candidates_per_family") {
      config.max_candidates_per_family = value.get<int>();
    } else if (key == "persistence_fraction") {
      config.hough.persistence_fraction = value.get<double>();
    } else if (key == "cells_low_dim") {
      config.hough.cells_low_dim = value.get<int>();
    } else if (key == "cells_3d") {
      config.hough.cells_3d = value.get<int>();
    } else if (key == "cells_4d") {
      config.hough.cells_4d = value.get<int>();
    } else if (key == "max_cells") {
      config.hough.max_cells = value.get<long>();
    } else if (key == "samples_periodic") {
      config.hough.ht.samples_periodic = value.get<int>();
    } else if (key == "samples_bounded") {
      config.hough.ht.samples_bounded = value.get<int>();
    } else {
      throw InvalidInput("config: unknown key '" + key + "'");
    }
  }
}

Json segmentation_to_json(const RecognitionResult& result) {
  Json doc;
  doc["schema"] = "segmentation";
  doc["input"] = {{"id", result.input_id},
                  {"diagonal", result.input_diagonal}};
  doc["config"] = config_to_json(result.config);
  Json segs = Json::array();
  for (const auto& seg : result.segments) {
    Json s;
    s["id"] = seg.id;
    s["instance"] = instance_to_json(seg.instance);
    const GeometricDescriptor d = describe(seg.instance);
    Json intrinsic = Json::object();
    for (const auto& [name, value] : d.intrinsic) intrinsic[name] = value;
    s["descriptor"] = {{"intrinsic", intrinsic},
                       {"axis", vec3_to_json(d.axis)},
                       {"anchor", vec3_to_json(d.anchor)}};
    s["mfe"] = seg.mfe;
    s["iteration"] = seg.iteration;
    s["point_count"] = seg.point_indices.size();
    s["point_indices"] = seg.point_indices;
    s["cell_widths"] = seg.cell_widths;
    s["merged_into"] = seg.merged_into;
    s["merged_from"] = seg.merged_from;
    segs.push_back(std::move(s));
  }
  doc["segments"] = std::move(segs);
  doc["unsegmented"] = result.unsegmented;
  doc["diagnostics"] = {{"candidates", result.diagnostics.candidates},
                        {"rejected_inadmissible", result.diagnostics.rejected_inadmissible},
                        {"rejected_empty", result.diagnostics.rejected_empty},
                        {"rejected_sparse", result.diagnostics.rejected_sparse},
                        {"rejected_mfe", result.diagnostics.rejected_mfe},
                        {"fallback_clusters", result.diagnostics.fallback_clusters},
                        {"iterations_run", result.diagnostics.iterations_run}};
  return doc;
}

RecognitionResult segmentation_from_json(const Json& doc) {
  if (doc.value("schema", "") != "segmentation") {
    throw InvalidInput("segmentation_from_json: wrong or missing schema tag");
  }
  RecognitionResult result;
  result.input_id = doc.at("input").value("id", "");
  result.input_diagonal = doc.at("input").value("diagonal", 0.0);
  if (doc.contains("config")) config_merge_json(result.config, doc.at("config"));
  for (const auto& s : doc.at("segments")) {
    SegmentRecord seg;
    seg.id = s.at("id").get<int>();
    seg.instance = instance_from_json(s.at("instance"));
    seg.point_indices = s.value("point_indices", std::vector<Index>{});
    seg.mfe = s.at("mfe").get<double>();
    seg.iteration = s.value("iteration", 1);
    if (s.contains("cell_widths")) {
      seg.cell_widths = s.at("cell_widths").get<std::map<std::string, double>>();
    }
    seg.merged_into = s.value("merged_into", -1);
    seg.merged_from = s.value("merged_from", std::vector<int>{});
    result.segments.push_back(std::move(seg));
  }
  result.unsegmented = doc.value("unsegmented", std::vector<Index>{});
  if (doc.contains("diagnostics")) {
    const auto& d = doc.at("diagnostics");
    result.diagnostics.candidates = d.value("candidates", 0L);
    result.diagnostics.rejected_inadmissible = d.value("rejected_inadmissible", 0L);
    result.diagnostics.rejected_empty = d.value("rejected_empty", 0L);
    result.diagnostics.rejected_sparse = d.value("rejected_sparse", 0L);
    result.diagnostics.rejected_mfe = d.value("rejected_mfe", 0L);
    result.diagnostics.fallback_clusters = d.value("fallback_clusters", 0L);
    result.diagnostics.iterations_run = d.value("iterations_run", 0);
  }
  return result;
}

void attach_association(Json& doc, const AssociationResult& association,
                        const AssociationConfig& config) {
  Json groups = Json::array();
  for (const auto& g : association.groups) {
    Json gj;
    gj["members"] = g.members;
    gj["relation"] = to_string(g.relation);
    if (!g.witnesses.empty()) {
      Json w = Json::array();
      for (const auto& t : g.witnesses) w.push_back(transform_to_json(t));
      gj["witnesses"] = std::move(w);
    }
    if (g.merged_segment >= 0) gj["merged_segment"] = g.merged_segment;
    groups.push_back(std::move(gj));
  }
  doc["groups"] = std::move(groups);
  doc["association_config"] = {{"mode", to_string(config.mode)},
                               {"cut", config.cut},
                               {"length_fraction", config.length_fraction},
                               {"angle_tol_deg", config.angle_tol_deg},
                               {"reference_diagonal", config.reference_diagonal},
                               {"eps", config.eps}};
  // Segment list may have gained union records and merged_into links.
  RecognitionResult tmp;
  tmp.segments = association.segments;
  const Json refreshed = segmentation_to_json(tmp);
  doc["segments"] = refreshed.at("segments");
}

Json scene_to_json(const SceneSpec& spec) {
  Json doc;
  doc["schema"] = "scene";
  doc["id"] = spec.id;
  doc["seed"] = spec.seed;
  doc["sigma"] = spec.sigma;
  doc["sigma_relative"] = spec.sigma_relative;
  doc["outlier_fraction"] = spec.outlier_fraction;
  Json patches = Json::array();
  for (const auto& p : spec.patches) {
    Json pj;
    pj["instance"] = instance_to_json(p.instance);
    pj["count"] = p.count;
    if (p.u_domain[0] != p.u_domain[1]) pj["u_domain"] = p.u_domain;
    if (p.v_domain[0] != p.v_domain[1]) pj["v_domain"] = p.v_domain;
    if (!p.holes.empty()) pj["holes"] = p.holes;
    if (p.label != -2) pj["label"] = p.label;
    patches.push_back(std::move(pj));
  }
  doc["patches"] = std::move(patches);
  return doc;
}

SceneSpec scene_from_json(const Json& doc) {
  if (doc.value("schema", "") != "scene") {
    throw InvalidInput("scene_from_json: wrong or missing schema tag");
  }
  SceneSpec spec;
  spec.id = doc.value("id", "");
  spec.seed = doc.value("seed", std::uint64_t{0});
  spec.sigma = doc.value("sigma", 0.0);
  spec.sigma_relative = doc.value("sigma_relative", false);
  spec.outlier_fraction = doc.value("outlier_fraction", 0.0);
  for (const auto& pj : doc.at("patches")) {
    ScenePatch p;
    p.instance = instance_from_json(pj.at("instance"));
    p.count = pj.at("count").get<int>();
    if (pj.contains("u_domain")) p.u_domain = pj.at("u_domain").get<std::array<double, 2>>();
    if (pj.contains("v_domain")) p.v_domain = pj.at("v_domain").get<std::array<double, 2>>();
    if (pj.contains("holes")) {
      p.holes = pj.at("holes").get<std::vector<std::array<double, 4>>>();
    }
    p.label = pj.value("label", -2);
    spec.patches.push_back(std::move(p));
  }
  return spec;
}

Json ground_truth_to_json(const GroundTruth& gt) {
  Json doc;
  doc["schema"] = "ground-truth";
  doc["labels"] = gt.labels;
  Json instances = Json::array();
  for (const auto& [label, inst] : gt.instances) {
    Json ij = instance_to_json(inst);
    ij["label"] = label;
    instances.push_back(std::move(ij));
  }
  doc["instances"] = std::move(instances);
  return doc;
}

GroundTruth ground_truth_from_json(const Json& doc) {
  if (doc.value("schema", "") != "ground-truth") {
    throw InvalidInput("ground_truth_from_json: wrong or missing schema tag");
  }
  GroundTruth gt;
  gt.labels = doc.at("labels").get<std::vector<int>>();
  for (const auto& ij : doc.at("instances")) {
    gt.instances.emplace_back(ij.at("label").get<int>(), instance_from_json(ij));
  }
  return gt;
}

Json metrics_to_json(const MetricsReport& report) {
  Json doc;
  doc["schema"] = "metrics";
  doc["aggregate"] = {{"dsc", report.dsc}, {"ppv", report.ppv}, {"tpr", report.tpr},
                      {"npv", report.npv}, {"tnr", report.tnr}, {"acc", report.acc},
                      {"mfe_min", report.mfe_min}, {"mfe_mean", report.mfe_mean},
                      {"mfe_max", report.mfe_max}};
  Json rows = Json::array();
  for (const auto& s : report.per_segment) {
    rows.push_back({{"gt_label", s.gt_label}, {"matched", s.matched},
                    {"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn}, {"tn", s.tn},
                    {"dsc", s.dsc}, {"ppv", s.ppv}, {"tpr", s.tpr},
                    {"npv", s.npv}, {"tnr", s.tnr}, {"acc", s.acc}});
  }
  doc["per_segment"] = std::move(rows);
  return doc;
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  Json doc;
  try {
    in >> doc;
  } catch (const Json::parse_error& e) {
    throw InvalidInput("invalid JSON in " + path.string() + ": " + e.what());
  }
  return doc;
}

void save_json(const Json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

namespace {

bool type_matches(const Json& doc, const std::string& type) {
  if (type == "object") return doc.is_object();
  if (type == "array") return doc.is_array();
  if (type == "string") return doc.is_string();
  if (type == "number") return doc.is_number();
  if (type == "integer") return doc.is_number_integer() || doc.is_number_unsigned();
  if (type == "boolean") return doc.is_boolean();
  if (type == "null") return doc.is_null();
  return false;
}

void check_node(const Json& doc, const Json& schema, const std::string& where,
                std::vector<std::string>& errors) {
  if (schema.contains("type")) {
    const std::string type = schema.at("type").get<std::string>();
    if (!type_matches(doc, type)) {
      errors.push_back(where + ": expected " + type);
      return;
    }
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& v : schema.at("enum")) {
      if (v == doc) found = true;
    }
    if (!found) errors.push_back(where + ": value not in enum");
  }
  if (schema.contains("required") && doc.is_object()) {
    for (const auto& key : schema.at("required")) {
      if (!doc.contains(key.get<std::string>())) {
        errors.push_back(where + ": missing required key '" + key.get<std::string>() + "'");
      }
    }
  }
  if (schema.contains("properties") && doc.is_object()) {
    for (const auto& [key, sub] : schema.at("properties").items()) {
      if (doc.contains(key)) check_node(doc.at(key), sub, where + "." + key, errors);
    }
  }
  if (schema.contains("items") && doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      check_node(doc[i], schema.at("items"), where + "[" + std::to_string(i) + "]", errors);
    }
  }
}

}  // namespace

std::vector<std::string> schema_check(const Json& doc, const Json& schema) {
  std::vector<std::string> errors;
  check_node(doc, schema, "$", errors);
  return errors;
}

}  // namespace primht
