#include "sdid/io.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

namespace sdid {

namespace fs = std::filesystem;

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<size_t>(i)] = kHex[h & 0xf];
  return out;
}

namespace {

Json vec(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::Io, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, std::string("field '") + key + "': " + e.what());
  }
}

Vector vec_field(const Json& j, const char* key) {
  const auto values = field<std::vector<double>>(j, key);
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.precision(17);
  return out;
}

}  // namespace

Json to_json(const Provenance& p) {
  return {{"scenario", p.scenario},
          {"seed", p.seed},
          {"stage", p.stage},
          {"config_hash", p.config_hash},
          {"version", p.version}};
}

Provenance provenance_from_json(const Json& j) {
  Provenance p;
  p.scenario = j.value("scenario", "");
  p.seed = j.value("seed", std::uint64_t{0});
  p.stage = j.value("stage", "");
  p.config_hash = j.value("config_hash", "");
  p.version = j.value("version", "");
  return p;
}

Json to_json(const ModelDefinition& def) {
  Json j;
  if (def.kind == ModelKind::ShearBuilding) {
    j["kind"] = "shear_building";
    j["story_stiffness"] = def.story_stiffness;
    j["story_mass"] = def.story_mass;
    return j;
  }
  j["kind"] = "planar_truss";
  j["elastic_modulus"] = def.elastic_modulus;
  j["cross_section_area"] = def.cross_section_area;
  j["density"] = def.density;
  Json nodes = Json::array();
  for (const auto& n : def.nodes) nodes.push_back({n.x, n.y});
  j["nodes"] = std::move(nodes);
  Json bars = Json::array();
  for (const auto& b : def.bars) bars.push_back({b.node_a, b.node_b});
  j["bars"] = std::move(bars);
  j["supports"] = def.supports;
  return j;
}

ModelDefinition model_from_json(const Json& j) {
  ModelDefinition def;
  const auto kind = field<std::string>(j, "kind");
  if (kind == "shear_building") {
    def.kind = ModelKind::ShearBuilding;
    def.story_stiffness = field<std::vector<double>>(j, "story_stiffness");
    def.story_mass = field<std::vector<double>>(j, "story_mass");
    def.n_stories = static_cast<Index>(def.story_stiffness.size());
  } else if (kind == "planar_truss") {
    def.kind = ModelKind::PlanarTruss;
    def.elastic_modulus = field<double>(j, "elastic_modulus");
    def.cross_section_area = field<double>(j, "cross_section_area");
    def.density = field<double>(j, "density");
    for (const auto& n : field<std::vector<std::array<double, 2>>>(j, "nodes")) {
      def.nodes.push_back({n[0], n[1]});
    }
    for (const auto& b : field<std::vector<std::array<Index, 2>>>(j, "bars")) {
      def.bars.push_back({b[0], b[1]});
    }
    def.supports = field<std::vector<Index>>(j, "supports");
  } else {
    throw Error(ErrorCode::Io, "unknown model kind '" + kind + "'");
  }
  validate(def);
  return def;
}

Json to_json(const Scenario& sc) {
  return {{"name", sc.name},
          {"model", to_json(sc.model)},
          {"theta_intact_true", vec(sc.theta_intact_true)},
          {"theta_dmg_true", vec(sc.theta_dmg_true)},
          {"n_modes", sc.n_modes},
          {"sensor_dofs", sc.sensor_dofs},
          {"noise_level", sc.noise_level},
          {"n_observations", sc.n_observations},
          {"seed", sc.seed},
          {"calibration", {{"c_lambda", sc.calibration.c_lambda}, {"c_phi", sc.calibration.c_phi}}},
          {"damping_ratios", sc.damping_ratios}};
}

Scenario scenario_from_json(const Json& j) {
  Scenario sc;
  sc.name = field<std::string>(j, "name");
  sc.model = model_from_json(field<Json>(j, "model"));
  sc.theta_intact_true = vec_field(j, "theta_intact_true");
  sc.theta_dmg_true = vec_field(j, "theta_dmg_true");
  sc.n_modes = field<Index>(j, "n_modes");
  sc.sensor_dofs = field<std::vector<Index>>(j, "sensor_dofs");
  sc.noise_level = field<double>(j, "noise_level");
  sc.n_observations = field<Index>(j, "n_observations");
  sc.seed = field<std::uint64_t>(j, "seed");
  if (j.contains("calibration")) {
    sc.calibration.c_lambda = field<double>(j["calibration"], "c_lambda");
    sc.calibration.c_phi = field<double>(j["calibration"], "c_phi");
  }
  sc.damping_ratios = j.value("damping_ratios", std::vector<double>{});
  validate(sc);
  return sc;
}

Json to_json(const ModalData& m) {
  Json freq = Json::array();
  for (Index i = 0; i < m.n_modes(); ++i) {
    freq.push_back(std::sqrt(m.eigenvalues(i)) / (2.0 * std::numbers::pi));
  }
  Json shapes = Json::array();
  for (Index i = 0; i < m.n_modes(); ++i) shapes.push_back(vec(m.shapes.col(i)));
  return {{"frequencies_hz", std::move(freq)},
          {"eigenvalues", vec(m.eigenvalues)},
          {"shapes", std::move(shapes)},
          {"sensor_dofs", m.sensor_dofs}};
}

ModalData modal_data_from_json(const Json& j) {
  ModalData m;
  if (j.contains("eigenvalues")) {
    m.eigenvalues = vec_field(j, "eigenvalues");
  } else {
    const Vector f = vec_field(j, "frequencies_hz");
    m.eigenvalues = (2.0 * std::numbers::pi * f.array()).square().matrix();
  }
  m.sensor_dofs = field<std::vector<Index>>(j, "sensor_dofs");
  const auto shapes = field<std::vector<std::vector<double>>>(j, "shapes");
  if (static_cast<Index>(shapes.size()) != m.n_modes()) {
    throw Error(ErrorCode::Io, "observation has " + std::to_string(shapes.size()) +
                                   " shapes for " + std::to_string(m.n_modes()) + " modes");
  }
  m.shapes.resize(m.n_sensors(), m.n_modes());
  for (Index c = 0; c < m.n_modes(); ++c) {
    const auto& col = shapes[static_cast<size_t>(c)];
    if (static_cast<Index>(col.size()) != m.n_sensors()) {
      throw Error(ErrorCode::Io, "shape " + std::to_string(c + 1) + " length does not match sensors");
    }
    for (Index s = 0; s < m.n_sensors(); ++s) m.shapes(s, c) = col[static_cast<size_t>(s)];
  }
  if (!m.eigenvalues.allFinite() || !m.shapes.allFinite() || (m.eigenvalues.array() <= 0.0).any()) {
    throw Error(ErrorCode::Io, "observation has non-finite or non-positive entries");
  }
  return m;
}

Json to_json(const MeasurementFile& f) {
  Json obs = Json::array();
  for (const auto& m : f.observations) obs.push_back(to_json(m));
  return {{"provenance", to_json(f.provenance)}, {"observations", std::move(obs)}};
}

MeasurementFile measurements_from_json(const Json& j) {
  MeasurementFile f;
  if (j.contains("provenance")) f.provenance = provenance_from_json(j["provenance"]);
  for (const auto& o : field<Json>(j, "observations")) f.observations.push_back(modal_data_from_json(o));
  if (f.observations.empty()) throw Error(ErrorCode::Io, "measurement file has no observations");
  return f;
}

Json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, path.string() + ": " + e.what());
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_json(const fs::path& path, const Json& j) {
  auto out = open_out(path);
  out << dump(j);
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

MeasurementFile read_measurements(const fs::path& path) {
  return measurements_from_json(read_json(path));
}

ModelDefinition read_model(const fs::path& path) { return model_from_json(read_json(path)); }

Json posterior_report(const PosteriorEstimate& est, const Provenance& p) {
  Json params = Json::array();
  for (size_t i = 0; i < est.per_param.size(); ++i) {
    params.push_back({{"element", i + 1},
                      {"theta_hat", est.theta_hat(static_cast<Index>(i))},
                      {"mean", est.per_param[i].mean},
                      {"std", est.per_param[i].std}});
  }
  Json trace = Json::array();
  for (size_t k = 0; k < est.history.size(); ++k) {
    const auto& h = est.history[k];
    trace.push_back({{"iteration", k + 1},
                     {"relative_increment", h.relative_increment},
                     {"residue_norm", h.residue_norm},
                     {"sigma2", h.sigma2},
                     {"alpha", h.alpha},
                     {"inner_iters", h.inner_iters}});
  }
  return {{"provenance", to_json(p)},
          {"converged", est.converged},
          {"theta_hat", vec(est.theta_hat)},
          {"parameters", std::move(params)},
          {"trace", std::move(trace)}};
}

ParameterVector baseline_from_report(const Json& report) { return vec_field(report, "theta_hat"); }

Json damage_report(const DamageResult& res, const Provenance& p) {
  Json support = Json::array();
  for (Index i : res.support) support.push_back({{"element", i + 1}, {"theta_dmg", res.theta_dmg(i)}});
  Json history = Json::array();
  for (size_t k = 0; k < res.history.size(); ++k) {
    const auto& h = res.history[k];
    Json lambdas = Json::array();
    for (const auto& row : h.trace) lambdas.push_back(row.lambda);
    history.push_back({{"iteration", k + 1},
                       {"lambda", h.lambda},
                       {"eta", h.eta},
                       {"loss", h.loss},
                       {"residue_norm", h.residue_norm},
                       {"relative_increment", h.relative_increment},
                       {"guard", h.guard},
                       {"fallback", h.fallback},
                       {"halvings", h.halvings},
                       {"refit", h.refit},
                       {"lambda_trace", std::move(lambdas)}});
  }
  return {{"provenance", to_json(p)},
          {"converged", res.converged},
          {"theta_dmg", vec(res.theta_dmg)},
          {"support", std::move(support)},
          {"history", std::move(history)}};
}

Json comparison_report(const std::vector<ComparisonRow>& rows, const Vector& truth,
                       const Provenance& p) {
  Json methods = Json::array();
  for (const auto& r : rows) {
    methods.push_back({{"method", to_string(r.method)},
                       {"relative_error", r.relative_error},
                       {"converged", r.converged},
                       {"iterations", r.iterations},
                       {"theta_dmg", vec(r.theta_dmg)}});
  }
  return {{"provenance", to_json(p)}, {"truth", vec(truth)}, {"methods", std::move(methods)}};
}

void write_posterior_csv(const fs::path& path, const PosteriorEstimate& est) {
  auto out = open_out(path);
  out << "element,theta_hat,mean,std\n";
  for (size_t i = 0; i < est.per_param.size(); ++i) {
    out << i + 1 << ',' << est.theta_hat(static_cast<Index>(i)) << ',' << est.per_param[i].mean
        << ',' << est.per_param[i].std << '\n';
  }
}

void write_update_trace_csv(const fs::path& path, const PosteriorEstimate& est) {
  auto out = open_out(path);
  out << "iteration,relative_increment,residue_norm,sigma2,alpha,inner_iters\n";
  for (size_t k = 0; k < est.history.size(); ++k) {
    const auto& h = est.history[k];
    out << k + 1 << ',' << h.relative_increment << ',' << h.residue_norm << ',' << h.sigma2 << ','
        << h.alpha << ',' << h.inner_iters << '\n';
  }
}

void write_damage_csv(const fs::path& path, const DamageResult& res) {
  auto out = open_out(path);
  out << "element,theta_dmg,active\n";
  for (Index i = 0; i < res.theta_dmg.size(); ++i) {
    out << i + 1 << ',' << res.theta_dmg(i) << ',' << (res.theta_dmg(i) != 0.0 ? 1 : 0) << '\n';
  }
}

void write_bo_trace_csv(const fs::path& path, const DamageResult& res) {
  auto out = open_out(path);
  out << "outer_iteration,bo_iteration,lambda,loss,incumbent\n";
  for (size_t k = 0; k < res.history.size(); ++k) {
    for (const auto& row : res.history[k].trace) {
      out << k + 1 << ',' << row.iteration << ',' << row.lambda << ',' << row.loss << ','
          << row.incumbent << '\n';
    }
  }
}

void write_comparison_csv(const fs::path& path, const std::vector<ComparisonRow>& rows) {
  auto out = open_out(path);
  out << "method,relative_error,converged,iterations\n";
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << r.relative_error << ',' << (r.converged ? 1 : 0) << ','
        << r.iterations << '\n';
  }
}

void write_comparison_elements_csv(const fs::path& path, const std::vector<ComparisonRow>& rows,
                                   const Vector& truth) {
  auto out = open_out(path);
  out << "element,truth";
  for (const auto& r : rows) out << ',' << to_string(r.method);
  out << '\n';
  for (Index i = 0; i < truth.size(); ++i) {
    out << i + 1 << ',' << truth(i);
    for (const auto& r : rows) out << ',' << r.theta_dmg(i);
    out << '\n';
  }
}

}  // namespace sdid
