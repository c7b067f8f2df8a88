#include "surme/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

namespace surme::io {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

json parse_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& err) {
    throw ParseError("'" + path.string() + "': " + err.what());
  }
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_real(const std::string& cell, double& out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  const char* begin = t.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(out);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
};

Table read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("'" + path.string() + "' is empty");
  for (auto& h : split(line)) t.header.push_back(trim(h));
  t.columns.resize(t.header.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw ParseError("'" + path.string() + "' data row " + std::to_string(row) + ": expected " +
                       std::to_string(t.header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_real(cells[c], v)) {
        throw ParseError("'" + path.string() + "' data row " + std::to_string(row) + ", column '" + t.header[c] +
                         "': non-numeric value '" + trim(cells[c]) + "'");
      }
      t.columns[c].push_back(v);
    }
  }
  return t;
}

json vec_json(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json mat_json(const MatrixXd& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

VectorXd json_vec(const json& j, const std::string& key) {
  if (!j.is_array()) throw ParseError("'" + key + "' must be an array");
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

MatrixXd json_mat(const json& j, const std::string& key) {
  if (!j.is_array()) throw ParseError("'" + key + "' must be an array of rows");
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows == 0 ? Index{0} : static_cast<Index>(j[0].size());
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) throw ParseError("'" + key + "' rows differ in length");
    for (Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

// Non-finite reals are stored as strings so the document stays valid JSON.
ordered_json real_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double json_real(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ParseError("expected a real number, found " + j.dump());
}

}  // namespace

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

DatasetManifest load_manifest(const fs::path& path) {
  const json j = parse_json(path);
  const fs::path base = path.parent_path();
  DatasetManifest m;
  try {
    m.data_path = base / j.at("data").get<std::string>();
    m.exposure = j.value("exposure", true);
    if (j.contains("truth")) m.truth_path = base / j.at("truth").get<std::string>();
    for (const auto& eq : j.at("equations")) {
      EquationSpec spec;
      spec.response = eq.at("response").get<std::string>();
      spec.covariates = eq.at("covariates").get<std::vector<std::string>>();
      spec.reading = eq.at("reading").get<std::string>();
      m.equations.push_back(std::move(spec));
    }
  } catch (const json::exception& err) {
    throw ParseError("manifest '" + path.string() + "': " + err.what());
  }
  if (m.equations.empty()) throw ValidationError({"manifest lists no equations"});
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  ordered_json j;
  const fs::path base = path.parent_path();
  j["data"] = fs::relative(manifest.data_path, base.empty() ? fs::path(".") : base).generic_string();
  j["exposure"] = manifest.exposure;
  if (!manifest.truth_path.empty()) {
    j["truth"] = fs::relative(manifest.truth_path, base.empty() ? fs::path(".") : base).generic_string();
  }
  j["equations"] = ordered_json::array();
  for (const auto& eq : manifest.equations) {
    j["equations"].push_back({{"response", eq.response}, {"covariates", eq.covariates}, {"reading", eq.reading}});
  }
  write_text(path, j.dump(2) + "\n");
}

SurDataset load_dataset(const DatasetManifest& manifest) {
  const Table t = read_csv(manifest.data_path);
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (!index.emplace(t.header[c], c).second) {
      throw ValidationError({"column '" + t.header[c] + "' appears more than once"});
    }
  }
  const auto n = static_cast<Index>(t.columns.empty() ? 0 : t.columns[0].size());
  std::vector<std::string> missing;
  auto column = [&](const std::string& name) -> VectorXd {
    const auto it = index.find(name);
    if (it == index.end()) {
      missing.push_back("missing column '" + name + "'");
      return VectorXd::Zero(n);
    }
    return Eigen::Map<const VectorXd>(t.columns[it->second].data(), n);
  };

  const auto m = static_cast<Index>(manifest.equations.size());
  SurDataset d;
  d.y.resize(n, m);
  d.w.resize(n, m);
  for (Index eq = 0; eq < m; ++eq) {
    const auto& spec = manifest.equations[static_cast<std::size_t>(eq)];
    d.y.col(eq) = column(spec.response);
    d.w.col(eq) = column(spec.reading);
    MatrixXd x(n, static_cast<Index>(spec.covariates.size()));
    for (std::size_t j = 0; j < spec.covariates.size(); ++j) {
      x.col(static_cast<Index>(j)) =
          spec.covariates[j] == kConstMarker ? VectorXd(VectorXd::Ones(n)) : column(spec.covariates[j]);
    }
    d.x.push_back(std::move(x));
    d.covariate_names.push_back(spec.covariates);
  }
  if (!missing.empty()) throw ValidationError(std::move(missing));
  if (!manifest.truth_path.empty()) d.truth = load_truth(manifest.truth_path);
  return d;
}

SurDataset load_dataset(const fs::path& manifest_path) { return load_dataset(load_manifest(manifest_path)); }

fs::path save_dataset(const SurDataset& data, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  const Index n = data.n();
  const Index m = data.m();
  DatasetManifest manifest;
  manifest.data_path = dir / (stem + ".csv");

  std::vector<std::string> header;
  std::vector<const double*> cols;
  std::vector<Index> strides;
  for (Index eq = 0; eq < m; ++eq) {
    const auto tag = std::to_string(eq + 1);
    EquationSpec spec;
    spec.response = "y" + tag;
    spec.reading = "w" + tag;
    header.push_back(spec.response);
    cols.push_back(data.y.col(eq).data());
    header.push_back(spec.reading);
    cols.push_back(data.w.col(eq).data());
    const MatrixXd& x = data.x[static_cast<std::size_t>(eq)];
    for (Index j = 0; j < x.cols(); ++j) {
      const bool constant = (x.col(j).array() == 1.0).all();
      if (constant) {
        spec.covariates.emplace_back(kConstMarker);
        continue;
      }
      const auto name = "x" + tag + "_" + std::to_string(j + 1);
      spec.covariates.push_back(name);
      header.push_back(name);
      cols.push_back(x.col(j).data());
    }
    manifest.equations.push_back(std::move(spec));
  }
  std::string text;
  for (std::size_t c = 0; c < header.size(); ++c) text += (c ? "," : "") + header[c];
  text += "\n";
  for (Index i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) text += ",";
      text += format_real(cols[c][i]);
    }
    text += "\n";
  }
  write_text(manifest.data_path, text);
  if (data.truth) {
    manifest.truth_path = dir / (stem + "_truth.json");
    save_truth(*data.truth, manifest.truth_path);
  }
  const fs::path manifest_path = dir / (stem + ".json");
  save_manifest(manifest, manifest_path);
  return manifest_path;
}

void save_truth(const GroundTruth& truth, const fs::path& path) {
  ordered_json j;
  j["beta"] = vec_json(truth.beta);
  j["gamma"] = vec_json(truth.gamma);
  j["omega"] = vec_json(truth.omega);
  j["sigma_eps"] = mat_json(truth.sigma_eps);
  j["sigma_z2"] = truth.sigma_z2;
  j["sigma_u2"] = truth.sigma_u2;
  j["z"] = mat_json(truth.z);
  write_text(path, j.dump(2) + "\n");
}

GroundTruth load_truth(const fs::path& path) {
  const json j = parse_json(path);
  GroundTruth t;
  try {
    t.beta = json_vec(j.at("beta"), "beta");
    t.gamma = json_vec(j.at("gamma"), "gamma");
    t.omega = json_vec(j.value("omega", json::array()), "omega");
    t.sigma_eps = json_mat(j.at("sigma_eps"), "sigma_eps");
    t.sigma_z2 = j.at("sigma_z2").get<double>();
    t.sigma_u2 = j.at("sigma_u2").get<double>();
    if (j.contains("z")) t.z = json_mat(j.at("z"), "z");
  } catch (const json::exception& err) {
    throw ParseError("truth file '" + path.string() + "': " + err.what());
  }
  return t;
}

PriorSpec load_priors(const fs::path& path, const std::vector<Index>& k_per_equation, bool exposure) {
  PriorSpec p = PriorSpec::defaults(k_per_equation, exposure);
  if (path.empty()) return p;
  const json j = parse_json(path);
  try {
    if (j.contains("beta0")) p.beta0 = json_vec(j["beta0"], "beta0");
    if (j.contains("B0")) p.B0 = PdMatrix(json_mat(j["B0"], "B0"), "B0");
    if (j.contains("gamma0")) p.gamma0 = json_vec(j["gamma0"], "gamma0");
    if (j.contains("G0")) p.G0 = PdMatrix(json_mat(j["G0"], "G0"), "G0");
    if (j.contains("nu0")) p.nu0 = j["nu0"].get<double>();
    if (j.contains("S0")) p.S0 = PdMatrix(json_mat(j["S0"], "S0"), "S0");
    if (j.contains("omega0")) p.omega0 = json_vec(j["omega0"], "omega0");
    if (j.contains("O0")) p.O0 = PdMatrix(json_mat(j["O0"], "O0"), "O0");
    p.delta1 = j.value("delta1", p.delta1);
    p.delta2 = j.value("delta2", p.delta2);
    p.delta3 = j.value("delta3", p.delta3);
    p.delta4 = j.value("delta4", p.delta4);
    if (j.contains("mu0")) p.mu0 = json_vec(j["mu0"], "mu0");
    p.sigma_mu2 = j.value("sigma_mu2", p.sigma_mu2);
  } catch (const json::exception& err) {
    throw ParseError("prior file '" + path.string() + "': " + err.what());
  }
  return p;
}

void save_priors(const PriorSpec& p, const fs::path& path) {
  ordered_json j;
  j["beta0"] = vec_json(p.beta0);
  j["B0"] = mat_json(p.B0.matrix());
  j["gamma0"] = vec_json(p.gamma0);
  j["G0"] = mat_json(p.G0.matrix());
  j["nu0"] = p.nu0;
  j["S0"] = mat_json(p.S0.matrix());
  if (p.exposure) {
    j["omega0"] = vec_json(p.omega0);
    j["O0"] = mat_json(p.O0.matrix());
  } else {
    j["mu0"] = vec_json(p.mu0);
    j["sigma_mu2"] = p.sigma_mu2;
  }
  j["delta1"] = p.delta1;
  j["delta2"] = p.delta2;
  j["delta3"] = p.delta3;
  j["delta4"] = p.delta4;
  write_text(path, j.dump(2) + "\n");
}

namespace {

ordered_json diag_json(const ChainDiag& d) {
  ordered_json j;
  ordered_json acf = ordered_json::array();
  for (double r : d.autocorrelations) acf.push_back(real_json(r));
  j["autocorrelations"] = std::move(acf);
  j["inefficiency_factor"] = real_json(d.inefficiency_factor);
  j["geweke_cd"] = real_json(d.geweke_cd);
  j["geweke_p"] = real_json(d.geweke_p);
  j["chain_length"] = d.chain_length;
  j["thinning"] = d.thinning;
  return j;
}

ChainDiag json_diag(const json& j) {
  ChainDiag d;
  for (const auto& r : j.at("autocorrelations")) d.autocorrelations.push_back(json_real(r));
  d.inefficiency_factor = json_real(j.at("inefficiency_factor"));
  d.geweke_cd = json_real(j.at("geweke_cd"));
  d.geweke_p = json_real(j.at("geweke_p"));
  d.chain_length = j.at("chain_length").get<std::size_t>();
  d.thinning = j.at("thinning").get<std::size_t>();
  return d;
}

ordered_json score_json(const ModelScore& s) {
  return {{"dic", real_json(s.dic)},
          {"p_d", real_json(s.p_d)},
          {"mean_deviance", real_json(s.mean_deviance)},
          {"deviance_at_mean", real_json(s.deviance_at_mean)}};
}

ModelScore json_score(const json& j) {
  ModelScore s;
  s.dic = json_real(j.at("dic"));
  s.p_d = json_real(j.at("p_d"));
  s.mean_deviance = json_real(j.at("mean_deviance"));
  s.deviance_at_mean = json_real(j.at("deviance_at_mean"));
  return s;
}

}  // namespace

std::string report_to_string(const FitReport& r) {
  ordered_json j;
  j["schema_version"] = FitReport::schema_version;
  j["method"] = r.method;
  j["interval_kind"] = r.interval_kind;
  j["interval_prob"] = r.interval_prob;
  j["seed"] = r.seed;
  j["runtime_seconds"] = r.runtime_seconds;
  ordered_json params = ordered_json::array();
  for (const auto& p : r.params) {
    ordered_json pj;
    pj["name"] = p.name;
    pj["mean"] = real_json(p.mean);
    pj["sd"] = real_json(p.sd);
    pj["lower"] = real_json(p.lower);
    pj["upper"] = real_json(p.upper);
    if (p.truth) pj["truth"] = real_json(*p.truth);
    if (p.diag) pj["diagnostics"] = diag_json(*p.diag);
    params.push_back(std::move(pj));
  }
  j["params"] = std::move(params);
  ordered_json corr = ordered_json::object();
  for (const auto& [k, v] : r.error_correlations) corr[k] = real_json(v);
  j["error_correlations"] = std::move(corr);
  if (r.reliability_ratio) j["reliability_ratio"] = real_json(*r.reliability_ratio);
  if (r.score) j["score"] = score_json(*r.score);
  if (r.mcmc) {
    j["mcmc"] = {{"draws", r.mcmc->draws},
                 {"burnin", r.mcmc->burnin},
                 {"thin", r.mcmc->thin},
                 {"retained", r.mcmc->retained},
                 {"dataset_digest", r.mcmc->dataset_digest}};
  }
  if (r.variational) {
    ordered_json trace = ordered_json::array();
    for (double v : r.variational->elbo_trace) trace.push_back(real_json(v));
    j["variational"] = {{"cycles", r.variational->cycles},
                        {"converged", r.variational->converged},
                        {"tol", real_json(r.variational->tol)},
                        {"elbo", real_json(r.variational->elbo)},
                        {"elbo_trace", std::move(trace)}};
  }
  return j.dump(2) + "\n";
}

FitReport report_from_string(const std::string& text) {
  FitReport r;
  try {
    const json j = json::parse(text);
    const auto version = j.at("schema_version").get<std::string>();
    if (version != FitReport::schema_version) throw ParseError("unsupported report schema '" + version + "'");
    r.method = j.at("method").get<std::string>();
    r.interval_kind = j.at("interval_kind").get<std::string>();
    r.interval_prob = j.at("interval_prob").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.runtime_seconds = j.at("runtime_seconds").get<double>();
    for (const auto& pj : j.at("params")) {
      ParamSummary p;
      p.name = pj.at("name").get<std::string>();
      p.mean = json_real(pj.at("mean"));
      p.sd = json_real(pj.at("sd"));
      p.lower = json_real(pj.at("lower"));
      p.upper = json_real(pj.at("upper"));
      if (pj.contains("truth")) p.truth = json_real(pj["truth"]);
      if (pj.contains("diagnostics")) p.diag = json_diag(pj["diagnostics"]);
      r.params.push_back(std::move(p));
    }
    for (const auto& [k, v] : j.at("error_correlations").items()) r.error_correlations[k] = json_real(v);
    if (j.contains("reliability_ratio")) r.reliability_ratio = json_real(j["reliability_ratio"]);
    if (j.contains("score")) r.score = json_score(j["score"]);
    if (j.contains("mcmc")) {
      const auto& mj = j["mcmc"];
      McmcInfo info;
      info.draws = mj.at("draws").get<std::size_t>();
      info.burnin = mj.at("burnin").get<std::size_t>();
      info.thin = mj.at("thin").get<std::size_t>();
      info.retained = mj.at("retained").get<std::size_t>();
      info.dataset_digest = mj.at("dataset_digest").get<std::string>();
      r.mcmc = info;
    }
    if (j.contains("variational")) {
      const auto& vj = j["variational"];
      VariationalInfo info;
      info.cycles = vj.at("cycles").get<std::size_t>();
      info.converged = vj.at("converged").get<bool>();
      info.tol = json_real(vj.at("tol"));
      info.elbo = json_real(vj.at("elbo"));
      for (const auto& v : vj.at("elbo_trace")) info.elbo_trace.push_back(json_real(v));
      r.variational = info;
    }
  } catch (const json::exception& err) {
    throw ParseError(std::string("report: ") + err.what());
  }
  return r;
}

void save_report(const FitReport& report, const fs::path& path) { write_text(path, report_to_string(report)); }

FitReport load_report(const fs::path& path) {
  try {
    return report_from_string(read_text(path));
  } catch (const ParseError& err) {
    throw ParseError("'" + path.string() + "': " + err.what());
  }
}

void save_study(const StudySummary& s, const fs::path& path) {
  ordered_json j;
  j["estimator"] = s.estimator;
  j["reps"] = s.reps;
  j["failures"] = s.failures;
  j["failure_messages"] = s.failure_messages;
  j["seed"] = s.seed;
  ordered_json params = ordered_json::array();
  for (const auto& p : s.params) {
    ordered_json pj;
    pj["name"] = p.name;
    if (p.truth) pj["truth"] = real_json(*p.truth);
    pj["mean"] = real_json(p.mean);
    if (p.relative_error) pj["relative_error"] = real_json(*p.relative_error);
    pj["sd"] = real_json(p.sd);
    pj["lower"] = real_json(p.lower);
    pj["upper"] = real_json(p.upper);
    if (p.inefficiency_factor) pj["inefficiency_factor"] = real_json(*p.inefficiency_factor);
    params.push_back(std::move(pj));
  }
  j["params"] = std::move(params);
  if (s.reliability_ratio) j["reliability_ratio"] = real_json(*s.reliability_ratio);
  if (s.score) j["score"] = score_json(*s.score);
  if (s.mean_cycles) j["mean_cycles"] = real_json(*s.mean_cycles);
  if (s.mean_elbo) j["mean_elbo"] = real_json(*s.mean_elbo);
  if (s.mean_cycles) j["converged"] = s.converged;
  write_text(path, j.dump(2) + "\n");
}

void write_chain(const GibbsChain& chain, const fs::path& path) {
  std::string text;
  for (std::size_t c = 0; c < chain.names.size(); ++c) text += (c ? "," : "") + chain.names[c];
  text += "\n";
  for (Index r = 0; r < chain.draws.rows(); ++r) {
    for (Index c = 0; c < chain.draws.cols(); ++c) {
      if (c) text += ",";
      text += format_real(chain.draws(r, c));
    }
    text += "\n";
  }
  write_text(path, text);
}

GibbsChain read_chain(const fs::path& path) {
  const Table t = read_csv(path);
  GibbsChain chain;
  chain.names = t.header;
  const auto rows = static_cast<Index>(t.columns.empty() ? 0 : t.columns[0].size());
  chain.draws.resize(rows, static_cast<Index>(t.columns.size()));
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    chain.draws.col(static_cast<Index>(c)) = Eigen::Map<const VectorXd>(t.columns[c].data(), rows);
  }
  infer_layout(chain);
  chain.config.draws = static_cast<std::size_t>(rows) + 1;
  chain.config.burnin = 0;
  chain.config.thin = 1;
  return chain;
}

void write_latent_summary(const GibbsChain& chain, const fs::path& path) {
  std::string text = "i,m,mean,var\n";
  for (Index i = 0; i < chain.z_mean.rows(); ++i) {
    for (Index m = 0; m < chain.z_mean.cols(); ++m) {
      text += std::to_string(i + 1) + "," + std::to_string(m + 1) + "," + format_real(chain.z_mean(i, m)) + "," +
              format_real(chain.z_var(i, m)) + "\n";
    }
  }
  write_text(path, text);
}

void write_density(const diag::Density& density, const fs::path& path) {
  std::string text = "x,density\n";
  for (std::size_t g = 0; g < density.grid.size(); ++g) {
    text += format_real(density.grid[g]) + "," + format_real(density.density[g]) + "\n";
  }
  write_text(path, text);
}

}  // namespace surme::io
