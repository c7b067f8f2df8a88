#include "surme/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "surme/diagnostics.hpp"
#include "surme/errors.hpp"
#include "surme/gibbs.hpp"
#include "surme/io.hpp"
#include "surme/mfvb.hpp"
#include "surme/simulate.hpp"
#include "surme/summary.hpp"

namespace surme::cli {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

struct SimulateArgs {
  std::string case_label = "I-1";
  std::optional<double> sigma_z2;
  std::optional<double> rz;
  Index n = 300;
  std::size_t reps = 1;
  std::uint64_t seed = 1;
  std::string out = "sim";
  std::string estimator;
};

struct FitArgs {
  std::string method;
  std::string data;
  std::string priors;
  std::size_t draws = 51000;
  std::size_t burnin = 1000;
  std::size_t thin = 100;
  double tol = 1e-7;
  std::size_t max_cycles = 5000;
  std::uint64_t seed = 1;
  std::string out = "fit";
};

struct DiagnoseArgs {
  std::string chain;
  std::string out;
  std::size_t lags = 10;
  double cost_ratio = 2.71;
};

struct CompareArgs {
  std::vector<std::string> fits;
  std::string out;
};

struct DensityArgs {
  std::string chain;
  std::string param;
  std::size_t grid = 512;
  std::string out;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

DgpConfig dgp_for(const SimulateArgs& a) {
  DgpConfig cfg;
  if (a.case_label == "custom") {
    if (!a.sigma_z2 || !a.rz) throw ValidationError({"--case custom needs --sigma-z2 and --rz"});
    cfg.sigma_z2 = *a.sigma_z2;
    cfg.r_z = *a.rz;
  } else {
    if (a.sigma_z2 || a.rz) throw ValidationError({"--sigma-z2 and --rz apply only to --case custom"});
    cfg = DgpConfig::preset(a.case_label);
  }
  cfg.n = a.n;
  cfg.validate();
  return cfg;
}

std::string rep_dir(std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep_%03zu", r);
  return buf;
}

int run_simulate(const SimulateArgs& a) {
  const DgpConfig cfg = dgp_for(a);
  if (a.reps == 0) throw ValidationError({"--reps must be positive"});
  const fs::path out(a.out);
  fs::create_directories(out);
  const RngStream master(a.seed);
  for (std::size_t r = 0; r < a.reps; ++r) {
    RngStream stream = master.derive(r);
    const SurDataset data = generate_dataset(cfg, stream);
    io::save_dataset(data, out / rep_dir(r));
  }
  if (!a.estimator.empty()) {
    const StudySummary study = replicate_study(cfg, a.estimator, a.reps, master);
    io::save_study(study, out / "study.json");
    std::cout << "study: " << study.reps - study.failures << " of " << study.reps << " replications fitted\n";
  }
  std::cout << "wrote " << a.reps << " dataset(s) to " << out.string() << "\n";
  return kOk;
}

int run_fit(const FitArgs& a) {
  const SurDataset data = io::load_dataset(fs::path(a.data));
  const fs::path out(a.out);
  fs::create_directories(out);

  if (a.method == "fgls") {
    io::save_report(fit_sur_fgls(data), out / "report.json");
    return kOk;
  }

  const bool exposure = io::load_manifest(fs::path(a.data)).exposure;
  PriorSpec priors;
  try {
    priors = io::load_priors(fs::path(a.priors), data.k_per_equation(), exposure);
  } catch (const PdFailure& e) {
    // A prior matrix that is not PD is bad input, not a numerical breakdown.
    throw ValidationError({std::string("prior file: ") + e.what()});
  }
  const Problem problem = validate(data, priors);

  if (a.method == "mfvb") {
    mfvb::FitOptions opts;
    opts.tol = a.tol;
    opts.max_cycles = a.max_cycles;
    mfvb::MfvbResult res = mfvb::cavi_fit(problem, opts);
    res.report.seed = a.seed;
    io::save_report(res.report, out / "report.json");
    if (!res.converged) std::cerr << "warning: not converged after " << res.state.cycles << " cycles\n";
    return kOk;
  }

  McmcConfig mc;
  mc.draws = a.draws;
  mc.burnin = a.burnin;
  mc.thin = a.thin;
  mc.seed = a.seed;
  mc.validate();
  gibbs::GibbsResult res;
  if (a.method == "gibbs-surme") {
    res = gibbs::gibbs_surme(problem, mc);
  } else if (a.method == "gibbs-sur") {
    res = gibbs::gibbs_sur(problem, mc);
  } else {
    throw ValidationError({"unknown method '" + a.method + "'"});
  }
  io::save_report(res.report, out / "report.json");
  io::write_chain(res.chain, out / "chain.csv");
  if (res.chain.model == ModelKind::surme) io::write_latent_summary(res.chain, out / "latent_z.csv");
  return kOk;
}

int run_diagnose(const DiagnoseArgs& a) {
  const GibbsChain chain = io::read_chain(fs::path(a.chain));
  if (chain.retained() < 2) throw ValidationError({"chain has fewer than two draws"});
  ordered_json doc;
  doc["chain"] = a.chain;
  doc["draws"] = chain.retained();
  ordered_json params = ordered_json::array();
  for (std::size_t c = 0; c < chain.names.size(); ++c) {
    const VectorXd col = chain.draws.col(static_cast<Index>(c));
    const std::span<const double> x(col.data(), static_cast<std::size_t>(col.size()));
    ordered_json p;
    p["name"] = chain.names[c];
    p["mean"] = col.mean();
    const ChainDiag d = diag::chain_diag(x, a.lags, 1);
    p["autocorrelations"] = d.autocorrelations;
    p["inefficiency_factor"] = d.inefficiency_factor;
    if (chain.retained() >= 200) {
      p["geweke_cd"] = d.geweke_cd;
      p["geweke_p"] = d.geweke_p;
    }
    const diag::Interval h = diag::hpdi(x, 0.95);
    p["hpdi_95"] = {h.lower, h.upper};
    const double rho1 = d.autocorrelations.empty() ? 0.0 : d.autocorrelations.front();
    if (rho1 > 0.0 && rho1 < 1.0) p["optimal_thinning"] = diag::optimal_thinning(rho1, a.cost_ratio);
    params.push_back(std::move(p));
  }
  doc["params"] = std::move(params);
  write_text(fs::path(a.out), doc.dump(2) + "\n");
  return kOk;
}

int run_compare(const CompareArgs& a) {
  if (a.fits.size() < 2) throw ValidationError({"compare needs at least two --fit reports"});
  std::string table = "fit,method,dic,p_d,mean_deviance,deviance_at_mean\n";
  for (const auto& path : a.fits) {
    const FitReport r = io::load_report(fs::path(path));
    if (!r.score) throw ValidationError({"report '" + path + "' carries no DIC"});
    table += path + "," + r.method + "," + io::format_real(r.score->dic) + "," + io::format_real(r.score->p_d) + "," +
             io::format_real(r.score->mean_deviance) + "," + io::format_real(r.score->deviance_at_mean) + "\n";
  }
  if (a.out.empty()) {
    std::cout << table;
  } else {
    write_text(fs::path(a.out), table);
  }
  return kOk;
}

int run_density(const DensityArgs& a) {
  const GibbsChain chain = io::read_chain(fs::path(a.chain));
  const VectorXd col = chain.column(a.param);
  const diag::Density d = diag::kde_density(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), a.grid);
  io::write_density(d, fs::path(a.out));
  return kOk;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Seemingly unrelated regressions with measurement error"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate synthetic datasets");
  s->add_option("--case", sim.case_label, "I-1, I-2, II-1, II-2 or custom")
      ->check(CLI::IsMember({"I-1", "I-2", "II-1", "II-2", "custom"}));
  s->add_option("--sigma-z2", sim.sigma_z2, "Latent variance (custom case)");
  s->add_option("--rz", sim.rz, "Reliability ratio (custom case)");
  s->add_option("--n", sim.n, "Observations per dataset");
  s->add_option("--reps", sim.reps, "Number of datasets");
  s->add_option("--seed", sim.seed, "Master seed");
  s->add_option("--out", sim.out, "Output directory");
  s->add_option("--estimator", sim.estimator, "Also run a study with this estimator")
      ->check(CLI::IsMember({"fgls", "gibbs-surme", "gibbs-sur", "mfvb"}));

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit a model to a dataset");
  f->add_option("--method", fit.method, "gibbs-surme, gibbs-sur, mfvb or fgls")
      ->required()
      ->check(CLI::IsMember({"gibbs-surme", "gibbs-sur", "mfvb", "fgls"}));
  f->add_option("--data", fit.data, "Dataset manifest")->required();
  f->add_option("--priors", fit.priors, "Prior file (defaults when omitted)");
  f->add_option("--draws", fit.draws, "Total sweeps");
  f->add_option("--burnin", fit.burnin, "Discarded sweeps");
  f->add_option("--thin", fit.thin, "Thinning factor");
  f->add_option("--tol", fit.tol, "Relative ELBO tolerance");
  f->add_option("--max-cycles", fit.max_cycles, "CAVI cycle limit");
  f->add_option("--seed", fit.seed, "Sampler seed");
  f->add_option("--out", fit.out, "Output directory");

  DiagnoseArgs dg;
  auto* d = app.add_subcommand("diagnose", "Chain diagnostics");
  d->add_option("--chain", dg.chain, "Chain file")->required();
  d->add_option("--out", dg.out, "Output JSON file")->required();
  d->add_option("--lags", dg.lags, "Autocorrelation lags");
  d->add_option("--cost-ratio", dg.cost_ratio, "Cost of a retained draw relative to a sweep");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "DIC table of fitted reports");
  c->add_option("--fit", cmp.fits, "Report file (repeatable)")->required();
  c->add_option("--out", cmp.out, "Output CSV file (stdout when omitted)");

  DensityArgs den;
  auto* k = app.add_subcommand("density", "Kernel density of one chain column");
  k->add_option("--chain", den.chain, "Chain file")->required();
  k->add_option("--param", den.param, "Parameter name")->required();
  k->add_option("--grid", den.grid, "Grid points")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20));
  k->add_option("--out", den.out, "Output CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*s) return run_simulate(sim);
    if (*f) return run_fit(fit);
    if (*d) return run_diagnose(dg);
    if (*c) return run_compare(cmp);
    if (*k) return run_density(den);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const PdFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const DomainError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const RankError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kUsage;
}

}  // namespace surme::cli
