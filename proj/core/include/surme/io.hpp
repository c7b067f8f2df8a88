#pragma once

// File formats: CSV data tables described by a JSON manifest, JSON prior and
// report documents, and CSV chain dumps.

#include <filesystem>
#include <string>
#include <vector>

#include "surme/chain.hpp"
#include "surme/diagnostics.hpp"
#include "surme/model.hpp"
#include "surme/report.hpp"
#include "surme/simulate.hpp"

namespace surme::io {

namespace fs = std::filesystem;

/// Marker in a covariate list that stands for a column of ones.
inline constexpr const char* kConstMarker = "__const__";

struct EquationSpec {
  std::string response;
  std::vector<std::string> covariates;
  std::string reading;
};

/// JSON document:
///   {"data": "table.csv", "exposure": true, "truth": "truth.json",
///    "equations": [{"response": "y1", "covariates": ["__const__", "x1"],
///                   "reading": "w1"}, ...]}
/// Relative paths resolve against the manifest's directory; "truth" is optional.
struct DatasetManifest {
  fs::path data_path;
  std::vector<EquationSpec> equations;
  bool exposure = true;
  fs::path truth_path;
};

DatasetManifest load_manifest(const fs::path& path);
void save_manifest(const DatasetManifest& manifest, const fs::path& path);

/// Reads the table named by the manifest. Errors name the missing column or
/// the offending row and column.
SurDataset load_dataset(const DatasetManifest& manifest);
SurDataset load_dataset(const fs::path& manifest_path);

/// Writes <dir>/<stem>.csv, <dir>/<stem>.json (manifest) and, when the dataset
/// carries ground truth, <dir>/<stem>_truth.json. Reals use 17 significant
/// digits so a reload is bit-exact. Returns the manifest path.
fs::path save_dataset(const SurDataset& data, const fs::path& dir, const std::string& stem = "data");

void save_truth(const GroundTruth& truth, const fs::path& path);
GroundTruth load_truth(const fs::path& path);

/// Prior document with keys beta0, B0, gamma0, G0, nu0, S0, omega0, O0,
/// delta1..delta4, mu0, sigma_mu2. Absent keys take PriorSpec::defaults.
PriorSpec load_priors(const fs::path& path, const std::vector<Index>& k_per_equation, bool exposure);
void save_priors(const PriorSpec& priors, const fs::path& path);

std::string report_to_string(const FitReport& report);
FitReport report_from_string(const std::string& text);
void save_report(const FitReport& report, const fs::path& path);
FitReport load_report(const fs::path& path);

void save_study(const StudySummary& summary, const fs::path& path);

/// Header of parameter names, then one row per retained draw.
void write_chain(const GibbsChain& chain, const fs::path& path);
/// Reads a chain file and rebuilds its layout from the column names.
GibbsChain read_chain(const fs::path& path);

/// Table "i,m,mean,var" of latent posterior moments (1-based indices).
void write_latent_summary(const GibbsChain& chain, const fs::path& path);

/// Two-column "x,density" table.
void write_density(const diag::Density& density, const fs::path& path);

/// Decimal rendering with 17 significant digits.
std::string format_real(double value);

}  // namespace surme::io
