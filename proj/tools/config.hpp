#pragma once

#include "clayer/fields.hpp"
#include "clayer/field2d.hpp"
#include "clayer/geometry.hpp"
#include "clayer/toda.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace clayer::cli {

using nlohmann::json;

struct ProblemBlock {
  double p = 4.0;
  json matrix_field = {{"name", "identity"}};
  json domain = {{"name", "disk"}, {"center", {0.0, 0.0}}, {"radius", 1.0}};
  double h = 1.0 / 128;
  std::string psi = "eigen";  // "eigen": discrete eigenvector, "bessel": exact J0 (disk, A = I)
  std::vector<double> profile_p;  // exponents tabulated by the profile command; defaults to {p}
};

struct CurveBlock {
  json initial = {{"name", "critical_circle"}};
  int m = 256;
  bool optimize = false;
  double tol = 1e-6;
  int max_iter = 40;
  double delta0 = 0.44;
};

struct LayersBlock {
  int N = 1;
  std::vector<double> eps;
  int order = 1;
  bool e_coupling = true;
  double delta = 0.14;
  int refine_k = 2;
  bool newton = false;  // assemble: also run the Newton refinement
};

struct TodaBlock {
  double c1 = 1.0, c2 = 1.0;
  bool lambda_star_4pi2 = false;
  int modes = 256;
};

struct OutputBlock {
  std::string directory = "out";
  bool csv = true, json = true;
};

struct ExperimentConfig {
  ProblemBlock problem;
  std::optional<CurveBlock> curve;
  std::optional<LayersBlock> layers;
  TodaBlock toda;
  OutputBlock output;
  std::string canonical;  // normalized JSON text the hash is taken from
  std::uint64_t hash = 0;

  std::string hash_hex() const;
};

/// Parses and validates; throws ValidationError naming the offending block.
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::string& path);

MatrixField make_matrix_field(const json& spec);
field2d::DomainGrid make_grid(const ProblemBlock& p);
/// The domain indicator without a lattice.
std::function<bool(const Vec2&)> make_indicator(const json& domain);

/// Initial curve from the curve block; "critical_circle" needs a disk, A = I and psi = bessel.
geometry::Curve make_curve(const ExperimentConfig& c, std::uint64_t seed);

toda::GapOptions gap_options(const TodaBlock& t);

/// 64-bit FNV-1a of a byte string.
std::uint64_t fnv1a(const std::string& s);

}  // namespace clayer::cli
