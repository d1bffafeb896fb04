#include "config.hpp"

#include "clayer/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace clayer::cli {

namespace {

Vec2 vec2(const json& j, const char* key, Vec2 def) {
  if (!j.contains(key)) return def;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) throw ValidationError(std::string(key) + " must be a pair of numbers");
  return {v[0].get<double>(), v[1].get<double>()};
}

void only_keys(const json& j, const std::string& block, std::set<std::string> allowed) {
  if (!j.is_object()) throw ValidationError("block '" + block + "' must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ValidationError("block '" + block + "': unknown key '" + k + "'");
}

template <class F>
void in_block(const std::string& block, F&& f) {
  try {
    f();
  } catch (const json::exception& e) {
    throw ValidationError("block '" + block + "': " + e.what());
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    if (msg.rfind("block '", 0) == 0) throw;
    throw ValidationError("block '" + block + "': " + msg);
  }
}

}  // namespace

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string ExperimentConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  only_keys(j, "config", {"problem", "curve", "layers", "toda", "output"});
  if (!j.contains("problem")) throw ValidationError("block 'problem' is required");
  json norm;

  in_block("problem", [&] {
    const json& b = j.at("problem");
    only_keys(b, "problem", {"p", "matrix_field", "domain", "h", "psi", "profile_p"});
    auto& P = c.problem;
    P.p = b.at("p").get<double>();
    if (!(P.p > 1.0)) throw ValidationError("p must exceed 1");
    if (b.contains("matrix_field")) P.matrix_field = b.at("matrix_field");
    if (b.contains("domain")) P.domain = b.at("domain");
    P.h = b.value("h", P.h);
    if (!(P.h > 0.0 && P.h < 0.5)) throw ValidationError("h must lie in (0, 0.5)");
    P.psi = b.value("psi", P.psi);
    if (P.psi != "eigen" && P.psi != "bessel") throw ValidationError("psi must be 'eigen' or 'bessel'");
    P.profile_p = b.value("profile_p", std::vector<double>{P.p});
    for (double q : P.profile_p)
      if (!(q > 1.0)) throw ValidationError("profile_p entries must exceed 1");
    make_matrix_field(P.matrix_field);
    make_indicator(P.domain);
    norm["problem"] = {{"p", P.p},   {"matrix_field", P.matrix_field}, {"domain", P.domain},
                       {"h", P.h},   {"psi", P.psi},                   {"profile_p", P.profile_p}};
  });

  if (j.contains("toda")) {
    in_block("toda", [&] {
      const json& b = j.at("toda");
      only_keys(b, "toda", {"c1", "c2", "lambda_star", "modes"});
      c.toda.c1 = b.value("c1", 1.0);
      c.toda.c2 = b.value("c2", 1.0);
      const std::string ls = b.value("lambda_star", std::string("4pi"));
      if (ls != "4pi" && ls != "4pi2") throw ValidationError("lambda_star must be '4pi' or '4pi2'");
      c.toda.lambda_star_4pi2 = ls == "4pi2";
      c.toda.modes = b.value("modes", 256);
      if (!(c.toda.c1 > 0.0 && c.toda.c2 > 0.0)) throw ValidationError("c1 and c2 must be positive");
    });
  }
  norm["toda"] = {{"c1", c.toda.c1},
                  {"c2", c.toda.c2},
                  {"lambda_star", c.toda.lambda_star_4pi2 ? "4pi2" : "4pi"},
                  {"modes", c.toda.modes}};

  if (j.contains("curve")) {
    in_block("curve", [&] {
      const json& b = j.at("curve");
      only_keys(b, "curve", {"initial", "m", "optimize", "tol", "max_iter", "delta0"});
      CurveBlock cb;
      if (b.contains("initial")) cb.initial = b.at("initial");
      cb.m = b.value("m", c.toda.modes);
      if (j.contains("toda") && j.at("toda").contains("modes") && cb.m != c.toda.modes)
        throw ValidationError("m differs from toda.modes");
      cb.optimize = b.value("optimize", false);
      cb.tol = b.value("tol", cb.tol);
      cb.max_iter = b.value("max_iter", cb.max_iter);
      cb.delta0 = b.value("delta0", cb.delta0);
      if (cb.m < 16 || cb.m % 2) throw ValidationError("m must be even and at least 16");
      if (!(cb.delta0 > 0.0)) throw ValidationError("delta0 must be positive");
      if (!cb.initial.is_object() || !cb.initial.contains("name"))
        throw ValidationError("initial must be an object with a name");
      c.toda.modes = cb.m;
      c.curve = cb;
      norm["curve"] = {{"initial", cb.initial}, {"m", cb.m},         {"optimize", cb.optimize},
                       {"tol", cb.tol},         {"max_iter", cb.max_iter}, {"delta0", cb.delta0}};
    });
  }

  if (j.contains("layers")) {
    in_block("layers", [&] {
      const json& b = j.at("layers");
      only_keys(b, "layers", {"N", "eps", "order", "e_coupling", "delta", "refine_k", "newton"});
      if (!(c.problem.p > 3.0)) throw ValidationError("layers require p > 3");
      LayersBlock L;
      L.N = b.at("N").get<int>();
      L.eps = b.at("eps").get<std::vector<double>>();
      L.order = b.value("order", 1);
      L.e_coupling = b.value("e_coupling", true);
      L.delta = b.value("delta", L.delta);
      L.refine_k = b.value("refine_k", 2);
      L.newton = b.value("newton", false);
      if (L.N < 1 || L.N > 16) throw ValidationError("N must lie in 1..16");
      if (L.eps.empty()) throw ValidationError("eps list is empty");
      for (size_t i = 0; i < L.eps.size(); ++i) {
        if (!(L.eps[i] > 0.0 && L.eps[i] < 1.0)) throw ValidationError("eps entries must lie in (0, 1)");
        if (i && !(L.eps[i] < L.eps[i - 1])) throw ValidationError("eps list must be strictly decreasing");
      }
      if (L.order != 0 && L.order != 1) throw ValidationError("order must be 0 or 1");
      if (L.refine_k < 1) throw ValidationError("refine_k must be at least 1");
      if (!(L.delta > 0.0)) throw ValidationError("delta must be positive");
      c.layers = L;
      norm["layers"] = {{"N", L.N},         {"eps", L.eps},           {"order", L.order},
                        {"e_coupling", L.e_coupling}, {"delta", L.delta}, {"refine_k", L.refine_k},
                        {"newton", L.newton}};
    });
  }

  if (j.contains("output")) {
    in_block("output", [&] {
      const json& b = j.at("output");
      only_keys(b, "output", {"directory", "formats"});
      c.output.directory = b.value("directory", c.output.directory);
      if (b.contains("formats")) {
        auto f = b.at("formats").get<std::vector<std::string>>();
        c.output.csv = c.output.json = false;
        for (const auto& s : f) {
          if (s == "csv")
            c.output.csv = true;
          else if (s == "json")
            c.output.json = true;
          else
            throw ValidationError("unknown format '" + s + "'");
        }
      }
    });
  }
  c.canonical = norm.dump();
  c.hash = fnv1a(c.canonical);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

MatrixField make_matrix_field(const json& s) {
  const std::string name = s.at("name").get<std::string>();
  if (name == "identity") return MatrixField::identity();
  if (name == "scaled") return MatrixField::scaled(s.at("c").get<double>());
  if (name == "diagonal") return MatrixField::diagonal(s.at("d1").get<double>(), s.at("d2").get<double>());
  if (name == "sine_diagonal") {
    double a = s.at("a").get<double>();
    if (!(std::abs(a) < 1.0)) throw ValidationError("sine_diagonal needs |a| < 1");
    return MatrixField::sine_diagonal(a);
  }
  if (name == "rotated_diagonal") {
    double d1 = s.at("d1").get<double>(), d2 = s.at("d2").get<double>();
    if (!(d1 > 0.0 && d2 > 0.0)) throw ValidationError("rotated_diagonal needs positive d1, d2");
    return MatrixField::rotated_diagonal(d1, d2, s.value("angle", 0.0), s.value("twist", 0.0));
  }
  throw ValidationError("unknown matrix field '" + name + "'");
}

std::function<bool(const Vec2&)> make_indicator(const json& d) {
  const std::string name = d.at("name").get<std::string>();
  const Vec2 c = vec2(d, "center", Vec2::Zero());
  if (name == "disk") {
    double R = d.value("radius", 1.0);
    if (!(R > 0.0)) throw ValidationError("disk radius must be positive");
    return [=](const Vec2& x) { return (x - c).norm() < R; };
  }
  if (name == "square") {
    Vec2 lo = vec2(d, "lo", Vec2::Zero());
    double side = d.value("side", 1.0);
    if (!(side > 0.0)) throw ValidationError("square side must be positive");
    return [=](const Vec2& x) { return (x - lo).minCoeff() > 0.0 && (x - lo).maxCoeff() < side; };
  }
  if (name == "ellipse") {
    double a = d.value("a", 1.0), b = d.value("b", 0.7);
    if (!(a > 0.0 && b > 0.0)) throw ValidationError("ellipse semi-axes must be positive");
    return [=](const Vec2& x) {
      Vec2 y = x - c;
      return y[0] * y[0] / (a * a) + y[1] * y[1] / (b * b) < 1.0;
    };
  }
  throw ValidationError("unknown domain '" + name + "'");
}

field2d::DomainGrid make_grid(const ProblemBlock& p) {
  const json& d = p.domain;
  const std::string name = d.at("name").get<std::string>();
  const Vec2 c = vec2(d, "center", Vec2::Zero());
  make_indicator(d);
  if (name == "disk") return field2d::DomainGrid::disk(c, d.value("radius", 1.0), p.h);
  if (name == "square") return field2d::DomainGrid::square(vec2(d, "lo", Vec2::Zero()), d.value("side", 1.0), p.h);
  return field2d::DomainGrid::ellipse(c, d.value("a", 1.0), d.value("b", 0.7), p.h);
}

geometry::Curve make_curve(const ExperimentConfig& c, std::uint64_t seed) {
  if (!c.curve) throw ValidationError("block 'curve' is required for this command");
  const CurveBlock& b = *c.curve;
  const json& s = b.initial;
  const std::string name = s.at("name").get<std::string>();
  const Vec2 center = vec2(s, "center", Vec2::Zero());
  if (name == "critical_circle") {
    const json& d = c.problem.domain;
    if (d.at("name") != "disk" || c.problem.matrix_field.at("name") != "identity" || c.problem.psi != "bessel")
      throw ValidationError("block 'curve': critical_circle needs a disk domain, identity field and psi = bessel");
    const double R = d.value("radius", 1.0);
    return geometry::Curve::circle(vec2(d, "center", Vec2::Zero()),
                                   geometry::critical_radius_bessel(c.problem.p, R), b.m);
  }
  if (name == "circle") return geometry::Curve::circle(center, s.at("radius").get<double>(), b.m);
  if (name == "ellipse")
    return geometry::Curve::ellipse(center, s.at("a").get<double>(), s.at("b").get<double>(), b.m,
                                    s.value("tilt", 0.0));
  if (name == "star")
    return geometry::Curve::star(center, s.at("radius").get<double>(), s.value("c", std::vector<double>{}),
                                 s.value("s", std::vector<double>{}), b.m);
  if (name == "random_star") {
    // radius perturbed by seeded Fourier coefficients of size amplitude / k^2
    const int modes = s.value("modes", 4);
    const double amp = s.value("amplitude", 0.02);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> cc(modes, 0.0), ss(modes, 0.0);
    for (int k = 0; k < modes; ++k) {
      cc[k] = amp * U(rng) / ((k + 1.0) * (k + 1.0));
      ss[k] = amp * U(rng) / ((k + 1.0) * (k + 1.0));
    }
    return geometry::Curve::star(center, s.at("radius").get<double>(), cc, ss, b.m);
  }
  throw ValidationError("block 'curve': unknown initial curve '" + name + "'");
}

toda::GapOptions gap_options(const TodaBlock& t) {
  toda::GapOptions g;
  g.c1 = t.c1;
  g.c2 = t.c2;
  g.lambda_star_4pi2 = t.lambda_star_4pi2;
  return g;
}

}  // namespace clayer::cli
