#include "clayer/assembler.hpp"
#include "clayer/field2d.hpp"
#include "clayer/geometry.hpp"
#include "clayer/profile1d.hpp"
#include "clayer/toda.hpp"

#include <benchmark/benchmark.h>

using namespace clayer;

namespace {

constexpr double kP = 4.0;

field2d::DomainGrid disk(int inv_h) { return field2d::DomainGrid::disk({0, 0}, 1.0, 1.0 / inv_h); }

geometry::CurveGeometry critical_circle(int m) {
  geometry::BuildOptions o;
  o.p = kP;
  o.delta0 = 0.44;
  const double R = geometry::critical_radius_bessel(kP);
  return geometry::build_curve(geometry::Curve::circle({0, 0}, R, m), MatrixField::identity(),
                               ScalarField::power(ScalarField::bessel_disk(), 1.0 / kP), o);
}

field2d::EigenField bessel_field(int inv_h) {
  const double j = bessel_j0_zero();
  return field2d::sampled_eigenfield(disk(inv_h), MatrixField::identity(), ScalarField::bessel_disk(), j * j);
}

void BM_ProfileBuild(benchmark::State& st) {
  const auto grid = profile1d::ProfileGrid::make(kP, static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(profile1d::build_profile(kP, grid));
}
BENCHMARK(BM_ProfileBuild)->Arg(2001)->Arg(4001)->Unit(benchmark::kMillisecond);

void BM_OperatorAssembly(benchmark::State& st) {
  const auto grid = disk(static_cast<int>(st.range(0)));
  const auto A = MatrixField::rotated_diagonal(2.0, 1.0, 0.3);
  for (auto _ : st) benchmark::DoNotOptimize(field2d::discretize_operator(grid, A));
  st.counters["unknowns"] = grid.unknowns();
}
BENCHMARK(BM_OperatorAssembly)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_FirstEigenpair(benchmark::State& st) {
  const auto grid = disk(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(field2d::first_eigenpair(grid, MatrixField::identity()));
}
BENCHMARK(BM_FirstEigenpair)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_NegativeBranch(benchmark::State& st) {
  const auto ef = bessel_field(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(field2d::solve_negative_branch(ef, 0.03, kP));
}
BENCHMARK(BM_NegativeBranch)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_SolveRho(benchmark::State& st) {
  const auto ps = profile1d::build_profile(kP);
  double eps = 0.01;
  for (auto _ : st) {
    benchmark::DoNotOptimize(toda::solve_rho(eps, kP, ps.alpha_p, ps.C0));
    eps = eps < 0.05 ? eps * 1.01 : 0.01;
  }
}
BENCHMARK(BM_SolveRho);

void BM_FermiChart(benchmark::State& st) {
  const auto g = critical_circle(256);
  const auto grid = disk(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(assembler::fermi_chart(g, grid, 0.44));
}
BENCHMARK(BM_FermiChart)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_TubeResidual(benchmark::State& st) {
  const auto g = critical_circle(256);
  const auto ef = bessel_field(64);
  const auto ps = profile1d::build_profile(kP);
  const auto A = MatrixField::identity();
  assembler::SweepSetup s;
  s.ef = &ef;
  s.A = &A;
  s.g = &g;
  s.ps = &ps;
  s.N = static_cast<int>(st.range(0));
  const double eps = 0.028;
  const auto layer_state = assembler::layer_state(s, eps);
  const assembler::LayerField layer(g, ps, layer_state, s.cfg);
  const auto branch = field2d::solve_negative_branch(ef, eps, kP);
  const auto ubar = field2d::interpolate(ef.grid, branch.u, "ubar");
  for (auto _ : st) benchmark::DoNotOptimize(assembler::tube_residual(layer, g, ubar, A, kP));
}
BENCHMARK(BM_TubeResidual)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
