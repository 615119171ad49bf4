#include <cmath>
#include <set>

#include "datagen_check.hpp"
#include "doctest.h"
#include "nslang/datagen.hpp"
#include "nslang/errors.hpp"
#include "test_support.hpp"

using namespace nslang;
using testing::paper_grid;

TEST_CASE("counter generator") {
  CounterRng a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    CHECK(va != c.next_u64());
    CHECK(va != d.next_u64());
    seen.insert(va);
  }
  CHECK(seen.size() == 1000);
  CHECK(a.counter() == 1000);
  CHECK(CounterRng::kAlgorithm == "splitmix64-ctr");

  CounterRng r(1, 0);
  std::vector<double> u, z, e;
  for (int i = 0; i < 100000; ++i) {
    u.push_back(r.uniform());
    z.push_back(r.normal());
    e.push_back(r.exponential());
  }
  for (double x : u) REQUIRE((x >= 0.0 && x < 1.0));
  CHECK(testing::ks_pvalue(testing::ks_statistic(u, [](double x) { return x; }), u.size()) > 0.01);
  CHECK(testing::ks_pvalue(testing::ks_statistic(z, [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }),
                           z.size()) > 0.01);
  CHECK(testing::ks_pvalue(testing::ks_statistic(e, [](double x) { return 1 - std::exp(-x); }), e.size()) > 0.01);
  auto [mz, vz] = testing::mean_var(z);
  CHECK(std::abs(mz) < 0.01);
  CHECK(std::abs(vz - 1) < 0.02);
}

TEST_CASE("config and preset names") {
  SimConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.dt = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = SimConfig{};
  cfg.t_max = 1e-5;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = SimConfig{};
  cfg.n_trials = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  for (auto p : {Preset::Ramping, Preset::Stepping, Preset::Custom})
    CHECK(preset_from_string(to_string(p)) == p);
  CHECK_THROWS_AS(preset_from_string("bursting"), ParameterError);
  CHECK(boundary_sign(Termination::UpperBoundary) == 1);
  CHECK(boundary_sign(Termination::LowerBoundary) == -1);
  CHECK(boundary_sign(Termination::TimeLimit) == 0);
}

TEST_CASE("preset models") {
  auto g = default_grid();
  CHECK(g->size() == 449);
  auto ramp = preset_model(Preset::Ramping, g);
  CHECK(ramp.diffusion == 0.56);
  CHECK((differentiate(ramp.phi).values.array() + 2.65).abs().maxCoeff() < 1e-10);
  auto step = preset_model(Preset::Stepping, g);
  CHECK(step.diffusion == 1.0);
  for (const auto& m : {ramp, step}) {
    CHECK(testing::max_abs(m.rate.values - default_rate(g).values) == 0.0);
    CHECK(testing::max_abs(m.f0.values + 200.0 * g->nodes()) < 1e-12);
  }
  // two barriers separate the central well from the boundaries
  const auto& x = g->nodes();
  const auto& phi = step.phi.values;
  int maxima = 0;
  for (Eigen::Index i = 1; i + 1 < x.size(); ++i)
    if (phi[i] > phi[i - 1] && phi[i] > phi[i + 1]) ++maxima;
  CHECK(maxima == 2);
  CHECK_THROWS_AS(preset_model(Preset::Custom, g), ParameterError);
}

TEST_CASE("initial state sampling follows p0") {
  auto m = preset_model(Preset::Ramping, paper_grid());
  CounterRng rng(3, 0);
  std::vector<double> xs;
  for (int i = 0; i < 10000; ++i) xs.push_back(sample_initial_state(m, rng.uniform()));
  auto [mean, var] = testing::mean_var(xs);
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(std::sqrt(var) / std::sqrt(1.0 / 200) - 1) < 0.1);
  CHECK(sample_initial_state(m, 0.0) == doctest::Approx(-1.0));
  CHECK(sample_initial_state(m, 0.5) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("deterministic drift reaches the boundary at distance over speed") {
  auto g = paper_grid();
  auto m = LatentModel::from_force(constant(g, 14840.0), constant(g, 0.0), 1e-4, default_rate(g));
  auto path = simulate_trajectory_with(m, Task::reaction_time(), 1e-4, 10.0, 0.0, [] { return 0.0; });
  CHECK(path.terminated_by == Termination::UpperBoundary);
  CHECK(path.t.back() == doctest::Approx(1.0 / 1.484).epsilon(1e-9));
  CHECK(path.x.back() == 1.0);

  double mean = 0.0;
  for (int i = 0; i < 200; ++i) {
    CounterRng rng(5, i);
    mean += simulate_trajectory_with(m, Task::reaction_time(), 1e-4, 10.0, 0.0,
                                     [&] { return rng.normal(); }).t.back();
  }
  CHECK(std::abs(mean / 200 - 0.674) < 2e-3);
}

TEST_CASE("reflected diffusion relaxes to the uniform density") {
  auto g = paper_grid();
  // start concentrated at 0; the slowest mode decays as exp(-pi^2 t / 4)
  auto m = LatentModel::from_force(constant(g, 0.0), sample(g, [](double x) { return -200 * x; }),
                                   1.0, default_rate(g));
  std::vector<double> ends;
  for (int i = 0; i < 10000; ++i) {
    CounterRng rng(10, i);
    auto p = simulate_trajectory(m, Task::fixed_duration(4.0), 1e-3, 10.0, rng);
    REQUIRE(p.terminated_by == Termination::EndOfTrial);
    REQUIRE(p.t.back() == 4.0);
    ends.push_back(p.x.back());
  }
  const double d = testing::ks_statistic(ends, [](double x) { return 0.5 * (x + 1); });
  CHECK(testing::ks_pvalue(d, ends.size()) > 0.01);
}

TEST_CASE("simulation arguments") {
  auto m = preset_model(Preset::Ramping, paper_grid());
  auto zero = [] { return 0.0; };
  CHECK_THROWS_AS(simulate_trajectory_with(m, Task::reaction_time(), 0.0, 1.0, 0.0, zero), ParameterError);
  CHECK_THROWS_AS(simulate_trajectory_with(m, Task::reaction_time(), 1e-3, 1.0, 1.5, zero), ParameterError);
  auto capped = simulate_trajectory_with(m, Task::reaction_time(), 1e-3, 0.05, 0.0, zero);
  CHECK(capped.terminated_by == Termination::TimeLimit);
  CHECK(capped.t.back() == doctest::Approx(0.05));
}

TEST_CASE("time rescaling on frozen paths") {
  auto g = paper_grid();
  auto rate = default_rate(g);
  auto counts = testing::frozen_counts(rate, 0.0, 1.0, 10000, 21);
  auto [mean, var] = testing::mean_var(counts);
  CHECK(std::abs(mean / 60 - 1) < 0.01);
  CHECK(std::abs(var / 60 - 1) < 0.05);

  CHECK(testing::frozen_counts(constant(g, 0.0), 0.3, 5.0, 10, 1) == std::vector<double>(10, 0.0));

  // paired seeds: doubling the rate doubles the count
  auto doubled = GridFunction(g, 2 * rate.values);
  auto c1 = testing::frozen_counts(rate, 0.5, 1.0, 4000, 22);
  auto c2 = testing::frozen_counts(doubled, 0.5, 1.0, 4000, 22);
  const double ratio = testing::mean_var(c2).first / testing::mean_var(c1).first;
  CHECK(std::abs(ratio - 2) < 0.05);

  Path path;
  path.t = {0.0, 200.0};
  path.x = {0.0, 0.0};
  CounterRng rng(23, 0);
  auto spikes = spikes_from_path(path, rate, rng);
  REQUIRE(spikes.size() > 10000);
  std::vector<double> isi;
  for (std::size_t i = 1; i < spikes.size(); ++i) {
    REQUIRE(spikes[i] > spikes[i - 1]);
    isi.push_back(spikes[i] - spikes[i - 1]);
  }
  const double d = testing::ks_statistic(isi, [](double t) { return 1 - std::exp(-60 * t); });
  CHECK(testing::ks_pvalue(d, isi.size()) > 0.01);
}

TEST_CASE("halving dt barely moves the mean first-passage time") {
  auto m = preset_model(Preset::Ramping, paper_grid());
  auto [coarse, fine] = testing::coupled_mean_fpt(m, 1e-4, 1000, 31);
  CHECK(std::abs(coarse / fine - 1) < 0.02);
}

TEST_CASE("property: generated trials satisfy the trial contract") {
  auto g = paper_grid();
  for (auto preset : {Preset::Ramping, Preset::Stepping}) {
    auto m = preset_model(preset, g);
    for (auto task : {Task::reaction_time(), Task::fixed_duration(0.8)}) {
      SimConfig cfg;
      cfg.n_trials = 30;
      cfg.seed = 100 + static_cast<int>(preset);
      cfg.task = task;
      auto data = generate_dataset(m, to_string(preset), cfg, 2);
      REQUIRE(data.trials.size() == 30);
      for (std::size_t i = 0; i < data.trials.size(); ++i) {
        const auto& tr = data.trials[i];
        CHECK_NOTHROW(validate_trial(tr));
        CHECK(tr.t0 == 0.0);
        if (task.kind == TaskKind::ReactionTime) {
          CHECK(std::abs(data.boundary[i]) == 1);
        } else {
          CHECK(tr.tE == 0.8);
          CHECK(data.boundary[i] == 0);
        }
      }
      CHECK(data.metadata["generator_id"] == "splitmix64-ctr");
      CHECK(data.metadata["seed"] == cfg.seed);
    }
  }
}

TEST_CASE("datasets are reproducible and round trip through JSON") {
  auto m = preset_model(Preset::Ramping, paper_grid());
  SimConfig cfg;
  cfg.n_trials = 1;
  cfg.seed = 77;
  auto a = generate_dataset(m, "ramping", cfg);
  auto b = generate_dataset(m, "ramping", cfg, 4);
  CHECK(a.trials[0].spikes == b.trials[0].spikes);
  CHECK(a.trials[0].tE == b.trials[0].tE);

  cfg.n_trials = 8;
  auto c = generate_dataset(m, "ramping", cfg, 3);
  auto d = generate_dataset(m, "ramping", cfg, 1);
  CHECK(c.trials[0].spikes == a.trials[0].spikes);
  auto back = dataset_from_json(nlohmann::json::parse(dataset_to_json(c).dump()));
  REQUIRE(back.trials.size() == c.trials.size());
  for (std::size_t i = 0; i < c.trials.size(); ++i) {
    CHECK(back.trials[i].spikes == c.trials[i].spikes);
    CHECK(back.trials[i].spikes == d.trials[i].spikes);
    CHECK(back.trials[i].tE == c.trials[i].tE);
    CHECK(back.boundary[i] == c.boundary[i]);
  }
  CHECK(back.metadata == c.metadata);

  auto bad = dataset_to_json(c);
  bad["trials"][0]["spikes"] = {0.5, 0.2};
  CHECK_THROWS_AS(dataset_from_json(bad), ParameterError);
}

TEST_CASE("reaction-time statistics of the presets") {
  auto g = paper_grid();
  SimConfig cfg;
  cfg.n_trials = 200;
  cfg.seed = 7;
  auto ramp = generate_dataset(preset_model(Preset::Ramping, g), "ramping", cfg);
  double up = 0, rt = 0;
  for (std::size_t i = 0; i < ramp.trials.size(); ++i) {
    up += ramp.boundary[i] > 0;
    rt += ramp.trials[i].tE;
  }
  CHECK(up / 200 > 0.8);
  CHECK(rt / 200 > 0.1);
  CHECK(rt / 200 < 3.0);

  auto step = generate_dataset(preset_model(Preset::Stepping, g), "stepping", cfg);
  double lower = 0;
  for (int b : step.boundary) lower += b < 0;
  CHECK(lower / 200 > 0.02);
  CHECK(lower / 200 < 0.5);
}
