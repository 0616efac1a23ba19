#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <vector>

#include "sitetrack/errors.hpp"
#include "sitetrack/metrics.hpp"
#include "sitetrack/sim.hpp"

using namespace sitetrack;
using namespace sitetrack::metrics;
using Eigen::Vector2d;

namespace {

Series series_of(std::initializer_list<std::pair<int, Vector2d>> items) {
  Series s;
  for (const auto& [t, p] : items) s[t] = p;
  return s;
}

sim::GroundTruth two_agent_truth(int scans) {
  sim::GroundTruth truth;
  for (int a = 0; a < 2; ++a) {
    sim::AgentTruth at;
    at.agent_id = a;
    at.device_id = a;
    for (int t = 0; t < scans; ++t) {
      // Parallel lanes 5 m apart; comfortably beyond any swap radius.
      at.positions.emplace_back(0.5 * t, a * 5.0);
    }
    truth.agents.push_back(at);
  }
  return truth;
}

}  // namespace

TEST_CASE("rmse of identical series is zero") {
  Series truth = series_of({{0, {1, 2}}, {1, {3, 4}}, {2, {-1, 0.5}}});
  CHECK(compute_rmse(truth, truth) == doctest::Approx(0.0));
}

TEST_CASE("rmse of a constant offset equals the offset norm") {
  Series truth, est;
  for (int t = 0; t < 7; ++t) {
    truth[t] = Vector2d(t * 0.3, -t * 0.1);
    est[t] = truth[t] + Vector2d(0.3, 0.4);  // norm 0.5
  }
  CHECK(compute_rmse(truth, est) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("rmse pools squared errors before the root") {
  // Errors {1, 0, 0, 0}: rms = sqrt(1/4) = 0.5, not mean(|e|) = 0.25.
  Series truth, est;
  for (int t = 0; t < 4; ++t) {
    truth[t] = Vector2d(0, 0);
    est[t] = Vector2d(t == 0 ? 1.0 : 0.0, 0.0);
  }
  CHECK(compute_rmse(truth, est) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("rmse matches by scan key, ignoring unmatched scans") {
  Series truth = series_of({{0, {0, 0}}, {2, {1, 0}}, {5, {2, 0}}});
  Series est = series_of({{2, {1, 1}}, {5, {2, 1}}, {9, {99, 99}}});  // scan 9 has no truth
  CHECK(compute_rmse(truth, est) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rmse with no shared scans throws") {
  Series truth = series_of({{0, {0, 0}}, {1, {1, 0}}});
  Series est = series_of({{2, {0, 0}}});
  CHECK_THROWS_AS(compute_rmse(truth, est), NoOverlap);
}

TEST_CASE("percentile interpolates linearly") {
  ErrorCdf cdf = error_cdf({4.0, 2.0, 1.0, 3.0});
  CHECK(cdf.sorted == std::vector<double>{1.0, 2.0, 3.0, 4.0});
  CHECK(cdf.percentile(0.5) == doctest::Approx(2.5));
  CHECK(cdf.percentile(0.0) == doctest::Approx(1.0));
  CHECK(cdf.percentile(1.0) == doctest::Approx(4.0));
}

TEST_CASE("percentile of an all-equal sample is that value") {
  ErrorCdf cdf = error_cdf({0.7, 0.7, 0.7});
  for (double p : {0.0, 0.25, 0.5, 0.9, 1.0}) {
    CHECK(cdf.percentile(p) == doctest::Approx(0.7));
  }
}

TEST_CASE("an empty sample is rejected at both entry points") {
  CHECK_THROWS_AS(error_cdf({}), EmptyInput);
  ErrorCdf cdf;  // bypass the factory; percentile still guards
  CHECK_THROWS_AS(cdf.percentile(0.5), EmptyInput);
}

TEST_CASE("id swaps count scans parked on the wrong agent") {
  const int scans = 10;
  sim::GroundTruth truth = two_agent_truth(scans);

  EstimateTable est;
  // Device 0 follows its own truth; device 1 follows agent 0's truth from
  // scan 4 on (a permanent exchange).
  for (int t = 0; t < scans; ++t) {
    est[0][t] = truth.agents[0].positions[t];
    est[1][t] = (t < 4) ? truth.agents[1].positions[t] : truth.agents[0].positions[t];
  }
  CHECK(count_id_swaps(truth, est, 1.0) == scans - 4);
}

TEST_CASE("id swaps need both conditions: near another, far from own") {
  sim::GroundTruth truth = two_agent_truth(6);
  EstimateTable est;
  for (int t = 0; t < 6; ++t) {
    // 2 m from own truth but nowhere near agent 1: lost, not swapped.
    est[0][t] = truth.agents[0].positions[t] + Vector2d(0.0, 2.0);
  }
  CHECK(count_id_swaps(truth, est, 1.0) == 0);
}

TEST_CASE("a single agent can never swap") {
  sim::GroundTruth truth = two_agent_truth(5);
  truth.agents.resize(1);
  EstimateTable est;
  for (int t = 0; t < 5; ++t) est[0][t] = Vector2d(100, 100);
  CHECK(count_id_swaps(truth, est, 1.0) == 0);
}

TEST_CASE("evaluate reports per-device rmse, coverage and pooled errors") {
  sim::GroundTruth truth = two_agent_truth(8);
  EstimateTable est;
  for (int t = 0; t < 8; ++t) est[0][t] = truth.agents[0].positions[t] + Vector2d(0.3, 0.4);
  for (int t = 0; t < 4; ++t) est[1][t] = truth.agents[1].positions[t];

  TrackingErrors e = evaluate(truth, est);
  CHECK(e.rmse_by_device.at(0) == doctest::Approx(0.5));
  CHECK(e.rmse_by_device.at(1) == doctest::Approx(0.0));
  CHECK(e.coverage_by_device.at(0) == doctest::Approx(1.0));
  CHECK(e.coverage_by_device.at(1) == doctest::Approx(0.5));
  CHECK(e.pooled.size() == 12);
  CHECK(e.pooled_rmse() == doctest::Approx(std::sqrt(8 * 0.25 / 12.0)));
}

TEST_CASE("anonymous evaluation scores nearest estimate per agent") {
  sim::GroundTruth truth = two_agent_truth(3);
  std::vector<std::vector<Vector2d>> per_scan(3);
  for (int t = 0; t < 3; ++t) {
    // One estimate glued to each lane, plus a decoy far away.
    per_scan[t] = {truth.agents[1].positions[t] + Vector2d(0.0, 0.1),
                   truth.agents[0].positions[t], Vector2d(50, 50)};
  }
  TrackingErrors e = evaluate_anonymous(truth, per_scan);
  CHECK(e.rmse_by_device.at(0) == doctest::Approx(0.0));
  CHECK(e.rmse_by_device.at(1) == doctest::Approx(0.1));
  CHECK(e.coverage_by_device.at(0) == doctest::Approx(1.0));
}

TEST_CASE("anonymous evaluation with empty scans leaves agents uncovered") {
  sim::GroundTruth truth = two_agent_truth(4);
  std::vector<std::vector<Vector2d>> per_scan(4);  // nothing detected at all
  TrackingErrors e = evaluate_anonymous(truth, per_scan);
  CHECK(e.pooled.empty());
  CHECK(e.coverage_by_device.empty());
  CHECK(e.pooled_rmse() == doctest::Approx(0.0));
}
