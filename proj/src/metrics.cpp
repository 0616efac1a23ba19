#include "sitetrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sitetrack/errors.hpp"

namespace sitetrack::metrics {

double compute_rmse(const Series& truth, const Series& estimates) {
  double ss = 0.0;
  int n = 0;
  for (const auto& [t, est] : estimates) {
    const auto it = truth.find(t);
    if (it == truth.end()) continue;
    ss += (est - it->second).squaredNorm();
    ++n;
  }
  if (n == 0) throw NoOverlap("no scans with both truth and estimate");
  return std::sqrt(ss / n);
}

double ErrorCdf::percentile(double p) const {
  if (sorted.empty()) throw EmptyInput("empty error sample");
  if (p < 0.0 || p > 1.0) throw InvalidConfig("percentile outside [0,1]");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

ErrorCdf error_cdf(std::vector<double> errors) {
  if (errors.empty()) throw EmptyInput("empty error sample");
  std::sort(errors.begin(), errors.end());
  return {std::move(errors)};
}

int count_id_swaps(const sim::GroundTruth& truth, const EstimateTable& estimates, double radius) {
  int swaps = 0;
  for (const auto& [dev, series] : estimates) {
    const sim::AgentTruth* own = truth.by_device(dev);
    if (own == nullptr) continue;
    for (const auto& [t, est] : series) {
      if (t < 0 || t >= static_cast<int>(own->positions.size())) continue;
      const double d_own = (est - own->positions[t]).norm();
      if (d_own <= radius) continue;
      for (const auto& other : truth.agents) {
        if (other.agent_id == own->agent_id) continue;
        if (t >= static_cast<int>(other.positions.size())) continue;
        if ((est - other.positions[t]).norm() <= radius) {
          ++swaps;
          break;
        }
      }
    }
  }
  return swaps;
}

double TrackingErrors::pooled_rmse() const {
  if (pooled.empty()) return 0.0;
  double ss = 0.0;
  for (const double e : pooled) ss += e * e;
  return std::sqrt(ss / pooled.size());
}

TrackingErrors evaluate(const sim::GroundTruth& truth, const EstimateTable& estimates) {
  TrackingErrors out;
  for (const auto& [dev, series] : estimates) {
    const sim::AgentTruth* own = truth.by_device(dev);
    if (own == nullptr) continue;
    double ss = 0.0;
    int n = 0;
    for (const auto& [t, est] : series) {
      if (t < 0 || t >= static_cast<int>(own->positions.size())) continue;
      const double e = (est - own->positions[t]).norm();
      out.pooled.push_back(e);
      ss += e * e;
      ++n;
    }
    if (n > 0) {
      out.rmse_by_device[dev] = std::sqrt(ss / n);
      out.coverage_by_device[dev] = static_cast<double>(n) / own->positions.size();
    }
  }
  return out;
}

TrackingErrors evaluate_anonymous(const sim::GroundTruth& truth,
                                  const std::vector<std::vector<Eigen::Vector2d>>& per_scan) {
  TrackingErrors out;
  for (const auto& agent : truth.agents) {
    if (agent.device_id < 0) continue;
    double ss = 0.0;
    int n = 0;
    for (int t = 0; t < static_cast<int>(agent.positions.size()); ++t) {
      if (t >= static_cast<int>(per_scan.size()) || per_scan[t].empty()) continue;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& est : per_scan[t]) {
        best = std::min(best, (est - agent.positions[t]).norm());
      }
      out.pooled.push_back(best);
      ss += best * best;
      ++n;
    }
    if (n > 0) {
      out.rmse_by_device[agent.device_id] = std::sqrt(ss / n);
      out.coverage_by_device[agent.device_id] =
          static_cast<double>(n) / agent.positions.size();
    }
  }
  return out;
}

}  // namespace sitetrack::metrics
