#include "noir/probability.hpp"

#include <algorithm>
#include <cmath>

#include "noir/random.hpp"

namespace noir {

double ProbabilityModel::q(RoadId to, RoadId from) const {
  const Edge key{from, to};
  auto it = std::lower_bound(fractions.begin(), fractions.end(), key,
                             [](const auto& entry, const Edge& e) { return entry.first < e; });
  if (it == fractions.end() || it->first != key) return 0.0;
  return it->second;
}

ProbabilityModel sample(const NoirGraph& graph, std::uint64_t seed, std::uint64_t step,
                        ProbabilityRange range) {
  if (!(range.lo >= 0.0 && range.lo <= range.hi && range.hi < 1.0)) {
    throw Error("invalid p range: need 0 <= lo <= hi < 1");
  }
  const Eigen::Index n = graph.interior_count();
  ProbabilityModel model;
  model.p.resize(n);
  model.Q = MatrixXd::Zero(n, n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const RoadId road = graph.interior_road(i);
    KeyedRng rng{seed, static_cast<std::uint64_t>(Stream::flow_probability), step,
                 static_cast<std::uint64_t>(road.value)};
    model.p[i] = rng.uniform(range.lo, range.hi);
  }

  for (int r = 1; r <= graph.road_count(); ++r) {
    const RoadId from{r};
    if (graph.classify(from) == RoadClass::outlet) continue;
    const auto& out = graph.out_neighbors(from);
    if (out.empty()) continue;
    KeyedRng rng{seed, static_cast<std::uint64_t>(Stream::routing), step,
                 static_cast<std::uint64_t>(r)};
    std::vector<double> draws(out.size());
    double total = 0.0;
    for (double& d : draws) {
      d = rng.exponential();
      total += d;
    }
    if (!(total > 0.0)) {  // all draws exactly zero: fall back to an even split
      std::fill(draws.begin(), draws.end(), 1.0);
      total = static_cast<double>(draws.size());
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
      const double q = draws[k] / total;
      model.fractions.push_back({Edge{from, out[k]}, q});
      if (graph.is_interior(from) && graph.is_interior(out[k])) {
        model.Q(graph.state_index(out[k]), graph.state_index(from)) = q;
      }
    }
  }
  std::sort(model.fractions.begin(), model.fractions.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return model;
}

VectorXd compute_inflow(const ProbabilityModel& model, const VectorXd& x) {
  if (x.size() != model.p.size()) throw Error("compute_inflow: state dimension mismatch");
  const Eigen::Index n = x.size();
  if (n == 0) return VectorXd();
  const MatrixXd qp = model.QP();
  const MatrixXd system = MatrixXd::Identity(n, n) - qp;
  const VectorXd rhs = qp * x;
  Eigen::PartialPivLU<MatrixXd> lu(system);
  VectorXd y = lu.solve(rhs);
  const double residual = (system * y - rhs).lpNorm<Eigen::Infinity>();
  const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
  if (!y.allFinite() || residual > 1e-8 * scale) {
    throw SingularSystemError("I - QP is singular or ill-conditioned (residual " +
                              std::to_string(residual) + ")");
  }
  return y;
}

VectorXd compute_outflow(const ProbabilityModel& model, const VectorXd& x) {
  const VectorXd y = compute_inflow(model, x);
  return model.p.cwiseProduct(x + y);
}

}  // namespace noir
