#include "delusive/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "delusive/threat_model.hpp"

namespace delusive {

namespace {

double ground_dist(const double* a, const double* b, std::size_t m, NormKind metric) {
  if (metric == NormKind::Linf) {
    double mx = 0.0;
    for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, std::abs(a[j] - b[j]));
    return mx;
  }
  double sq = 0.0;
  for (std::size_t j = 0; j < m; ++j) sq += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(sq);
}

void check_pair(const Dataset& a, const Dataset& b) {
  validate(a);
  validate(b);
  if (a.size() != b.size() || a.dim() != b.dim() || a.class_count != b.class_count)
    throw std::domain_error("winf: dataset shapes differ");
}

// Dense Hopcroft-Karp over one class's threshold graph: edge (u, v) exists
// iff dist[u*n+v] <= threshold.
struct Matcher {
  const std::vector<double>& dist;
  std::size_t n;
  double threshold = 0.0;
  std::vector<int> ml, mr, layer;
  std::vector<int> queue;

  Matcher(const std::vector<double>& d, std::size_t size) : dist(d), n(size) {}

  bool edge(std::size_t u, std::size_t v) const { return dist[u * n + v] <= threshold; }

  bool bfs() {
    constexpr int kInf = std::numeric_limits<int>::max();
    queue.clear();
    for (std::size_t u = 0; u < n; ++u) {
      layer[u] = ml[u] < 0 ? 0 : kInf;
      if (ml[u] < 0) queue.push_back(static_cast<int>(u));
    }
    bool reachable_free = false;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const auto u = static_cast<std::size_t>(queue[qi]);
      for (std::size_t v = 0; v < n; ++v) {
        if (!edge(u, v)) continue;
        const int w = mr[v];
        if (w < 0) {
          reachable_free = true;
        } else if (layer[static_cast<std::size_t>(w)] == kInf) {
          layer[static_cast<std::size_t>(w)] = layer[u] + 1;
          queue.push_back(w);
        }
      }
    }
    return reachable_free;
  }

  bool dfs(std::size_t u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (!edge(u, v)) continue;
      const int w = mr[v];
      if (w < 0 || (layer[static_cast<std::size_t>(w)] == layer[u] + 1 &&
                    dfs(static_cast<std::size_t>(w)))) {
        ml[u] = static_cast<int>(v);
        mr[v] = static_cast<int>(u);
        return true;
      }
    }
    layer[u] = std::numeric_limits<int>::max();
    return false;
  }

  std::size_t run(double t) {
    threshold = t;
    ml.assign(n, -1);
    mr.assign(n, -1);
    layer.assign(n, 0);
    std::size_t matched = 0;
    while (bfs())
      for (std::size_t u = 0; u < n; ++u)
        if (ml[u] < 0 && dfs(u)) ++matched;
    return matched;
  }
};

struct ClassBlock {
  std::vector<std::size_t> a_rows, b_rows;
  std::vector<double> dist;  // n_c x n_c, flattened
};

// Per-class row groups with their pairwise distance tables; empty optional
// when some class's counts differ (no label-respecting bijection exists).
std::optional<std::vector<ClassBlock>> class_blocks(const Dataset& a, const Dataset& b,
                                                    const CostSpec& cost) {
  std::vector<ClassBlock> blocks(static_cast<std::size_t>(a.class_count));
  for (std::size_t i = 0; i < a.size(); ++i)
    blocks[static_cast<std::size_t>(a.labels[i])].a_rows.push_back(i);
  for (std::size_t i = 0; i < b.size(); ++i)
    blocks[static_cast<std::size_t>(b.labels[i])].b_rows.push_back(i);
  for (auto& blk : blocks) {
    if (blk.a_rows.size() != blk.b_rows.size()) return std::nullopt;
    const std::size_t nc = blk.a_rows.size();
    blk.dist.resize(nc * nc);
    for (std::size_t u = 0; u < nc; ++u)
      for (std::size_t v = 0; v < nc; ++v)
        blk.dist[u * nc + v] = ground_dist(a.features.row(blk.a_rows[u]),
                                           b.features.row(blk.b_rows[v]), a.dim(), cost.metric);
  }
  return blocks;
}

bool all_feasible(std::vector<ClassBlock>& blocks, double threshold) {
  for (auto& blk : blocks) {
    if (blk.a_rows.empty()) continue;
    Matcher m{blk.dist, blk.a_rows.size()};
    if (m.run(threshold) != blk.a_rows.size()) return false;
  }
  return true;
}

}  // namespace

std::optional<double> coupled_winf(const Dataset& a, const Dataset& b, const CostSpec& cost) {
  check_pair(a, b);
  double mx = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.labels[i] != b.labels[i]) return std::nullopt;
    mx = std::max(mx, ground_dist(a.features.row(i), b.features.row(i), a.dim(), cost.metric));
  }
  return mx;
}

MatchingResult exact_winf(const Dataset& a, const Dataset& b, const CostSpec& cost) {
  check_pair(a, b);
  MatchingResult res;
  res.certified = true;
  auto blocks = class_blocks(a, b, cost);
  if (!blocks.has_value()) return res;  // value stays empty: infinity

  std::vector<double> cand;
  for (const auto& blk : *blocks) cand.insert(cand.end(), blk.dist.begin(), blk.dist.end());
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  // Smallest distance whose threshold graph has a perfect matching in every
  // class; feasibility is monotone in the threshold.
  std::size_t lo = 0, hi = cand.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (all_feasible(*blocks, cand[mid]))
      hi = mid;
    else
      lo = mid + 1;
  }
  res.value = cand[lo];

  res.assignment.assign(a.size(), 0);
  for (auto& blk : *blocks) {
    if (blk.a_rows.empty()) continue;
    Matcher m{blk.dist, blk.a_rows.size()};
    m.run(*res.value);
    for (std::size_t u = 0; u < blk.a_rows.size(); ++u)
      res.assignment[blk.a_rows[u]] = blk.b_rows[static_cast<std::size_t>(m.ml[u])];
  }
  return res;
}

bool in_winf_ball(const Dataset& a, const Dataset& b, double epsilon, const CostSpec& cost) {
  check_pair(a, b);
  if (!(epsilon >= 0.0)) throw std::domain_error("winf: epsilon must be >= 0");
  auto blocks = class_blocks(a, b, cost);
  if (!blocks.has_value()) return false;
  return all_feasible(*blocks, epsilon + kBallTol);
}

Dataset lemma_b1_worst_case(const LinearModel& model, const Dataset& ds, const ThreatBall& ball) {
  validate(ds);
  if (model.weights.rows() != 2 || ds.class_count != 2)
    throw std::domain_error("lemma_b1: needs a two-class linear model and dataset");
  if (model.weights.cols() != ds.dim()) throw std::domain_error("lemma_b1: dim mismatch");
  if (ball.norm != NormKind::Linf || ball.mask.has_value() || ball.clamp.has_value())
    throw std::domain_error("lemma_b1: needs an unmasked, unclamped Linf ball");
  if (!(ball.radius >= 0.0)) throw std::domain_error("lemma_b1: radius must be >= 0");
  Dataset out = ds;
  out.provenance = "lemma-b1-worst";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto y = static_cast<std::size_t>(ds.labels[i]);
    const double* wy = model.weights.row(y);
    const double* wo = model.weights.row(1 - y);
    double* row = out.features.row(i);
    for (std::size_t c = 0; c < ds.dim(); ++c) {
      const double u = wy[c] - wo[c];
      if (u > 0.0)
        row[c] -= ball.radius;
      else if (u < 0.0)
        row[c] += ball.radius;
    }
  }
  return out;
}

LemmaB1Report lemma_b1_check(const LinearModel& model, const Dataset& ds, const ThreatBall& ball,
                             std::size_t trials, Rng& rng, bool include_worst_case) {
  const Dataset worst = lemma_b1_worst_case(model, ds, ball);
  const Model m = model;
  LemmaB1Report rep;
  rep.exact = 1.0 - accuracy(m, worst);
  rep.sampled_max = 1.0 - accuracy(m, ds);  // identity perturbation baseline
  if (include_worst_case) rep.sampled_max = std::max(rep.sampled_max, rep.exact);
  Dataset trial = ds;
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      std::vector<double> p = random_point(ball, ds.features.row_span(i), rng);
      std::copy(p.begin(), p.end(), trial.features.row(i));
    }
    rep.sampled_max = std::max(rep.sampled_max, 1.0 - accuracy(m, trial));
  }
  rep.gap = rep.exact - rep.sampled_max;
  return rep;
}

}  // namespace delusive
