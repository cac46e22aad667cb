#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "hlda/rng.hpp"

namespace hlda {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum_i exp(v_i)), max-shifted so large negative inputs do not underflow.
inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  double mx = *std::max_element(values.begin(), values.end());
  if (mx == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

// Draw an index with probability proportional to exp(log_weights[i]).
inline std::size_t sample_discrete(std::span<const double> log_weights, Rng& rng) {
  double norm = log_sum_exp(log_weights);
  if (norm == kNegInf)
    throw std::invalid_argument("sample_discrete: all weights are -inf");
  double u = rng.uniform();
  double cum = 0.0;
  std::size_t last_finite = 0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    if (log_weights[i] == kNegInf) continue;
    last_finite = i;
    cum += std::exp(log_weights[i] - norm);
    if (u < cum) return i;
  }
  return last_finite;  // u landed in rounding slack
}

// Same, for linear-space nonnegative weights (token-level hot loop).
inline std::size_t sample_discrete_linear(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0))
    throw std::invalid_argument("sample_discrete_linear: total weight is zero");
  double u = rng.uniform() * total;
  double cum = 0.0;
  std::size_t last_pos = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_pos = i;
    cum += weights[i];
    if (u < cum) return i;
  }
  return last_pos;
}

struct CrpParams {
  double gamma = 1.0;
};

struct GemParams {
  double m = 0.5;  // in (0,1)
  double pi = 1.0; // > 0
};

// Per-level topic smoothing; in the infinite-depth model the last entry is
// reused for all deeper levels.
struct TopicPrior {
  std::vector<double> eta;
  double at(int level) const {
    if (eta.empty()) throw std::logic_error("TopicPrior: empty eta");
    return level < static_cast<int>(eta.size()) ? eta[level] : eta.back();
  }
};

// Seating probabilities for the next customer: occupied table i with
// probability n_i / (gamma + n - 1), a new table with gamma / (gamma + n - 1).
inline std::vector<double> crp_next_table_probs(std::span<const int> counts,
                                                double gamma) {
  if (gamma <= 0.0) throw std::invalid_argument("crp: gamma must be > 0");
  double n_prev = 0.0;
  for (int c : counts) {
    if (c <= 0) throw std::invalid_argument("crp: table counts must be >= 1");
    n_prev += c;
  }
  std::vector<double> probs;
  probs.reserve(counts.size() + 1);
  double denom = gamma + n_prev;
  for (int c : counts) probs.push_back(c / denom);
  probs.push_back(gamma / denom);
  return probs;
}

// Exchangeable probability of a seating partition:
//   gamma^K * prod_i (n_i - 1)! / prod_{j=1..n} (gamma + j - 1)
inline double crp_partition_log_prob(std::span<const int> table_sizes,
                                     double gamma) {
  if (table_sizes.empty())
    throw std::invalid_argument("crp_partition_log_prob: no tables");
  if (gamma <= 0.0) throw std::invalid_argument("crp: gamma must be > 0");
  double lp = 0.0;
  long n = 0;
  for (int s : table_sizes) {
    if (s <= 0) throw std::invalid_argument("crp: table sizes must be >= 1");
    lp += std::log(gamma) + std::lgamma(static_cast<double>(s));
    n += s;
  }
  lp += std::lgamma(gamma) - std::lgamma(gamma + static_cast<double>(n));
  return lp;
}

namespace detail {

// #{z >= k} for 1-based stick index k, from a 0-based level-count histogram.
inline double count_ge(std::span<const int> level_counts, int k1) {
  double s = 0.0;
  for (std::size_t i = static_cast<std::size_t>(k1 - 1); i < level_counts.size(); ++i)
    s += level_counts[i];
  return s;
}

}  // namespace detail

// Posterior-predictive probability of stick level k (1-based) under the
// two-parameter GEM, given the level counts of the other words:
//   [(1-m)pi + #{z=k}] / [pi + #{z>=k}] * prod_{j<k} [m pi + #{z>j}] / [pi + #{z>=j}]
// level_counts is 0-based: level_counts[i] = #{z = i+1}.
inline double gem_level_conditional(std::span<const int> level_counts, double m,
                                    double pi, int k) {
  if (k < 1) throw std::invalid_argument("gem_level_conditional: k must be >= 1");
  if (!(m > 0.0 && m < 1.0) || pi <= 0.0)
    throw std::invalid_argument("gem_level_conditional: bad (m, pi)");
  auto cnt = [&](int level1) {
    return level1 >= 1 && level1 <= static_cast<int>(level_counts.size())
               ? static_cast<double>(level_counts[level1 - 1])
               : 0.0;
  };
  double ge = detail::count_ge(level_counts, k);
  double p = ((1.0 - m) * pi + cnt(k)) / (pi + ge);
  double ge_j = ge;
  for (int j = k - 1; j >= 1; --j) {
    ge_j += cnt(j);
    p *= (m * pi + (ge_j - cnt(j))) / (pi + ge_j);
  }
  return p;
}

// Remaining stick mass beyond level k (1-based): prod_{j<=k} of the continue
// factors.  Equals sum over l > k of gem_level_conditional(l).
inline double gem_tail_mass(std::span<const int> level_counts, double m,
                            double pi, int k) {
  double p = 1.0;
  double ge_j = detail::count_ge(level_counts, k + 1);
  for (int j = k; j >= 1; --j) {
    double cj = j <= static_cast<int>(level_counts.size())
                    ? static_cast<double>(level_counts[j - 1])
                    : 0.0;
    p *= (m * pi + ge_j) / (pi + ge_j + cj);
    ge_j += cj;
  }
  return p;
}

// Truncated variant: levels 1..L, the tail folded into level L.
inline double gem_level_conditional_truncated(std::span<const int> level_counts,
                                              double m, double pi, int k, int L) {
  if (L < 1 || k < 1 || k > L)
    throw std::invalid_argument("gem_level_conditional_truncated: bad (k, L)");
  if (k < L) return gem_level_conditional(level_counts, m, pi, k);
  return gem_tail_mass(level_counts, m, pi, L - 1);
}

// log of the Dirichlet-multinomial marginal
//   Gamma(V eta) / Gamma(V eta + n) * prod_w Gamma(eta + n_w) / Gamma(eta)
// counts may be sparse; zeros contribute nothing.
inline double log_dirichlet_multinomial(std::span<const int> counts, double eta,
                                        int V) {
  if (eta <= 0.0 || V < 1)
    throw std::invalid_argument("log_dirichlet_multinomial: bad (eta, V)");
  double lp = 0.0;
  long n = 0;
  double lg_eta = std::lgamma(eta);
  for (int c : counts) {
    if (c < 0) throw std::invalid_argument("log_dirichlet_multinomial: negative count");
    if (c == 0) continue;
    lp += std::lgamma(eta + c) - lg_eta;
    n += c;
  }
  if (n == 0) return 0.0;
  lp += std::lgamma(V * eta) - std::lgamma(V * eta + static_cast<double>(n));
  return lp;
}

// Sparse-count overload.  The entries are summed in term order so the result
// does not depend on the hash map's insertion history (resumed chains must
// reproduce log likelihoods bit for bit).
inline double log_dirichlet_multinomial(const std::unordered_map<int, int>& counts,
                                        double eta, int V) {
  std::vector<std::pair<int, int>> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  double lp = 0.0;
  long n = 0;
  double lg_eta = std::lgamma(eta);
  for (const auto& [w, c] : sorted) {
    if (c < 0) throw std::invalid_argument("log_dirichlet_multinomial: negative count");
    if (c == 0) continue;
    lp += std::lgamma(eta + c) - lg_eta;
    n += c;
  }
  if (n == 0) return 0.0;
  lp += std::lgamma(V * eta) - std::lgamma(V * eta + static_cast<double>(n));
  return lp;
}

// Cache of lgamma(i + offset) for integer i >= 0; the path-likelihood loop is
// dominated by these evaluations.
class LgammaCache {
public:
  LgammaCache() = default;
  explicit LgammaCache(double offset) : offset_(offset) {}

  double offset() const { return offset_; }

  double operator()(long i) {
    if (i >= static_cast<long>(table_.size())) grow(i);
    return table_[static_cast<std::size_t>(i)];
  }

private:
  void grow(long i) {
    std::size_t want = static_cast<std::size_t>(i) + 64;
    table_.reserve(want);
    while (table_.size() < want)
      table_.push_back(std::lgamma(offset_ + static_cast<double>(table_.size())));
  }

  double offset_ = 1.0;
  std::vector<double> table_;
};

}  // namespace hlda
