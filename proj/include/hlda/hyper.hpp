#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "hlda/rng.hpp"

namespace hlda {

// m ~ Beta(a1, a2), pi ~ Exponential(a3), gamma ~ Gamma(a4, a5) (shape, rate),
// eta ~ Exponential(a6)
struct HyperPriors {
  double a1 = 1.0, a2 = 1.0;
  double a3 = 1.0;
  double a4 = 1.0, a5 = 1.0;
  double a6 = 1.0;

  void validate() const {
    if (a1 <= 0 || a2 <= 0 || a3 <= 0 || a4 <= 0 || a5 <= 0 || a6 <= 0)
      throw std::invalid_argument("hyper-hyperparameters must be > 0");
  }

  double log_pdf_m(double m) const {
    if (m <= 0.0 || m >= 1.0) return -std::numeric_limits<double>::infinity();
    return (a1 - 1.0) * std::log(m) + (a2 - 1.0) * std::log(1.0 - m) -
           (std::lgamma(a1) + std::lgamma(a2) - std::lgamma(a1 + a2));
  }
  double log_pdf_pi(double pi) const {
    if (pi <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(a3) - a3 * pi;
  }
  double log_pdf_gamma(double g) const {
    if (g <= 0.0) return -std::numeric_limits<double>::infinity();
    return a4 * std::log(a5) - std::lgamma(a4) + (a4 - 1.0) * std::log(g) - a5 * g;
  }
  double log_pdf_eta(double eta) const {
    if (eta <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(a6) - a6 * eta;
  }
};

// Random-walk proposal step sizes (log scale for pi, gamma, eta; logit for m).
struct MhConfig {
  double step_m = 0.3;
  double step_pi = 0.3;
  double step_gamma = 0.3;
  double step_eta = 0.3;
  int updates_per_sweep = 1;
};

enum class HyperParam { m, pi, gamma, eta };

struct MhRecord {
  int proposed = 0;
  int accepted = 0;
};

// The factor of the complete log likelihood touched by one hyperparameter,
// plus its log prior density.  gamma enters only through p(c | gamma), (m, pi)
// through p(z | m, pi), eta through p(w | c, z, eta).
template <class State>
double log_hyper_target(const State& state, const HyperPriors& priors,
                        HyperParam which, double value) {
  switch (which) {
    case HyperParam::m:
      if (value <= 0.0 || value >= 1.0)
        throw std::invalid_argument("m out of (0,1)");
      return state.log_p_levels_gem(value, state.config().gem_pi) +
             priors.log_pdf_m(value);
    case HyperParam::pi:
      if (value <= 0.0) throw std::invalid_argument("pi out of domain");
      return state.log_p_levels_gem(state.config().gem_m, value) +
             priors.log_pdf_pi(value);
    case HyperParam::gamma:
      if (value <= 0.0) throw std::invalid_argument("gamma out of domain");
      return state.log_p_paths(value) + priors.log_pdf_gamma(value);
    case HyperParam::eta:
      if (value <= 0.0) throw std::invalid_argument("eta out of domain");
      return state.log_p_words_scalar(value) + priors.log_pdf_eta(value);
  }
  throw std::logic_error("unreachable");
}

namespace detail {

inline bool mh_accept(double log_ratio, Rng& rng) {
  if (log_ratio >= 0.0) return true;
  return std::log(rng.uniform_pos()) < log_ratio;
}

}  // namespace detail

// One MH pass over (m, pi, gamma, eta) in turn.  Proposals are random walks on
// the logit scale for m and the log scale for the positive parameters; the
// acceptance ratio includes the corresponding Jacobian terms.
template <class State>
MhRecord mh_update_hyperparameters(State& state, const HyperPriors& priors,
                                   const MhConfig& mh, Rng& rng) {
  priors.validate();
  MhRecord rec;
  for (int rep = 0; rep < mh.updates_per_sweep; ++rep) {
    {  // m, logit walk
      double m = state.config().gem_m;
      double x = std::log(m / (1.0 - m)) + mh.step_m * rng.normal();
      double m2 = 1.0 / (1.0 + std::exp(-x));
      ++rec.proposed;
      if (m2 > 0.0 && m2 < 1.0) {
        double lr = log_hyper_target(state, priors, HyperParam::m, m2) -
                    log_hyper_target(state, priors, HyperParam::m, m) +
                    std::log(m2 * (1.0 - m2)) - std::log(m * (1.0 - m));
        if (detail::mh_accept(lr, rng)) {
          state.set_gem(m2, state.config().gem_pi);
          ++rec.accepted;
        }
      }
    }
    {  // pi, log walk
      double pi = state.config().gem_pi;
      double pi2 = pi * std::exp(mh.step_pi * rng.normal());
      ++rec.proposed;
      double lr = log_hyper_target(state, priors, HyperParam::pi, pi2) -
                  log_hyper_target(state, priors, HyperParam::pi, pi) +
                  std::log(pi2) - std::log(pi);
      if (detail::mh_accept(lr, rng)) {
        state.set_gem(state.config().gem_m, pi2);
        ++rec.accepted;
      }
    }
    {  // gamma, log walk
      double g = state.config().gamma;
      double g2 = g * std::exp(mh.step_gamma * rng.normal());
      ++rec.proposed;
      double lr = log_hyper_target(state, priors, HyperParam::gamma, g2) -
                  log_hyper_target(state, priors, HyperParam::gamma, g) +
                  std::log(g2) - std::log(g);
      if (detail::mh_accept(lr, rng)) {
        state.set_gamma(g2);
        ++rec.accepted;
      }
    }
    {  // eta, log walk (scalar across levels)
      double e = state.config().eta.front();
      double e2 = e * std::exp(mh.step_eta * rng.normal());
      ++rec.proposed;
      double lr = log_hyper_target(state, priors, HyperParam::eta, e2) -
                  log_hyper_target(state, priors, HyperParam::eta, e) +
                  std::log(e2) - std::log(e);
      if (detail::mh_accept(lr, rng)) {
        state.set_eta_scalar(e2);
        ++rec.accepted;
      }
    }
  }
  return rec;
}

}  // namespace hlda
