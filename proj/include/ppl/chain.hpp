#pragma once

// MCMC output: draws keyed by flattened constrained-space names, one
// log-probability per draw, CSV persistence (17 significant digits,
// bit-exact round trip).

#include <cstdint>
#include <string>
#include <vector>

#include "ppl/varname.hpp"

namespace ppl {

struct ChainMeta {
  std::string model;
  std::string sampler;
  std::uint64_t seed = 0;
};

class Chain {
 public:
  Chain(std::vector<std::string> names, ChainMeta meta);

  void add_row(const std::vector<double>& draw, double logp);

  std::size_t n_iters() const { return logp_.size(); }
  std::size_t n_params() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const ChainMeta& meta() const { return meta_; }

  double at(std::size_t iter, std::size_t param) const {
    return draws_[iter * names_.size() + param];
  }
  double logp(std::size_t iter) const { return logp_[iter]; }

  // column indices subsumed by the given name ("w" matches w[1], w[2]),
  // in name order; NotFoundError when nothing matches
  std::vector<std::size_t> columns(const VarName& v) const;
  std::vector<double> column(std::size_t param) const;

  struct Summary {
    std::string name;
    double mean;
    double sd;
    double ess;
  };
  // mean/sd are sample statistics; ess uses the initial-positive-
  // sequence autocorrelation truncation
  std::vector<Summary> summarize() const;

  void save_csv(const std::string& path) const;
  static Chain load_csv(const std::string& path);

 private:
  std::vector<std::string> names_;
  ChainMeta meta_;
  std::vector<double> draws_;  // row-major n_iters x n_params
  std::vector<double> logp_;
};

// effective sample size of one series (exposed for tests)
double effective_sample_size(const std::vector<double>& x);

}  // namespace ppl
