#include "ppl/chain.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ppl/errors.hpp"

namespace ppl {

Chain::Chain(std::vector<std::string> names, ChainMeta meta)
    : names_(std::move(names)), meta_(std::move(meta)) {
  for (std::size_t i = 0; i < names_.size(); ++i)
    for (std::size_t j = i + 1; j < names_.size(); ++j)
      if (names_[i] == names_[j])
        throw Error("duplicate chain column name " + names_[i]);
}

void Chain::add_row(const std::vector<double>& draw, double logp) {
  if (draw.size() != names_.size())
    throw Error("chain row width mismatch: expected " +
                std::to_string(names_.size()) + ", got " +
                std::to_string(draw.size()));
  draws_.insert(draws_.end(), draw.begin(), draw.end());
  logp_.push_back(logp);
}

std::vector<std::size_t> Chain::columns(const VarName& v) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (subsumes(v, varname_parse(names_[i]))) out.push_back(i);
  if (out.empty())
    throw NotFoundError("no chain column matches " + varname_to_string(v));
  return out;
}

std::vector<double> Chain::column(std::size_t param) const {
  std::vector<double> out(n_iters());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i, param);
  return out;
}

double effective_sample_size(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double gamma0 = 0.0;
  for (double v : x) gamma0 += (v - mean) * (v - mean);
  gamma0 /= static_cast<double>(n);
  if (gamma0 == 0.0) return static_cast<double>(n);  // constant series

  const auto rho = [&](std::size_t t) {
    double acc = 0.0;
    for (std::size_t i = 0; i + t < n; ++i)
      acc += (x[i] - mean) * (x[i + t] - mean);
    return acc / (static_cast<double>(n) * gamma0);
  };

  // Geyer initial positive sequence: sum lag pairs while positive
  double tau = -1.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = (2 * k == 0 ? 1.0 : rho(2 * k)) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  if (tau <= 0.0) return static_cast<double>(n);
  const double ess = static_cast<double>(n) / tau;
  return std::min(ess, 10.0 * static_cast<double>(n));
}

std::vector<Chain::Summary> Chain::summarize() const {
  if (n_iters() < 2) throw Error("summarize needs at least 2 draws");
  std::vector<Summary> out;
  out.reserve(names_.size());
  for (std::size_t j = 0; j < names_.size(); ++j) {
    const std::vector<double> col = column(j);
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= static_cast<double>(col.size());
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (static_cast<double>(col.size()) - 1.0));
    out.push_back({names_[j], mean, sd, effective_sample_size(col)});
  }
  return out;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& tok, int line) {
  const char* s = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw ParseError("bad numeric field '" + tok + "'", SourcePos{line, 1});
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void Chain::save_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << "# model=" << meta_.model << " sampler=" << meta_.sampler
    << " seed=" << meta_.seed << "\n";
  f << "iteration";
  for (const auto& n : names_) f << ',' << n;
  f << ",lp\n";
  for (std::size_t i = 0; i < n_iters(); ++i) {
    f << (i + 1);
    for (std::size_t j = 0; j < names_.size(); ++j) f << ',' << fmt17(at(i, j));
    f << ',' << fmt17(logp_[i]) << "\n";
  }
  if (!f) throw Error("write failed for " + path);
}

Chain Chain::load_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  std::string line;
  int lineno = 0;

  ChainMeta meta;
  if (!std::getline(f, line))
    throw ParseError("empty chain file", SourcePos{1, 1});
  ++lineno;
  if (!line.empty() && line[0] == '#') {
    std::istringstream ss(line.substr(1));
    std::string kv;
    while (ss >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
      if (key == "model") meta.model = val;
      if (key == "sampler") meta.sampler = val;
      if (key == "seed") meta.seed = std::strtoull(val.c_str(), nullptr, 10);
    }
    if (!std::getline(f, line))
      throw ParseError("missing header row", SourcePos{2, 1});
    ++lineno;
  }

  auto header = split_csv(line);
  if (header.size() < 2 || header.front() != "iteration" ||
      header.back() != "lp")
    throw ParseError("bad chain header (want iteration,<names>,lp)",
                     SourcePos{lineno, 1});
  std::vector<std::string> names(header.begin() + 1, header.end() - 1);
  Chain chain(std::move(names), std::move(meta));

  const std::size_t width = header.size();
  std::vector<double> row(chain.n_params());
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != width)
      throw ParseError("row has " + std::to_string(fields.size()) +
                           " fields, expected " + std::to_string(width),
                       SourcePos{lineno, 1});
    for (std::size_t j = 0; j < chain.n_params(); ++j)
      row[j] = parse_double(fields[j + 1], lineno);
    chain.add_row(row, parse_double(fields.back(), lineno));
  }
  return chain;
}

}  // namespace ppl
