#include "ppl/query.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <set>

#include "ppl/interpreter.hpp"

namespace ppl {

const char* query_kind_name(QueryKind k) {
  switch (k) {
    case QueryKind::Prior: return "prior";
    case QueryKind::Likelihood: return "likelihood";
    case QueryKind::Joint: return "joint";
    case QueryKind::PosteriorPredictive: return "posterior-predictive";
  }
  return "?";
}

// ---------------------------------------------------------------- parse

namespace {

class QueryParser {
 public:
  explicit QueryParser(const std::string& s) : s_(s) {}

  QueryExpr run() {
    QueryExpr q;
    parse_bindings(q, /*rhs=*/false);
    skip_ws();
    if (!match('|')) fail("expected '|'");
    parse_bindings(q, /*rhs=*/true);
    skip_ws();
    if (i_ != s_.size()) fail("trailing input");
    if (!q.has_model && !q.has_chain)
      fail("right-hand side needs model = <name> or chain = <ref>");
    if (q.has_model && q.has_chain)
      fail("model and chain are mutually exclusive");
    return q;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(msg, SourcePos{1, static_cast<int>(i_) + 1});
  }

  void skip_ws() {
    while (i_ < s_.size() &&
           std::isspace(static_cast<unsigned char>(s_[i_])))
      ++i_;
  }

  bool match(char c) {
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }

  void parse_bindings(QueryExpr& q, bool rhs) {
    while (true) {
      skip_ws();
      const std::string name = ident();
      skip_ws();
      if (!match('=')) fail("expected '=' after '" + name + "'");
      skip_ws();
      if (name == "model") {
        if (!rhs) fail("model binding belongs on the right-hand side");
        q.model = ident();
        q.has_model = true;
      } else if (name == "chain") {
        if (!rhs) fail("chain binding belongs on the right-hand side");
        if (i_ < s_.size() && s_[i_] == '"') {
          q.chain_ref = quoted();
          q.chain_is_path = true;
        } else {
          q.chain_ref = ident();
        }
        q.has_chain = true;
      } else {
        if (seen_.count(name) != 0) fail("duplicate binding '" + name + "'");
        seen_.insert(name);
        (rhs ? q.rhs : q.lhs).push_back({name, literal()});
      }
      skip_ws();
      if (match(',')) continue;
      return;
    }
  }

  std::string ident() {
    skip_ws();
    if (i_ >= s_.size() ||
        !(std::isalpha(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_'))
      fail("expected identifier");
    std::size_t start = i_;
    while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) ||
                              s_[i_] == '_'))
      ++i_;
    return s_.substr(start, i_ - start);
  }

  std::string quoted() {
    if (!match('"')) fail("expected '\"'");
    std::size_t start = i_;
    while (i_ < s_.size() && s_[i_] != '"') ++i_;
    if (i_ >= s_.size()) fail("unterminated string");
    std::string out = s_.substr(start, i_ - start);
    ++i_;
    return out;
  }

  struct Num {
    double r;
    std::int64_t i;
    bool is_int;
  };

  Num number() {
    skip_ws();
    std::size_t start = i_;
    if (i_ < s_.size() && (s_[i_] == '-' || s_[i_] == '+')) ++i_;
    bool digits = false, is_int = true;
    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) {
      ++i_;
      digits = true;
    }
    if (i_ < s_.size() && s_[i_] == '.') {
      is_int = false;
      ++i_;
      while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) {
        ++i_;
        digits = true;
      }
    }
    if (digits && i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
      std::size_t save = i_;
      ++i_;
      if (i_ < s_.size() && (s_[i_] == '-' || s_[i_] == '+')) ++i_;
      if (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) {
        is_int = false;
        while (i_ < s_.size() &&
               std::isdigit(static_cast<unsigned char>(s_[i_])))
          ++i_;
      } else {
        i_ = save;
      }
    }
    if (!digits) fail("expected a number");
    const std::string tok = s_.substr(start, i_ - start);
    Num n;
    n.r = std::strtod(tok.c_str(), nullptr);
    n.is_int = is_int;
    n.i = is_int ? std::strtoll(tok.c_str(), nullptr, 10) : 0;
    return n;
  }

  Value literal() {
    skip_ws();
    if (i_ + 6 < s_.size() + 1 && s_.compare(i_, 7, "missing") == 0) {
      // make sure it is the whole word
      const std::size_t after = i_ + 7;
      if (after >= s_.size() ||
          !(std::isalnum(static_cast<unsigned char>(s_[after])) ||
            s_[after] == '_')) {
        i_ = after;
        return Value(MissingValue{});
      }
    }
    if (match('[')) {
      std::vector<Num> nums;
      while (true) {
        nums.push_back(number());
        skip_ws();
        if (match(',')) continue;
        if (match(']')) break;
        fail("expected ',' or ']'");
      }
      const bool transposed = match('\'');
      bool all_int = true;
      for (const auto& n : nums) all_int &= n.is_int;
      if (transposed) {
        // 1 x n row (a matrix-shaped literal)
        std::vector<double> data;
        for (const auto& n : nums) data.push_back(n.r);
        Matrix m(nums.size(), 1, std::move(data));
        m.trans = true;
        return Value(std::move(m));
      }
      if (all_int) {
        std::vector<std::int64_t> data;
        for (const auto& n : nums) data.push_back(n.i);
        return Value(std::move(data));
      }
      std::vector<double> data;
      for (const auto& n : nums) data.push_back(n.r);
      return Value(std::move(data));
    }
    const Num n = number();
    return n.is_int ? Value(n.i) : Value(n.r);
  }

  const std::string& s_;
  std::size_t i_ = 0;
  std::set<std::string> seen_;
};

}  // namespace

QueryExpr parse_query(const std::string& s) { return QueryParser(s).run(); }

// ------------------------------------------------------------- classify

namespace {

std::set<std::string> names_of(const std::vector<QueryBinding>& bs) {
  std::set<std::string> out;
  for (const auto& b : bs) out.insert(b.name);
  return out;
}

bool subset(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

std::string join(const std::set<std::string>& s) {
  std::string out;
  for (const auto& x : s) out += (out.empty() ? "" : ", ") + x;
  return out;
}

}  // namespace

QueryKind classify(const QueryExpr& q, const ModelDecl& decl) {
  const std::set<std::string> args(decl.params.begin(), decl.params.end());
  const std::set<std::string> tildes = tilde_symbols(decl);

  std::set<std::string> bound_data;  // args bound to non-missing values
  const auto scan = [&](const std::vector<QueryBinding>& bs) {
    for (const auto& b : bs) {
      if (args.count(b.name) == 0 && tildes.count(b.name) == 0)
        throw ClassifyError("unknown identifier '" + b.name + "' for model '" +
                            decl.name + "'");
      if (args.count(b.name) != 0 && !b.value.is_missing())
        bound_data.insert(b.name);
    }
  };
  scan(q.lhs);
  scan(q.rhs);

  std::set<std::string> parameters;
  for (const auto& t : tildes)
    if (bound_data.count(t) == 0) parameters.insert(t);

  const std::set<std::string> lhs = names_of(q.lhs);
  const std::set<std::string> rhs = names_of(q.rhs);

  if (q.has_chain) {
    if (!subset(lhs, args))
      throw ClassifyError(
          "posterior-predictive left-hand side must bind data arguments");
    return QueryKind::PosteriorPredictive;
  }

  std::set<std::string> lhs_obs;  // observed tilde symbols on the left
  for (const auto& n : lhs)
    if (tildes.count(n) != 0 && args.count(n) != 0) lhs_obs.insert(n);

  if (rhs.empty() && !lhs.empty() && subset(lhs, parameters))
    return QueryKind::Prior;

  if (subset(lhs, args) && !lhs_obs.empty() && rhs == parameters)
    return QueryKind::Likelihood;

  if (rhs.empty() && !lhs_obs.empty() && subset(parameters, lhs) &&
      subset(lhs, [&] {
        std::set<std::string> u = args;
        u.insert(parameters.begin(), parameters.end());
        return u;
      }()))
    return QueryKind::Joint;

  throw ClassifyError("bindings match no query form (lhs: {" + join(lhs) +
                      "}, rhs: {" + join(rhs) + "}, parameters: {" +
                      join(parameters) + "})");
}

// ------------------------------------------------------------- evaluate

namespace {

// parameter bindings get coerced to what the sampler would have stored
Value coerce_preset(const Value& v) {
  if (v.is_matrix()) {
    const Matrix& m = v.as_matrix();
    if (m.rows() == 1 || m.cols() == 1) {
      std::vector<double> out;
      out.reserve(m.rows() * m.cols());
      for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out.push_back(m.at(i, j));
      return Value(std::move(out));
    }
    throw EvalError("cannot bind a matrix to a parameter");
  }
  return v;
}

struct Prepared {
  Model model;
  Presets presets;
};

Prepared prepare(const std::shared_ptr<const ModelDecl>& decl,
                 const QueryExpr& q, const QueryEnv& env,
                 bool lhs_params_are_presets) {
  const std::set<std::string> args(decl->params.begin(), decl->params.end());
  std::map<std::string, Value> bound_args;
  Presets presets;

  const auto consume = [&](const std::vector<QueryBinding>& bs, bool presets_ok) {
    for (const auto& b : bs) {
      if (args.count(b.name) != 0) {
        bound_args.emplace(b.name, b.value);
      } else if (presets_ok) {
        presets.set(b.name, coerce_preset(b.value));
      }
    }
  };
  consume(q.lhs, lhs_params_are_presets);
  consume(q.rhs, true);

  if (env.data != nullptr) {
    for (const auto& [k, v] : *env.data)
      if (args.count(k) != 0) bound_args.emplace(k, v);
  }
  // remaining arguments default to missing (parameters by the missing
  // rule); models whose shapes depend on them will report the gap
  for (const auto& a : args)
    if (bound_args.count(a) == 0) bound_args.emplace(a, Value(MissingValue{}));

  return Prepared{instantiate(decl, std::move(bound_args)),
                  std::move(presets)};
}

void check_presets_consumed(const std::vector<QueryBinding>& bs,
                            const std::set<std::string>& args,
                            const UntypedTrace& t) {
  for (const auto& b : bs) {
    if (args.count(b.name) != 0) continue;
    const VarName vn(b.name);
    bool hit = false;
    for (const auto& e : t.entries())
      if (subsumes(vn, e.name)) {
        hit = true;
        break;
      }
    if (!hit)
      throw EvalError("binding '" + b.name + "' matched no random variable");
  }
}

double run_fixed(const Prepared& prep, const Context& ctx,
                 const std::vector<QueryBinding>& param_bindings,
                 const std::set<std::string>& args) {
  Rng rng(0);
  UntypedTrace t;
  EvalOptions opts;
  opts.presets = &prep.presets;
  const double lp = evaluate(prep.model, t, ctx, rng, opts);
  check_presets_consumed(param_bindings, args, t);
  return lp;
}

}  // namespace

QueryResult evaluate_query(const QueryExpr& q, const QueryEnv& env) {
  std::optional<Chain> loaded;
  const Chain* chain = nullptr;
  std::string model_name = q.model;
  if (q.has_chain) {
    if (q.chain_is_path) {
      loaded = Chain::load_csv(q.chain_ref);
      chain = &*loaded;
    } else if (env.chain != nullptr) {
      chain = env.chain;
    } else {
      throw EvalError("unknown chain handle '" + q.chain_ref +
                      "'; pass a chain or quote a CSV path");
    }
    model_name = chain->meta().model;
    if (model_name.empty())
      throw EvalError("chain carries no model name metadata");
  }

  if (env.models == nullptr || env.models->count(model_name) == 0)
    throw EvalError("unknown model '" + model_name + "'");
  const auto decl = env.models->at(model_name);

  const QueryKind kind = classify(q, *decl);
  const std::set<std::string> args(decl->params.begin(), decl->params.end());

  switch (kind) {
    case QueryKind::Prior: {
      Prepared prep = prepare(decl, q, env, /*lhs_params_are_presets=*/true);
      return {kind, run_fixed(prep, Context::Prior(), q.lhs, args)};
    }
    case QueryKind::Joint: {
      Prepared prep = prepare(decl, q, env, true);
      return {kind, run_fixed(prep, Context::Default(), q.lhs, args)};
    }
    case QueryKind::Likelihood: {
      Prepared prep = prepare(decl, q, env, false);
      return {kind, run_fixed(prep, Context::Likelihood(), q.rhs, args)};
    }
    case QueryKind::PosteriorPredictive: {
      Prepared prep = prepare(decl, q, env, false);
      const std::size_t n = chain->n_iters();
      if (n == 0) throw EvalError("empty chain");
      std::vector<double> logliks(n);
      Rng rng(0);
      for (std::size_t r = 0; r < n; ++r) {
        Presets presets;
        for (std::size_t j = 0; j < chain->n_params(); ++j)
          presets.set(chain->names()[j], Value(chain->at(r, j)));
        UntypedTrace t;
        EvalOptions opts;
        opts.presets = &presets;
        logliks[r] = evaluate(prep.model, t, Context::Likelihood(), rng, opts);
      }
      // overflow-safe log-mean-exp; exactly the row value when all
      // rows agree
      const double m = *std::max_element(logliks.begin(), logliks.end());
      if (!std::isfinite(m)) return {kind, m};
      double acc = 0.0;
      for (double l : logliks) acc += std::exp(l - m);
      return {kind, m + std::log(acc / static_cast<double>(n))};
    }
  }
  throw Error("unreachable query kind");
}

QueryResult evaluate_query(const std::string& q, const QueryEnv& env) {
  return evaluate_query(parse_query(q), env);
}

}  // namespace ppl
